#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "kd/freq_attention.hpp"
#include "kd/metrics.hpp"
#include "kd/model.hpp"
#include "kd/multiview.hpp"
#include "kd/synth_data.hpp"
#include "kd/tape.hpp"

namespace kd {

template <typename T>
struct AdamConfig {
    T lr = T(2e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

// Moment tensors shape-match their parameter; they are kept in double so the
// squared-gradient accumulator cannot overflow when the loss runs hot early in
// distillation.
template <typename T>
struct AdamState {
    std::vector<Tensor<double>> m;
    std::vector<Tensor<double>> v;
    std::int64_t step = 0;

    static AdamState like(const ModelParams<T>& params) {
        AdamState s;
        for (const Tensor<T>& t : params.tensors) {
            s.m.emplace_back(t.channels(), t.width(), t.height());
            s.v.emplace_back(t.channels(), t.width(), t.height());
        }
        return s;
    }
};

// Standard Adam update with bias correction. A non-finite gradient aborts with
// a diagnostic naming the parameter tensor.
template <typename T>
void adam_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads,
               const AdamConfig<T>& cfg, AdamState<T>& state, const ModelSpec* spec = nullptr);

template <typename T>
struct DistillConfig {
    T alpha = T(1);
    T beta = T(20);
    FreqAttentionConfig<T> freq;
    MultiViewConfig<T> mv;
    AdamConfig<T> adam;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 30;
    std::size_t patience = 10;
    std::size_t validations_per_epoch = 10;
    std::uint64_t master_seed = 1;
};

struct TrainRecord {
    std::size_t step = 0; // global step index at validation time
    double ce = 0.0;      // mean loss components since the previous validation
    double l_fr = 0.0;
    double l_mv = 0.0;
    double total = 0.0;
    double val_acc = 0.0;
};

struct TrainLog {
    std::vector<TrainRecord> records;
    std::size_t best_step = 0; // checkpoint id of the best validation
    double best_val_acc = 0.0;
    std::size_t total_steps = 0;
};

void write_train_log_csv(const TrainLog& log, const std::string& path);

template <typename T>
struct TrainResult {
    ModelParams<T> params; // best checkpoint
    TrainLog log;
};

// Per-sample inputs to the combined student objective for one batch.
template <typename T>
struct StudentBatch {
    std::vector<Var<T>> logits;
    std::vector<Var<T>> backbones;
    std::vector<const Tensor<T>*> teacher;
    std::vector<const Tensor<T>*> teacher_pos; // may hold nulls when beta == 0
    std::vector<const Tensor<T>*> teacher_neg;
    std::vector<std::size_t> labels;
};

template <typename T>
struct StudentLossVars {
    Var<T> total;
    Var<T> ce;
    Var<T> l_fr; // zero-valued constants when the corresponding weight is 0
    Var<T> l_mv;
};

// L = CE + alpha * L_FR + beta * L_MV, every term averaged over the batch.
// Teacher-side tensors are constants.
template <typename T>
StudentLossVars<T> total_student_loss(Tape<T>& tape, const StudentBatch<T>& batch,
                                      const DistillConfig<T>& cfg,
                                      std::shared_ptr<const MvPlan> plan = nullptr);

// Cross-entropy-only training on raw images with periodic validation, a
// best-accuracy checkpoint, and patience-based early stopping.
template <typename T>
TrainResult<T> train_teacher(const Dataset& data, const ModelSpec& spec,
                             const DistillConfig<T>& cfg);

// Distillation: the frozen teacher forwards raw images, the student forwards
// the degraded pairs; positives and negatives are drawn from the same batch.
template <typename T>
TrainResult<T> distill_student(const Dataset& data, const ModelSpec& spec,
                               const ModelParams<T>& teacher, const DistillConfig<T>& cfg);

// ACC and R@1 of a model over one sample list (penultimate pooled features).
template <typename T>
EvalResult evaluate_model(const ModelSpec& spec, const ModelParams<T>& params,
                          const std::vector<Sample>& samples, bool use_degraded);

// Checkpoint directory: one ADT1 file per parameter tensor in spec order plus
// manifest.json carrying the spec hash, step and validation accuracy.
template <typename T>
void save_checkpoint(const std::string& dir, const ModelSpec& spec, const ModelParams<T>& params,
                     std::size_t step, double val_acc);

template <typename T>
ModelParams<T> load_checkpoint(const std::string& dir, const ModelSpec& spec);

} // namespace kd

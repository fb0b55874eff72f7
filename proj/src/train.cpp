#include "kd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "kd/errors.hpp"
#include "kd/rng.hpp"
#include "kd/tensor_io.hpp"

namespace kd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// seed-derivation tags so the independent random streams never collide
enum : std::uint64_t {
    kSeedInit = 0x11,
    kSeedShuffle = 0x22,
    kSeedPosNeg = 0x33,
    kSeedMvPlan = 0x44,
};

std::uint64_t derive(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return mix_seed(mix_seed(master, tag), index);
}

} // namespace

template <typename T>
void adam_step(ModelParams<T>& params, const std::vector<Tensor<T>>& grads,
               const AdamConfig<T>& cfg, AdamState<T>& state, const ModelSpec* spec) {
    if (grads.size() != params.tensors.size()) {
        throw ContractError("adam_step: gradient count does not match parameter count");
    }
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(static_cast<double>(cfg.beta1), t);
    const double bc2 = 1.0 - std::pow(static_cast<double>(cfg.beta2), t);
    for (std::size_t p = 0; p < params.tensors.size(); ++p) {
        Tensor<T>& w = params.tensors[p];
        const Tensor<T>& g = grads[p];
        if (!g.all_finite()) {
            const std::string name = spec ? spec->param_name(p) : "param_" + std::to_string(p);
            throw DataError("adam_step: non-finite gradient in " + name + "; training aborted");
        }
        Tensor<double>& m = state.m[p];
        Tensor<double>& v = state.v[p];
        const double beta1 = static_cast<double>(cfg.beta1);
        const double beta2 = static_cast<double>(cfg.beta2);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double gi = static_cast<double>(g[i]);
            m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
            v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= static_cast<T>(static_cast<double>(cfg.lr) * m_hat /
                                   (std::sqrt(v_hat) + static_cast<double>(cfg.eps)));
        }
    }
}

void write_train_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write train log " + path);
    os << "step,ce,l_fr,l_mv,total,val_acc\n";
    char line[256];
    for (const TrainRecord& r : log.records) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.step, r.ce, r.l_fr,
                      r.l_mv, r.total, r.val_acc);
        os << line;
    }
}

template <typename T>
StudentLossVars<T> total_student_loss(Tape<T>& tape, const StudentBatch<T>& batch,
                                      const DistillConfig<T>& cfg,
                                      std::shared_ptr<const MvPlan> plan) {
    const std::size_t n = batch.logits.size();
    if (n == 0) throw DataError("total_student_loss: empty batch");
    if (batch.backbones.size() != n || batch.teacher.size() != n || batch.labels.size() != n) {
        throw ContractError("total_student_loss: batch field sizes disagree");
    }
    const T inv_n = T(1) / static_cast<T>(n);

    std::vector<Var<T>> ce_terms;
    ce_terms.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ce_terms.push_back(cross_entropy(tape, batch.logits[i], batch.labels[i]));
    }
    StudentLossVars<T> out;
    out.ce = scale(sum_scalars(tape, ce_terms), inv_n);
    out.total = out.ce;

    if (cfg.alpha != T(0)) {
        std::vector<Var<T>> fr_terms;
        fr_terms.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            fr_terms.push_back(freq_loss(tape, batch.backbones[i], *batch.teacher[i], cfg.freq));
        }
        out.l_fr = scale(sum_scalars(tape, fr_terms), inv_n);
        out.total = add(out.total, scale(out.l_fr, cfg.alpha));
    } else {
        out.l_fr = tape.constant(Tensor<T>::scalar(T(0)));
    }

    if (cfg.beta != T(0)) {
        if (batch.teacher_pos.size() != n || batch.teacher_neg.size() != n) {
            throw ContractError("total_student_loss: positive/negative lists incomplete");
        }
        if (!plan) {
            const Tensor<T>& shape_src = tape.value(batch.backbones[0]);
            const std::size_t g = resolve_groups(cfg.mv.g, shape_src.channels());
            plan = std::make_shared<const MvPlan>(make_mv_plan(shape_src.channels(),
                                                               shape_src.width(),
                                                               shape_src.height(), cfg.mv.k, g,
                                                               cfg.mv.seed));
        }
        std::vector<Var<T>> mv_terms;
        mv_terms.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            mv_terms.push_back(mv_loss(tape, batch.backbones[i], *batch.teacher[i],
                                       batch.teacher_pos[i], batch.teacher_neg[i], cfg.mv, plan));
        }
        out.l_mv = scale(sum_scalars(tape, mv_terms), inv_n);
        out.total = add(out.total, scale(out.l_mv, cfg.beta));
    } else {
        out.l_mv = tape.constant(Tensor<T>::scalar(T(0)));
    }
    return out;
}

namespace {

// Class-stratified batch order: each batch draws batch_size/2 shuffled samples
// from each class, so positives and negatives always exist in the batch.
std::vector<std::vector<std::size_t>> stratified_batches(const std::vector<Sample>& samples,
                                                         std::size_t batch_size,
                                                         std::uint64_t seed) {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int label = samples[i].label;
        if (label != 0 && label != 1) {
            throw DataError("sample label " + std::to_string(label) + " outside {0,1}");
        }
        by_class[label].push_back(i);
    }
    if (by_class[0].empty() || by_class[1].empty()) {
        throw DataError("training split must contain both classes");
    }
    Rng rng(seed);
    for (auto& list : {&by_class[0], &by_class[1]}) {
        for (std::size_t i = list->size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.below(i));
            std::swap((*list)[i - 1], (*list)[j]);
        }
    }
    const std::size_t half = batch_size / 2;
    const std::size_t num_batches = std::min(by_class[0].size(), by_class[1].size()) / half;
    std::vector<std::vector<std::size_t>> batches;
    batches.reserve(num_batches);
    for (std::size_t b = 0; b < num_batches; ++b) {
        std::vector<std::size_t> batch;
        batch.reserve(2 * half);
        for (std::size_t i = 0; i < half; ++i) {
            batch.push_back(by_class[0][b * half + i]);
            batch.push_back(by_class[1][b * half + i]);
        }
        batches.push_back(std::move(batch));
    }
    if (batches.empty()) throw DataError("training split too small for one batch");
    return batches;
}

template <typename T>
std::vector<std::vector<T>> logits_rows(const ModelSpec& spec, const ModelParams<T>& params,
                                        const std::vector<Sample>& samples, bool use_degraded) {
    std::vector<std::vector<T>> rows;
    rows.reserve(samples.size());
    for (const Sample& s : samples) {
        const Tensor<T> image = (use_degraded ? s.degraded : s.raw).template cast<T>();
        rows.push_back(forward_infer(spec, params, image).logits.values());
    }
    return rows;
}

template <typename T>
double validation_accuracy(const ModelSpec& spec, const ModelParams<T>& params,
                           const std::vector<Sample>& samples, bool use_degraded) {
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const Sample& s : samples) labels.push_back(s.label);
    return accuracy(logits_rows(spec, params, samples, use_degraded), labels);
}

struct LossAccumulator {
    double ce = 0.0, l_fr = 0.0, l_mv = 0.0, total = 0.0;
    std::size_t count = 0;

    void add(double c, double f, double m, double t) {
        ce += c;
        l_fr += f;
        l_mv += m;
        total += t;
        ++count;
    }
    TrainRecord flush(std::size_t step, double val_acc) {
        TrainRecord r;
        const double inv = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
        r.step = step;
        r.ce = ce * inv;
        r.l_fr = l_fr * inv;
        r.l_mv = l_mv * inv;
        r.total = total * inv;
        r.val_acc = val_acc;
        *this = LossAccumulator{};
        return r;
    }
};

// Shared loop: teacher training is the distillation loop with both distiller
// weights at zero and raw inputs on the student side.
template <typename T>
TrainResult<T> run_training(const Dataset& data, const ModelSpec& spec,
                            const ModelParams<T>* teacher, const DistillConfig<T>& cfg,
                            bool student_sees_degraded) {
    if (data.train.empty() || data.val.empty()) {
        throw DataError("training requires non-empty train and val splits");
    }
    if (cfg.patience < 1) throw ConfigError("patience must be >= 1");
    const bool distilling = teacher != nullptr;
    const bool needs_mv = distilling && cfg.beta != T(0);
    const bool needs_fr = distilling && cfg.alpha != T(0);

    ModelParams<T> params = init_params<T>(spec, derive(cfg.master_seed, kSeedInit, 0));
    AdamState<T> adam = AdamState<T>::like(params);
    const ModelSpec::FeatureShape feat = spec.backbone_shape();
    const std::size_t groups = resolve_groups(cfg.mv.g, feat.channels);

    TrainResult<T> result;
    result.params = params;
    double best_acc = -1.0;
    std::size_t bad_validations = 0;
    std::size_t global_step = 0;
    LossAccumulator acc;
    bool stop = false;

    // the teacher is frozen, so its backbone features per training sample are
    // fixed for the whole run
    std::vector<Tensor<T>> teacher_cache;
    if (distilling) {
        teacher_cache.reserve(data.train.size());
        for (const Sample& s : data.train) {
            teacher_cache.push_back(
                forward_infer(spec, *teacher, s.raw.template cast<T>()).backbone);
        }
    }
    const Tensor<T> unused_teacher(feat.channels, feat.width, feat.height);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
        const auto batches = stratified_batches(data.train, cfg.batch_size,
                                                derive(cfg.master_seed, kSeedShuffle, epoch));
        const std::size_t interval =
            std::max<std::size_t>(1, batches.size() / cfg.validations_per_epoch);
        for (const std::vector<std::size_t>& batch : batches) {
            ++global_step;
            Tape<T> tape;
            std::vector<Var<T>> param_vars;
            param_vars.reserve(params.tensors.size());
            for (const Tensor<T>& t : params.tensors) param_vars.push_back(tape.leaf(t));

            StudentBatch<T> sb;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const Sample& s = data.train[batch[i]];
                const Tensor<T> image =
                    (student_sees_degraded ? s.degraded : s.raw).template cast<T>();
                ForwardVars<T> fwd = forward_train(tape, spec, param_vars, image);
                sb.logits.push_back(fwd.logits);
                sb.backbones.push_back(fwd.backbone);
                sb.labels.push_back(static_cast<std::size_t>(s.label));
                sb.teacher.push_back(distilling ? &teacher_cache[batch[i]] : &unused_teacher);
            }
            sb.teacher_pos.assign(batch.size(), nullptr);
            sb.teacher_neg.assign(batch.size(), nullptr);
            if (needs_mv) {
                Rng pair_rng(derive(cfg.master_seed, kSeedPosNeg, global_step));
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    std::vector<std::size_t> pos_candidates;
                    std::vector<std::size_t> neg_candidates;
                    for (std::size_t j = 0; j < batch.size(); ++j) {
                        if (sb.labels[j] == sb.labels[i]) {
                            if (j != i) pos_candidates.push_back(j); // no self-pairing
                        } else {
                            neg_candidates.push_back(j);
                        }
                    }
                    if (pos_candidates.empty() || neg_candidates.empty()) {
                        throw DataError("batch lacks a positive or negative teacher sample");
                    }
                    const std::size_t pj = pos_candidates[pair_rng.below(pos_candidates.size())];
                    const std::size_t nj = neg_candidates[pair_rng.below(neg_candidates.size())];
                    sb.teacher_pos[i] = &teacher_cache[batch[pj]];
                    sb.teacher_neg[i] = &teacher_cache[batch[nj]];
                }
            }

            DistillConfig<T> step_cfg = cfg;
            if (!distilling) {
                step_cfg.alpha = T(0);
                step_cfg.beta = T(0);
            }
            std::shared_ptr<const MvPlan> plan;
            if (needs_mv) {
                plan = std::make_shared<const MvPlan>(
                    make_mv_plan(feat.channels, feat.width, feat.height, cfg.mv.k, groups,
                                 derive(cfg.master_seed, kSeedMvPlan, global_step)));
            }
            StudentLossVars<T> loss = total_student_loss(tape, sb, step_cfg, plan);
            tape.backward(loss.total);

            std::vector<Tensor<T>> grads;
            grads.reserve(param_vars.size());
            for (Var<T> v : param_vars) grads.push_back(tape.grad(v));
            adam_step(params, grads, cfg.adam, adam, &spec);

            acc.add(static_cast<double>(tape.value(loss.ce)[0]),
                    needs_fr ? static_cast<double>(tape.value(loss.l_fr)[0]) : 0.0,
                    needs_mv ? static_cast<double>(tape.value(loss.l_mv)[0]) : 0.0,
                    static_cast<double>(tape.value(loss.total)[0]));

            if (global_step % interval == 0) {
                const double val_acc =
                    validation_accuracy(spec, params, data.val, student_sees_degraded);
                result.log.records.push_back(acc.flush(global_step, val_acc));
                if (val_acc > best_acc) {
                    best_acc = val_acc;
                    result.params = params;
                    result.log.best_step = global_step;
                    result.log.best_val_acc = val_acc;
                    bad_validations = 0;
                } else {
                    ++bad_validations;
                    if (bad_validations >= cfg.patience) {
                        stop = true;
                        break;
                    }
                }
            }
        }
    }
    result.log.total_steps = global_step;
    return result;
}

} // namespace

template <typename T>
TrainResult<T> train_teacher(const Dataset& data, const ModelSpec& spec,
                             const DistillConfig<T>& cfg) {
    return run_training<T>(data, spec, nullptr, cfg, /*student_sees_degraded=*/false);
}

template <typename T>
TrainResult<T> distill_student(const Dataset& data, const ModelSpec& spec,
                               const ModelParams<T>& teacher, const DistillConfig<T>& cfg) {
    return run_training<T>(data, spec, &teacher, cfg, /*student_sees_degraded=*/true);
}

template <typename T>
EvalResult evaluate_model(const ModelSpec& spec, const ModelParams<T>& params,
                          const std::vector<Sample>& samples, bool use_degraded) {
    if (samples.empty()) throw DataError("evaluate_model: empty sample list");
    std::vector<std::vector<T>> logits;
    std::vector<std::vector<T>> features;
    std::vector<int> labels;
    logits.reserve(samples.size());
    features.reserve(samples.size());
    labels.reserve(samples.size());
    for (const Sample& s : samples) {
        const Tensor<T> image = (use_degraded ? s.degraded : s.raw).template cast<T>();
        ForwardResult<T> fwd = forward_infer(spec, params, image);
        logits.push_back(fwd.logits.values());
        features.push_back(fwd.pooled.values());
        labels.push_back(s.label);
    }
    EvalResult result;
    result.n = samples.size();
    result.acc = accuracy(logits, labels);
    result.recall_at_1 = recall_at_k(features, labels, 1);
    return result;
}

namespace {

std::string param_file_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "p%03zu.adt1", i);
    return buf;
}

} // namespace

template <typename T>
void save_checkpoint(const std::string& dir, const ModelSpec& spec, const ModelParams<T>& params,
                     std::size_t step, double val_acc) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir + ": " + ec.message());
    json files = json::array();
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        const std::string name = param_file_name(i);
        write_adt1(params.tensors[i].template cast<float>(), (fs::path(dir) / name).string());
        files.push_back(name);
    }
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(spec.spec_hash()));
    json j{{"schema_version", 1},
           {"spec_hash", hash},
           {"step", step},
           {"val_acc", val_acc},
           {"files", files}};
    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw IoError("cannot write checkpoint manifest in " + dir);
    os << j.dump(2) << "\n";
}

template <typename T>
ModelParams<T> load_checkpoint(const std::string& dir, const ModelSpec& spec) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw IoError("cannot open checkpoint manifest in " + dir);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint manifest in " + dir + ": " + e.what());
    }
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(spec.spec_hash()));
    if (j.at("spec_hash").get<std::string>() != hash) {
        throw DataError("checkpoint in " + dir + " was written for a different model spec");
    }
    const auto files = j.at("files").get<std::vector<std::string>>();
    if (files.size() != spec.num_param_tensors()) {
        throw DataError("checkpoint in " + dir + " has wrong parameter count");
    }
    ModelParams<T> params;
    for (const std::string& name : files) {
        params.tensors.push_back(read_adt1((fs::path(dir) / name).string()).cast<T>());
    }
    return params;
}

template void adam_step<float>(ModelParams<float>&, const std::vector<Tensor<float>>&,
                               const AdamConfig<float>&, AdamState<float>&, const ModelSpec*);
template void adam_step<double>(ModelParams<double>&, const std::vector<Tensor<double>>&,
                                const AdamConfig<double>&, AdamState<double>&, const ModelSpec*);
template StudentLossVars<float> total_student_loss<float>(Tape<float>&, const StudentBatch<float>&,
                                                          const DistillConfig<float>&,
                                                          std::shared_ptr<const MvPlan>);
template StudentLossVars<double> total_student_loss<double>(Tape<double>&,
                                                            const StudentBatch<double>&,
                                                            const DistillConfig<double>&,
                                                            std::shared_ptr<const MvPlan>);
template TrainResult<float> train_teacher<float>(const Dataset&, const ModelSpec&,
                                                 const DistillConfig<float>&);
template TrainResult<double> train_teacher<double>(const Dataset&, const ModelSpec&,
                                                   const DistillConfig<double>&);
template TrainResult<float> distill_student<float>(const Dataset&, const ModelSpec&,
                                                   const ModelParams<float>&,
                                                   const DistillConfig<float>&);
template TrainResult<double> distill_student<double>(const Dataset&, const ModelSpec&,
                                                     const ModelParams<double>&,
                                                     const DistillConfig<double>&);
template EvalResult evaluate_model<float>(const ModelSpec&, const ModelParams<float>&,
                                          const std::vector<Sample>&, bool);
template EvalResult evaluate_model<double>(const ModelSpec&, const ModelParams<double>&,
                                           const std::vector<Sample>&, bool);
template void save_checkpoint<float>(const std::string&, const ModelSpec&,
                                     const ModelParams<float>&, std::size_t, double);
template void save_checkpoint<double>(const std::string&, const ModelSpec&,
                                      const ModelParams<double>&, std::size_t, double);
template ModelParams<float> load_checkpoint<float>(const std::string&, const ModelSpec&);
template ModelParams<double> load_checkpoint<double>(const std::string&, const ModelSpec&);

} // namespace kd

#include "kd/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include <CLI11.hpp>

#include "kd/config.hpp"
#include "kd/errors.hpp"
#include "kd/gradcheck.hpp"
#include "kd/metrics.hpp"
#include "kd/multiview.hpp"
#include "kd/spectral.hpp"
#include "kd/swd_oracle.hpp"
#include "kd/synth_data.hpp"
#include "kd/tensor_io.hpp"
#include "kd/train.hpp"

namespace kd {

namespace fs = std::filesystem;

namespace {

// ---- shared helpers ----------------------------------------------------------

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path);
    return os;
}

ModelSpec model_for(const GenConfig& gen) {
    ModelSpec spec = ModelSpec::desk_default();
    spec.image_size = gen.image_size;
    return spec;
}

DensityTensor<double> density_from_file(const std::string& path, bool normalize) {
    const Tensor<double> t = read_adt1(path).cast<double>();
    if (normalize) return normalize_density(t);
    double sum = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (t[i] < 0) {
            throw DataError(path + " holds negative mass; pass --normalize for feature tensors");
        }
        sum += t[i];
    }
    if (std::abs(sum - 1.0) > 1e-3) {
        throw DataError(path + " masses sum to " + std::to_string(sum) +
                        ", not 1; pass --normalize for feature tensors");
    }
    DensityTensor<double> d;
    d.masses = t;
    return d;
}

void write_pgm(const SpectrumDiffMap<double>& map, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "P2\n" << map.height << " " << map.width << "\n255\n";
    for (std::size_t u = 0; u < map.width; ++u) {
        for (std::size_t v = 0; v < map.height; ++v) {
            const int level = static_cast<int>(std::lround(map.at(u, v) * 255.0));
            os << level << (v + 1 == map.height ? "" : " ");
        }
        os << "\n";
    }
}

void write_map_csv(const SpectrumDiffMap<double>& map, std::ostream& os) {
    os << "u,v,value\n";
    char line[64];
    for (std::size_t u = 0; u < map.width; ++u) {
        for (std::size_t v = 0; v < map.height; ++v) {
            std::snprintf(line, sizeof(line), "%zu,%zu,%.9g\n", u, v, map.at(u, v));
            os << line;
        }
    }
}

// ---- subcommands ---------------------------------------------------------------

int run_gen_data(const CliConfig& cfg, const std::string& out_dir) {
    ensure_dir(out_dir);
    const DatasetManifest manifest = build_dataset(cfg.gen, out_dir);
    cfg.write((fs::path(out_dir) / "config.json").string());
    std::printf("wrote %zu samples to %s\n", manifest.samples.size(), out_dir.c_str());
    return 0;
}

int run_train_teacher(const CliConfig& cfg, const std::string& data_dir,
                      const std::string& out_dir) {
    const Dataset data = load_dataset(data_dir);
    const ModelSpec spec = model_for(cfg.gen);
    const TrainResult<float> result = train_teacher(data, spec, cfg.train);
    ensure_dir(out_dir);
    cfg.write((fs::path(out_dir) / "config.json").string());
    save_checkpoint((fs::path(out_dir) / "checkpoint").string(), spec, result.params,
                    result.log.best_step, result.log.best_val_acc);
    write_train_log_csv(result.log, (fs::path(out_dir) / "train_log.csv").string());
    const EvalResult ev = evaluate_model(spec, result.params, data.test, false);
    std::printf("teacher: steps=%zu best_val_acc=%.6f test_raw_acc=%.6f test_raw_r_at_1=%.6f\n",
                result.log.total_steps, result.log.best_val_acc, ev.acc, ev.recall_at_1);
    return 0;
}

int run_distill(const CliConfig& cfg, const std::string& data_dir,
                const std::string& teacher_dir, const std::string& out_dir) {
    if (cfg.train.beta != 0.0f) cfg.require_mv_k();
    const Dataset data = load_dataset(data_dir);
    const ModelSpec spec = model_for(cfg.gen);
    const ModelParams<float> teacher = load_checkpoint<float>(teacher_dir, spec);
    const TrainResult<float> result = distill_student(data, spec, teacher, cfg.train);
    ensure_dir(out_dir);
    cfg.write((fs::path(out_dir) / "config.json").string());
    save_checkpoint((fs::path(out_dir) / "checkpoint").string(), spec, result.params,
                    result.log.best_step, result.log.best_val_acc);
    write_train_log_csv(result.log, (fs::path(out_dir) / "train_log.csv").string());
    const EvalResult ev = evaluate_model(spec, result.params, data.test, true);
    std::printf("student: steps=%zu best_val_acc=%.6f test_deg_acc=%.6f test_deg_r_at_1=%.6f\n",
                result.log.total_steps, result.log.best_val_acc, ev.acc, ev.recall_at_1);
    return 0;
}

int run_eval(const std::string& model_dir, const std::string& data_dir, const std::string& split,
             const std::string& quality) {
    const Dataset data = load_dataset(data_dir);
    const std::vector<Sample>* samples = split == "train" ? &data.train
                                         : split == "val" ? &data.val
                                                          : &data.test;
    if (split != "train" && split != "val" && split != "test") {
        throw ConfigError("eval: --split must be train, val or test");
    }
    const bool degraded = quality == "deg";
    if (!degraded && quality != "raw") {
        throw ConfigError("eval: --quality must be raw or deg");
    }
    if (samples->empty()) throw DataError("eval: split '" + split + "' is empty");
    ModelSpec spec = ModelSpec::desk_default();
    spec.image_size = (*samples)[0].raw.width();
    const ModelParams<float> params = load_checkpoint<float>(model_dir, spec);
    const EvalResult ev = evaluate_model(spec, params, *samples, degraded);
    std::printf("dataset,quality,acc,r_at_1,n\n");
    std::printf("%s,%s,%.6f,%.6f,%zu\n", data_dir.c_str(), quality.c_str(), ev.acc,
                ev.recall_at_1, ev.n);
    return 0;
}

struct AblationCell {
    const char* name;
    bool use_fr;
    bool use_mv;
};

constexpr AblationCell kAblationCells[4] = {
    {"baseline", false, false}, {"fr", true, false}, {"mv", false, true}, {"fr+mv", true, true}};

int run_ablate(const CliConfig& cfg, const std::string& data_dir, const std::string& out_dir,
               std::size_t seeds) {
    cfg.require_mv_k();
    if (seeds < 1) throw ConfigError("ablate: --seeds must be >= 1");
    const Dataset data = load_dataset(data_dir);
    const ModelSpec spec = model_for(cfg.gen);
    ensure_dir(out_dir);
    cfg.write((fs::path(out_dir) / "config.json").string());

    std::ofstream runs = open_out((fs::path(out_dir) / "ablate_runs.csv").string());
    runs << "model,seed_index,master_seed,acc,r_at_1,best_val_acc,steps\n";
    char line[256];

    double sum_acc[4] = {};
    double sum_r[4] = {};
    std::size_t n_eval = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        DistillConfig<float> run_cfg = cfg.train;
        run_cfg.master_seed = cfg.train.master_seed + s;
        const TrainResult<float> teacher = train_teacher(data, spec, run_cfg);
        const EvalResult tev = evaluate_model(spec, teacher.params, data.test, false);
        std::snprintf(line, sizeof(line), "teacher,%zu,%llu,%.6f,%.6f,%.6f,%zu\n", s,
                      static_cast<unsigned long long>(run_cfg.master_seed), tev.acc,
                      tev.recall_at_1, teacher.log.best_val_acc, teacher.log.total_steps);
        runs << line;
        for (int c = 0; c < 4; ++c) {
            DistillConfig<float> cell_cfg = run_cfg;
            if (!kAblationCells[c].use_fr) cell_cfg.alpha = 0.0f;
            if (!kAblationCells[c].use_mv) cell_cfg.beta = 0.0f;
            const TrainResult<float> student =
                distill_student(data, spec, teacher.params, cell_cfg);
            const EvalResult ev = evaluate_model(spec, student.params, data.test, true);
            sum_acc[c] += ev.acc;
            sum_r[c] += ev.recall_at_1;
            n_eval = ev.n;
            std::snprintf(line, sizeof(line), "%s,%zu,%llu,%.6f,%.6f,%.6f,%zu\n",
                          kAblationCells[c].name, s,
                          static_cast<unsigned long long>(run_cfg.master_seed), ev.acc,
                          ev.recall_at_1, student.log.best_val_acc, student.log.total_steps);
            runs << line;
        }
    }

    std::ofstream table = open_out((fs::path(out_dir) / "ablate.csv").string());
    const std::string header = "model,acc,r_at_1,n,seeds\n";
    table << header;
    std::fputs(header.c_str(), stdout);
    for (int c = 0; c < 4; ++c) {
        std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%zu,%zu\n", kAblationCells[c].name,
                      sum_acc[c] / static_cast<double>(seeds),
                      sum_r[c] / static_cast<double>(seeds), n_eval, seeds);
        table << line;
        std::fputs(line, stdout);
    }
    return 0;
}

int run_swd(const std::string& a_path, const std::string& b_path, std::size_t k, std::size_t g,
            std::uint64_t seed, bool normalize, const std::string& per_projection_csv) {
    const DensityTensor<double> p_s = density_from_file(a_path, normalize);
    const DensityTensor<double> p_t = density_from_file(b_path, normalize);
    const Tensor<double>& m = p_s.masses;
    const std::size_t groups = resolve_groups(g, m.channels());
    const MvPlan plan =
        make_mv_plan(m.channels(), m.width(), m.height(), k, groups, seed);
    const double value = swd_with_plan(p_s, p_t, plan);
    if (!per_projection_csv.empty()) {
        std::ofstream os = open_out(per_projection_csv);
        os << "projection,bin,v_s,v_t\n";
        char line[128];
        for (std::size_t d = 0; d < plan.plans.size(); ++d) {
            AttentionVector<double> vs = project_sort_bin(p_s, plan.proj.directions[d], groups);
            AttentionVector<double> vt = project_sort_bin(p_t, plan.proj.directions[d], groups);
            for (std::size_t j = 0; j < groups; ++j) {
                std::snprintf(line, sizeof(line), "%zu,%zu,%.9g,%.9g\n", d, j, vs.bin_mass[j],
                              vt.bin_mass[j]);
                os << line;
            }
        }
    }
    std::printf("%.9g\n", value);
    return 0;
}

int run_spectrum_diff(const std::string& raw_path, const std::string& deg_path,
                      const std::string& pgm_path, const std::string& csv_path) {
    const Tensor<double> raw = read_adt1(raw_path).cast<double>();
    const Tensor<double> deg = read_adt1(deg_path).cast<double>();
    const SpectrumDiffMap<double> map = spectrum_diff(raw, deg);
    if (!pgm_path.empty()) write_pgm(map, pgm_path);
    if (!csv_path.empty()) {
        std::ofstream os = open_out(csv_path);
        write_map_csv(map, os);
    }
    if (pgm_path.empty() && csv_path.empty()) {
        write_map_csv(map, std::cout);
    }
    return 0;
}

int run_freq_loss(const std::string& a_s_path, const std::string& a_t_path, double gamma_fr,
                  const std::string& reduction, bool attached,
                  const std::string& weights_csv) {
    const Tensor<double> a_s = read_adt1(a_s_path).cast<double>();
    const Tensor<double> a_t = read_adt1(a_t_path).cast<double>();
    FreqAttentionConfig<double> cfg;
    cfg.gamma_fr = gamma_fr;
    cfg.weight_detached = !attached;
    if (reduction == "mean") {
        cfg.reduction = Reduction::mean;
    } else if (reduction != "sum") {
        throw ConfigError("freq-loss: --reduction must be sum or mean");
    }
    if (!weights_csv.empty()) {
        const WeightMap<double> w =
            freq_weight(dft2_per_channel(a_s), dft2_per_channel(a_t), cfg);
        std::ofstream os = open_out(weights_csv);
        os << "u,v,weight\n";
        char line[64];
        for (std::size_t u = 0; u < w.width; ++u) {
            for (std::size_t v = 0; v < w.height; ++v) {
                std::snprintf(line, sizeof(line), "%zu,%zu,%.9g\n", u, v, w.at(u, v));
                os << line;
            }
        }
    }
    std::printf("%.9g\n", freq_loss_value(a_s, a_t, cfg));
    return 0;
}

int run_mv_loss(const std::string& a_s_path, const std::string& a_t_path,
                const std::string& pos_path, const std::string& neg_path,
                const MultiViewConfig<double>& cfg) {
    const Tensor<double> a_s = read_adt1(a_s_path).cast<double>();
    const Tensor<double> a_t = read_adt1(a_t_path).cast<double>();
    std::unique_ptr<Tensor<double>> pos;
    std::unique_ptr<Tensor<double>> neg;
    if (!pos_path.empty()) pos = std::make_unique<Tensor<double>>(read_adt1(pos_path).cast<double>());
    if (!neg_path.empty()) neg = std::make_unique<Tensor<double>>(read_adt1(neg_path).cast<double>());
    std::printf("%.9g\n", mv_loss_value(a_s, a_t, pos.get(), neg.get(), cfg));
    return 0;
}

// ---- gradcheck suites ----------------------------------------------------------

TensorD gradcheck_random(std::size_t c, std::size_t w, std::size_t h, std::uint64_t seed) {
    Rng rng(seed);
    TensorD t(c, w, h);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform() * 2.0 - 1.0;
    return t;
}

struct SuiteResult {
    std::string name;
    GradCheckReport<double> report;
    double threshold;
};

std::vector<SuiteResult> run_gradcheck_suites(const std::string& only) {
    std::vector<SuiteResult> results;
    const auto want = [&](const char* name) { return only.empty() || only == name; };

    if (want("elementwise")) {
        const TensorD x = gradcheck_random(2, 4, 4, 11);
        const auto f = [](Tape<double>&, Var<double> v) {
            return add(sum_all(mul(square(v), exp(scale(v, 0.5)))), frobenius_norm_sq(v));
        };
        results.push_back({"elementwise", finite_difference_check<double>(f, x, 1e-6), 1e-6});
    }
    if (want("freq_attached")) {
        const TensorD teacher = gradcheck_random(2, 4, 4, 21);
        const TensorD student = gradcheck_random(2, 4, 4, 22);
        FreqAttentionConfig<double> cfg;
        cfg.weight_detached = false;
        const auto f = [&](Tape<double>& t, Var<double> v) {
            return freq_loss(t, v, teacher, cfg);
        };
        results.push_back(
            {"freq_attached", finite_difference_check<double>(f, student, 1e-5), 1e-3});
    }
    if (want("freq_detached")) {
        const TensorD teacher = gradcheck_random(2, 4, 4, 31);
        const TensorD student = gradcheck_random(2, 4, 4, 32);
        FreqAttentionConfig<double> cfg;
        const WeightMap<double> frozen =
            freq_weight(dft2_per_channel(student), dft2_per_channel(teacher), cfg);
        const auto f = [&](Tape<double>& t, Var<double> v) {
            return freq_loss_with_weights(t, v, teacher, frozen, cfg.reduction);
        };
        results.push_back(
            {"freq_detached", finite_difference_check<double>(f, student, 1e-5), 1e-3});
    }
    if (want("mv_loss")) {
        const TensorD a_s = gradcheck_random(2, 4, 4, 41);
        const TensorD a_t = gradcheck_random(2, 4, 4, 42);
        const TensorD pos = gradcheck_random(2, 4, 4, 43);
        const TensorD neg = gradcheck_random(2, 4, 4, 44);
        MultiViewConfig<double> cfg;
        cfg.k = 8;
        cfg.g = 4;
        cfg.seed = 5;
        const auto f = [&](Tape<double>& t, Var<double> v) {
            return mv_loss(t, v, a_t, &pos, &neg, cfg);
        };
        results.push_back({"mv_loss", finite_difference_check<double>(f, a_s, 1e-5), 1e-3});
    }
    if (want("total_student_loss")) {
        ModelSpec spec;
        spec.image_size = 8;
        spec.blocks = {{4, 1, true}};
        const ModelParams<double> student = init_params<double>(spec, 51);
        const ModelParams<double> teacher = init_params<double>(spec, 52);
        GenConfig gen;
        gen.image_size = 8;
        gen.num_train = 2;
        gen.num_val = 1;
        gen.num_test = 1;
        gen.seed = 53;
        const Dataset data = generate_dataset(gen);
        std::vector<const Sample*> by_class[2];
        for (const Sample& s : data.train) by_class[s.label].push_back(&s);
        const std::vector<const Sample*> samples = {by_class[0][0], by_class[1][0],
                                                    by_class[0][1], by_class[1][1]};
        std::vector<TensorD> feats;
        for (const Sample* s : samples) {
            feats.push_back(forward_infer(spec, teacher, s->raw.cast<double>()).backbone);
        }
        DistillConfig<double> cfg;
        cfg.alpha = 0.5;
        cfg.beta = 2.0;
        cfg.freq.weight_detached = false;
        cfg.freq.gamma_fr = 0.02;
        cfg.mv.k = 4;
        cfg.mv.g = 2;
        cfg.mv.seed = 54;
        const auto f = [&](Tape<double>& tape, const std::vector<Var<double>>& params) {
            StudentBatch<double> batch;
            for (std::size_t i = 0; i < samples.size(); ++i) {
                const auto fwd =
                    forward_train(tape, spec, params, samples[i]->degraded.cast<double>());
                batch.logits.push_back(fwd.logits);
                batch.backbones.push_back(fwd.backbone);
                batch.labels.push_back(static_cast<std::size_t>(samples[i]->label));
                batch.teacher.push_back(&feats[i]);
            }
            batch.teacher_pos = {&feats[2], &feats[3], &feats[0], &feats[1]};
            batch.teacher_neg = {&feats[1], &feats[0], &feats[3], &feats[2]};
            return total_student_loss(tape, batch, cfg).total;
        };
        results.push_back({"total_student_loss",
                           finite_difference_check_multi<double>(f, student.tensors, 1e-5, 0, 7),
                           1e-3});
    }
    if (results.empty()) {
        throw ConfigError("gradcheck: unknown suite '" + only + "'");
    }
    return results;
}

int run_gradcheck(const std::string& only) {
    const std::vector<SuiteResult> results = run_gradcheck_suites(only);
    std::printf("suite,max_relative_error,num_parameters_checked,step_size,status\n");
    bool all_ok = true;
    for (const SuiteResult& r : results) {
        const bool ok = r.report.max_relative_error < r.threshold;
        all_ok = all_ok && ok;
        std::printf("%s,%.6g,%zu,%.3g,%s\n", r.name.c_str(), r.report.max_relative_error,
                    r.report.num_parameters_checked, r.report.step_size, ok ? "pass" : "FAIL");
    }
    return all_ok ? 0 : 1;
}

} // namespace

int cli_dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Frequency and multi-view attention distillation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, teacher_dir, model_dir;
    std::string pos_path, neg_path, pgm_path, csv_path, weights_csv, per_projection_csv;
    std::string split = "test", quality = "deg", reduction = "sum", suite;
    std::vector<std::string> positionals;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    std::size_t seeds = 1;
    std::size_t k = 0, g = 0;
    std::uint64_t seed = 0;
    double gamma_fr = 1.0, gamma_mv = 100.0, eta_mv = 50.0, margin = 0.012;
    bool attached = false, normalize = false;

    CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a paired raw/degraded dataset");
    gen_cmd->add_option("--config", config_path, "JSON experiment config");
    gen_cmd->add_option("--out", out_dir, "output dataset directory")->required();
    gen_cmd->add_option("--seed", seed_override, "override gen.seed")
        ->each([&](const std::string&) { seed_given = true; });

    CLI::App* teach_cmd = app.add_subcommand("train-teacher", "Train the teacher on raw images");
    teach_cmd->add_option("--config", config_path, "JSON experiment config");
    teach_cmd->add_option("--data", data_dir, "dataset directory")->required();
    teach_cmd->add_option("--out", out_dir, "output run directory")->required();
    teach_cmd->add_option("--seed", seed_override, "override train.master_seed")
        ->each([&](const std::string&) { seed_given = true; });

    CLI::App* distill_cmd =
        app.add_subcommand("distill", "Train a student on degraded images with distillation");
    distill_cmd->add_option("--config", config_path, "JSON experiment config");
    distill_cmd->add_option("--data", data_dir, "dataset directory")->required();
    distill_cmd->add_option("--teacher", teacher_dir, "teacher checkpoint directory")->required();
    distill_cmd->add_option("--out", out_dir, "output run directory")->required();
    distill_cmd->add_option("--seed", seed_override, "override train.master_seed")
        ->each([&](const std::string&) { seed_given = true; });

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    eval_cmd->add_option("--model", model_dir, "checkpoint directory")->required();
    eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
    eval_cmd->add_option("--split", split, "train, val or test (default test)");
    eval_cmd->add_option("--quality", quality, "raw or deg (default deg)");

    CLI::App* ablate_cmd =
        app.add_subcommand("ablate", "Run the four-cell ablation (baseline/fr/mv/fr+mv)");
    ablate_cmd->add_option("--config", config_path, "JSON experiment config");
    ablate_cmd->add_option("--data", data_dir, "dataset directory")->required();
    ablate_cmd->add_option("--out", out_dir, "output run directory")->required();
    ablate_cmd->add_option("--seeds", seeds, "number of master seeds (default 1)");
    ablate_cmd->add_option("--seed", seed_override, "override train.master_seed")
        ->each([&](const std::string&) { seed_given = true; });

    CLI::App* swd_cmd = app.add_subcommand("swd", "Sliced distance between two ADT1 tensors");
    swd_cmd->add_option("--k", k, "number of projections")->required();
    swd_cmd->add_option("--g", g, "number of bins (0 = half the channels)");
    swd_cmd->add_option("--seed", seed, "projection seed")->required();
    swd_cmd->add_flag("--normalize", normalize,
                      "treat inputs as feature tensors and normalize to densities");
    swd_cmd->add_option("--per-projection", per_projection_csv,
                        "write per-projection attention vectors as CSV");
    swd_cmd->add_option("files", positionals, "a.adt1 b.adt1")->expected(2);

    CLI::App* spec_cmd =
        app.add_subcommand("spectrum-diff", "Normalized spectrum difference of two tensors");
    spec_cmd->add_option("--pgm", pgm_path, "write the map as an ASCII PGM image");
    spec_cmd->add_option("--csv", csv_path, "write the map as u,v,value CSV");
    spec_cmd->add_option("files", positionals, "raw.adt1 degraded.adt1")->expected(2);

    CLI::App* freq_cmd = app.add_subcommand("freq-loss", "Frequency attention loss of two tensors");
    freq_cmd->add_option("--gamma-fr", gamma_fr, "exponential weight gain (default 1)");
    freq_cmd->add_option("--reduction", reduction, "sum or mean (default sum)");
    freq_cmd->add_flag("--attached", attached, "differentiate through the weights");
    freq_cmd->add_option("--weights-csv", weights_csv, "dump the weight map as CSV");
    freq_cmd->add_option("files", positionals, "a_s.adt1 a_t.adt1")->expected(2);

    CLI::App* mv_cmd = app.add_subcommand("mv-loss", "Multi-view attention loss of two tensors");
    mv_cmd->add_option("--k", k, "number of projections")->required();
    mv_cmd->add_option("--g", g, "number of bins (0 = half the channels)");
    mv_cmd->add_option("--seed", seed, "projection seed");
    mv_cmd->add_option("--gamma-mv", gamma_mv, "weight of the same-sample term (default 100)");
    mv_cmd->add_option("--eta-mv", eta_mv, "weight of the contrastive term (default 50)");
    mv_cmd->add_option("--margin", margin, "contrastive margin (default 0.012)");
    mv_cmd->add_option("--pos", pos_path, "positive teacher tensor");
    mv_cmd->add_option("--neg", neg_path, "negative teacher tensor");
    mv_cmd->add_option("files", positionals, "a_s.adt1 a_t.adt1")->expected(2);

    CLI::App* grad_cmd =
        app.add_subcommand("gradcheck", "Finite-difference checks of every loss gradient");
    grad_cmd->add_option("--suite", suite, "run a single named suite");

    std::vector<const char*> argv;
    argv.push_back("kdcli");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        CliConfig cfg =
            config_path.empty() ? CliConfig{} : CliConfig::from_file(config_path);
        if (gen_cmd->parsed()) {
            if (seed_given) cfg.gen.seed = seed_override;
            return run_gen_data(cfg, out_dir);
        }
        if (seed_given) cfg.train.master_seed = seed_override;
        if (teach_cmd->parsed()) return run_train_teacher(cfg, data_dir, out_dir);
        if (distill_cmd->parsed()) return run_distill(cfg, data_dir, teacher_dir, out_dir);
        if (eval_cmd->parsed()) return run_eval(model_dir, data_dir, split, quality);
        if (ablate_cmd->parsed()) return run_ablate(cfg, data_dir, out_dir, seeds);
        if (swd_cmd->parsed()) {
            return run_swd(positionals[0], positionals[1], k, g, seed, normalize,
                           per_projection_csv);
        }
        if (spec_cmd->parsed()) {
            return run_spectrum_diff(positionals[0], positionals[1], pgm_path, csv_path);
        }
        if (freq_cmd->parsed()) {
            return run_freq_loss(positionals[0], positionals[1], gamma_fr, reduction, attached,
                                 weights_csv);
        }
        if (mv_cmd->parsed()) {
            MultiViewConfig<double> mv_cfg;
            mv_cfg.k = k;
            mv_cfg.g = g;
            mv_cfg.seed = seed;
            mv_cfg.gamma_mv = gamma_mv;
            mv_cfg.eta_mv = eta_mv;
            mv_cfg.margin = margin;
            return run_mv_loss(positionals[0], positionals[1], pos_path, neg_path, mv_cfg);
        }
        if (grad_cmd->parsed()) return run_gradcheck(suite);
        std::fprintf(stderr, "kdcli: no subcommand given\n");
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "kdcli: config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "kdcli: data error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "kdcli: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "kdcli: %s\n", e.what());
        return 1;
    }
}

} // namespace kd

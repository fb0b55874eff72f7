#include "kd/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "kd/errors.hpp"

namespace kd {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* section) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (known.find(key) == known.end()) {
            throw ConfigError(std::string("unknown config key '") + key + "' in " + section);
        }
    }
}

template <typename T>
void opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("bad value for config key '") + key + "': " + e.what());
        }
    }
}

} // namespace

CliConfig CliConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config JSON: ") + e.what());
    }
    reject_unknown(j, {"gen", "train", "freq", "mv"}, "the top level");

    CliConfig cfg;
    if (j.contains("gen")) {
        const json& g = j.at("gen");
        reject_unknown(g,
                       {"image_size", "num_train", "num_val", "num_test", "artifact_amplitude",
                        "artifact_period", "quality", "seed"},
                       "gen");
        opt(g, "image_size", cfg.gen.image_size);
        opt(g, "num_train", cfg.gen.num_train);
        opt(g, "num_val", cfg.gen.num_val);
        opt(g, "num_test", cfg.gen.num_test);
        opt(g, "artifact_amplitude", cfg.gen.artifact_amplitude);
        opt(g, "artifact_period", cfg.gen.artifact_period);
        if (g.contains("quality")) {
            cfg.gen.quality = quality_from_string(g.at("quality").get<std::string>());
        }
        opt(g, "seed", cfg.gen.seed);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown(t,
                       {"alpha", "beta", "lr", "adam_beta1", "adam_beta2", "adam_eps",
                        "batch_size", "max_epochs", "patience", "validations_per_epoch",
                        "master_seed"},
                       "train");
        opt(t, "alpha", cfg.train.alpha);
        opt(t, "beta", cfg.train.beta);
        opt(t, "lr", cfg.train.adam.lr);
        opt(t, "adam_beta1", cfg.train.adam.beta1);
        opt(t, "adam_beta2", cfg.train.adam.beta2);
        opt(t, "adam_eps", cfg.train.adam.eps);
        opt(t, "batch_size", cfg.train.batch_size);
        opt(t, "max_epochs", cfg.train.max_epochs);
        opt(t, "patience", cfg.train.patience);
        opt(t, "validations_per_epoch", cfg.train.validations_per_epoch);
        opt(t, "master_seed", cfg.train.master_seed);
    }
    if (j.contains("freq")) {
        const json& f = j.at("freq");
        reject_unknown(f, {"gamma_fr", "weight_detached", "reduction"}, "freq");
        opt(f, "gamma_fr", cfg.train.freq.gamma_fr);
        opt(f, "weight_detached", cfg.train.freq.weight_detached);
        if (f.contains("reduction")) {
            const std::string r = f.at("reduction").get<std::string>();
            if (r == "sum") {
                cfg.train.freq.reduction = Reduction::sum;
            } else if (r == "mean") {
                cfg.train.freq.reduction = Reduction::mean;
            } else {
                throw ConfigError("freq.reduction must be 'sum' or 'mean', got '" + r + "'");
            }
        }
    }
    if (j.contains("mv")) {
        const json& m = j.at("mv");
        reject_unknown(m, {"k", "g", "gamma_mv", "eta_mv", "margin", "seed"}, "mv");
        if (m.contains("k")) {
            cfg.mv_k_present = true;
            opt(m, "k", cfg.train.mv.k);
            if (cfg.train.mv.k < 1) throw ConfigError("mv.k must be >= 1");
        }
        opt(m, "g", cfg.train.mv.g);
        opt(m, "gamma_mv", cfg.train.mv.gamma_mv);
        opt(m, "eta_mv", cfg.train.mv.eta_mv);
        opt(m, "margin", cfg.train.mv.margin);
        opt(m, "seed", cfg.train.mv.seed);
    }
    if (cfg.train.mv.margin < 0) throw ConfigError("mv.margin must be >= 0");
    if (cfg.train.alpha < 0 || cfg.train.beta < 0) {
        throw ConfigError("train.alpha and train.beta must be >= 0");
    }
    if (cfg.train.patience < 1) throw ConfigError("train.patience must be >= 1");
    if (cfg.train.freq.gamma_fr <= 0) throw ConfigError("freq.gamma_fr must be > 0");
    return cfg;
}

CliConfig CliConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return from_json_text(text);
}

std::string CliConfig::to_json_text() const {
    json j;
    j["gen"] = {{"image_size", gen.image_size},
                {"num_train", gen.num_train},
                {"num_val", gen.num_val},
                {"num_test", gen.num_test},
                {"artifact_amplitude", gen.artifact_amplitude},
                {"artifact_period", gen.artifact_period},
                {"quality", to_string(gen.quality)},
                {"seed", gen.seed}};
    j["train"] = {{"alpha", train.alpha},
                  {"beta", train.beta},
                  {"lr", train.adam.lr},
                  {"adam_beta1", train.adam.beta1},
                  {"adam_beta2", train.adam.beta2},
                  {"adam_eps", train.adam.eps},
                  {"batch_size", train.batch_size},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"validations_per_epoch", train.validations_per_epoch},
                  {"master_seed", train.master_seed}};
    j["freq"] = {{"gamma_fr", train.freq.gamma_fr},
                 {"weight_detached", train.freq.weight_detached},
                 {"reduction", train.freq.reduction == Reduction::mean ? "mean" : "sum"}};
    j["mv"] = {{"k", train.mv.k},       {"g", train.mv.g},       {"gamma_mv", train.mv.gamma_mv},
               {"eta_mv", train.mv.eta_mv}, {"margin", train.mv.margin}, {"seed", train.mv.seed}};
    return j.dump(2) + "\n";
}

void CliConfig::write(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write config to " + path);
    os << to_json_text();
}

void CliConfig::require_mv_k() const {
    if (!mv_k_present) {
        throw ConfigError("mv.k (number of projections) must be set explicitly for experiments");
    }
}

} // namespace kd

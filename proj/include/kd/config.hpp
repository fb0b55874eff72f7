#pragma once

#include <string>

#include "kd/synth_data.hpp"
#include "kd/train.hpp"

namespace kd {

// Experiment configuration: the JSON mirror of GenConfig, DistillConfig,
// MultiViewConfig and FreqAttentionConfig. Unknown keys are rejected so typos
// cannot silently fall back to defaults. The number of projections mv.k has no
// file default: experiments must state it.
struct CliConfig {
    GenConfig gen;
    DistillConfig<float> train;
    bool mv_k_present = false;

    // parse from a JSON document/file; missing keys keep their defaults
    static CliConfig from_json_text(const std::string& text);
    static CliConfig from_file(const std::string& path);

    // fully-resolved round trip, written next to every run's outputs
    std::string to_json_text() const;
    void write(const std::string& path) const;

    // throws ConfigError unless mv.k was explicitly given
    void require_mv_k() const;
};

} // namespace kd

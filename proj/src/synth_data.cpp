#include "kd/synth_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "kd/errors.hpp"
#include "kd/tensor_io.hpp"

namespace kd {

namespace fs = std::filesystem;
using nlohmann::json;

double quality_scale(Quality q) { return q == Quality::mild ? 1.0 : 8.0; }

Quality quality_from_string(const std::string& s) {
    if (s == "mild") return Quality::mild;
    if (s == "heavy") return Quality::heavy;
    throw ConfigError("unknown quality '" + s + "' (expected mild or heavy)");
}

std::string to_string(Quality q) { return q == Quality::mild ? "mild" : "heavy"; }

std::string to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
    }
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw ConfigError("unknown split '" + s + "'");
}

namespace {

void check_gen_config(const GenConfig& cfg) {
    if (cfg.image_size == 0 || cfg.image_size % 8 != 0) {
        throw ConfigError("image_size must be a positive multiple of 8");
    }
    if (cfg.artifact_period < 2) throw ConfigError("artifact_period must be >= 2");
}

// circular separable Gaussian blur, all in double
std::vector<double> gaussian_kernel(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

void blur_circular(std::vector<double>& img, std::size_t s, const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    std::vector<double> tmp(img.size());
    for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t y = 0; y < s; ++y) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                const std::size_t xx = (x + s + static_cast<std::size_t>(d + radius) - radius) % s;
                acc += kernel[d + radius] * img[xx * s + y];
            }
            tmp[x * s + y] = acc;
        }
    }
    for (std::size_t x = 0; x < s; ++x) {
        for (std::size_t y = 0; y < s; ++y) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                const std::size_t yy = (y + s + static_cast<std::size_t>(d + radius) - radius) % s;
                acc += kernel[d + radius] * tmp[x * s + yy];
            }
            img[x * s + y] = acc;
        }
    }
}

} // namespace

Tensor<float> generate_real(const GenConfig& cfg, Rng& rng) {
    check_gen_config(cfg);
    const std::size_t s = cfg.image_size;
    std::vector<double> img(s * s);
    for (double& v : img) v = rng.gaussian();
    blur_circular(img, s, gaussian_kernel(static_cast<double>(s) / 8.0));
    double lo = img[0];
    double hi = img[0];
    for (const double v : img) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor<float> out(1, s, s);
    if (hi == lo) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5f;
        return out;
    }
    const double inv = 1.0 / (hi - lo);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<float>((img[i] - lo) * inv);
    }
    return out;
}

Tensor<float> generate_fake(const GenConfig& cfg, Rng& rng) {
    Tensor<float> img = generate_real(cfg, rng);
    const std::size_t s = cfg.image_size;
    const std::size_t side = std::max<std::size_t>(1, s / 4);
    const std::size_t x0 = static_cast<std::size_t>(rng.below(s - side + 1));
    const std::size_t y0 = static_cast<std::size_t>(rng.below(s - side + 1));
    const std::size_t cell = std::max<std::size_t>(1, cfg.artifact_period / 2);
    for (std::size_t x = x0; x < x0 + side; ++x) {
        for (std::size_t y = y0; y < y0 + side; ++y) {
            const bool positive = ((x - x0) / cell + (y - y0) / cell) % 2 == 0;
            const double delta = positive ? cfg.artifact_amplitude : -cfg.artifact_amplitude;
            const double v = static_cast<double>(img.at(0, x, y)) + delta;
            img.at(0, x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return img;
}

namespace {

// ISO/IEC 10918-1 Annex K luminance quantization table
constexpr double kLuminanceTable[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  //
    12, 12, 14, 19, 26,  58,  60,  55,  //
    14, 13, 16, 24, 40,  57,  69,  56,  //
    14, 17, 22, 29, 51,  87,  80,  62,  //
    18, 22, 37, 56, 68,  109, 103, 77,  //
    24, 35, 55, 64, 81,  104, 113, 92,  //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99};

struct DctBasis {
    double m[8][8];
    DctBasis() {
        const double pi = 3.14159265358979323846;
        for (int i = 0; i < 8; ++i) {
            const double scale = i == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int j = 0; j < 8; ++j) {
                m[i][j] = scale * std::cos((2 * j + 1) * i * pi / 16.0);
            }
        }
    }
};

const DctBasis& dct_basis() {
    static const DctBasis basis;
    return basis;
}

} // namespace

Tensor<float> degrade(const Tensor<float>& image, double quant_scale) {
    if (image.width() % 8 != 0 || image.height() % 8 != 0) {
        throw DimensionError("degrade: image side must be divisible by 8, got " +
                             image.shape_string());
    }
    if (!(quant_scale > 0.0)) throw ConfigError("degrade: quant_scale must be > 0");
    const DctBasis& basis = dct_basis();
    Tensor<float> out(image.channels(), image.width(), image.height());
    double block[8][8];
    double coef[8][8];
    double tmp[8][8];
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t bx = 0; bx < image.width(); bx += 8) {
            for (std::size_t by = 0; by < image.height(); by += 8) {
                for (int i = 0; i < 8; ++i) {
                    for (int j = 0; j < 8; ++j) {
                        block[i][j] = static_cast<double>(image.at(c, bx + i, by + j)) * 255.0 -
                                      128.0;
                    }
                }
                // coef = D * block * D^T
                for (int i = 0; i < 8; ++i) {
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < 8; ++k) acc += basis.m[i][k] * block[k][j];
                        tmp[i][j] = acc;
                    }
                }
                for (int i = 0; i < 8; ++i) {
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < 8; ++k) acc += tmp[i][k] * basis.m[j][k];
                        const double q = kLuminanceTable[i * 8 + j] * quant_scale;
                        coef[i][j] = std::round(acc / q) * q;
                    }
                }
                // block = D^T * coef * D
                for (int i = 0; i < 8; ++i) {
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < 8; ++k) acc += basis.m[k][i] * coef[k][j];
                        tmp[i][j] = acc;
                    }
                }
                for (int i = 0; i < 8; ++i) {
                    for (int j = 0; j < 8; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < 8; ++k) acc += tmp[i][k] * basis.m[k][j];
                        const double v = (acc + 128.0) / 255.0;
                        out.at(c, bx + i, by + j) = static_cast<float>(std::clamp(v, 0.0, 1.0));
                    }
                }
            }
        }
    }
    return out;
}

Tensor<float> degrade(const Tensor<float>& image, Quality q) {
    return degrade(image, quality_scale(q));
}

namespace {

struct SplitPlan {
    Split split;
    std::size_t per_class;
};

Tensor<float> make_sample(const GenConfig& cfg, std::uint64_t id, int label) {
    Rng rng(mix_seed(cfg.seed, id));
    return label == 0 ? generate_real(cfg, rng) : generate_fake(cfg, rng);
}

template <typename Emit>
DatasetManifest enumerate_samples(const GenConfig& cfg, Emit&& emit) {
    check_gen_config(cfg);
    DatasetManifest manifest;
    manifest.config = cfg;
    const SplitPlan plans[3] = {{Split::train, cfg.num_train},
                                {Split::val, cfg.num_val},
                                {Split::test, cfg.num_test}};
    std::uint64_t id = 0;
    for (const SplitPlan& plan : plans) {
        for (int label = 0; label < 2; ++label) {
            for (std::size_t i = 0; i < plan.per_class; ++i, ++id) {
                manifest.samples.push_back({id, label, plan.split});
                emit(id, label, plan.split);
            }
        }
    }
    return manifest;
}

std::string sample_file_name(std::uint64_t id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06llu.adt1", static_cast<unsigned long long>(id));
    return buf;
}

json gen_config_to_json(const GenConfig& cfg) {
    return json{{"image_size", cfg.image_size},
                {"num_train", cfg.num_train},
                {"num_val", cfg.num_val},
                {"num_test", cfg.num_test},
                {"artifact_amplitude", cfg.artifact_amplitude},
                {"artifact_period", cfg.artifact_period},
                {"quality", to_string(cfg.quality)},
                {"seed", cfg.seed}};
}

GenConfig gen_config_from_json(const json& j) {
    GenConfig cfg;
    cfg.image_size = j.at("image_size").get<std::size_t>();
    cfg.num_train = j.at("num_train").get<std::size_t>();
    cfg.num_val = j.at("num_val").get<std::size_t>();
    cfg.num_test = j.at("num_test").get<std::size_t>();
    cfg.artifact_amplitude = j.at("artifact_amplitude").get<double>();
    cfg.artifact_period = j.at("artifact_period").get<std::size_t>();
    cfg.quality = quality_from_string(j.at("quality").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

} // namespace

DatasetManifest build_dataset(const GenConfig& cfg, const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "raw", ec);
    fs::create_directories(fs::path(out_dir) / "deg", ec);
    if (ec) throw IoError("cannot create dataset directory " + out_dir + ": " + ec.message());

    const double scale = quality_scale(cfg.quality);
    DatasetManifest manifest = enumerate_samples(cfg, [&](std::uint64_t id, int label, Split) {
        const Tensor<float> raw = make_sample(cfg, id, label);
        const Tensor<float> deg = degrade(raw, scale);
        write_adt1(raw, (fs::path(out_dir) / "raw" / sample_file_name(id)).string());
        write_adt1(deg, (fs::path(out_dir) / "deg" / sample_file_name(id)).string());
    });

    json j;
    j["schema_version"] = manifest.schema_version;
    j["config"] = gen_config_to_json(cfg);
    json samples = json::array();
    for (const SampleRecord& rec : manifest.samples) {
        samples.push_back(
            {{"id", rec.id}, {"label", rec.label}, {"split", to_string(rec.split)}});
    }
    j["samples"] = std::move(samples);
    std::ofstream os(fs::path(out_dir) / "manifest.json");
    if (!os) throw IoError("cannot write manifest in " + out_dir);
    os << j.dump(2) << "\n";
    return manifest;
}

DatasetManifest read_manifest(const std::string& dir) {
    std::ifstream is(fs::path(dir) / "manifest.json");
    if (!is) throw IoError("cannot open manifest.json in " + dir);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed manifest.json in " + dir + ": " + e.what());
    }
    DatasetManifest manifest;
    try {
        manifest.schema_version = j.at("schema_version").get<int>();
        manifest.config = gen_config_from_json(j.at("config"));
        for (const json& rec : j.at("samples")) {
            manifest.samples.push_back({rec.at("id").get<std::uint64_t>(),
                                        rec.at("label").get<int>(),
                                        split_from_string(rec.at("split").get<std::string>())});
        }
    } catch (const json::exception& e) {
        throw DataError("manifest.json in " + dir + " is missing fields: " + e.what());
    }
    return manifest;
}

Dataset load_dataset(const std::string& dir) {
    const DatasetManifest manifest = read_manifest(dir);
    Dataset data;
    for (const SampleRecord& rec : manifest.samples) {
        Sample s;
        s.raw = read_adt1((fs::path(dir) / "raw" / sample_file_name(rec.id)).string());
        s.degraded = read_adt1((fs::path(dir) / "deg" / sample_file_name(rec.id)).string());
        s.label = rec.label;
        std::vector<Sample>* bucket = rec.split == Split::train ? &data.train
                                      : rec.split == Split::val ? &data.val
                                                                : &data.test;
        bucket->push_back(std::move(s));
    }
    return data;
}

Dataset generate_dataset(const GenConfig& cfg) {
    Dataset data;
    const double scale = quality_scale(cfg.quality);
    enumerate_samples(cfg, [&](std::uint64_t id, int label, Split split) {
        Sample s;
        s.raw = make_sample(cfg, id, label);
        s.degraded = degrade(s.raw, scale);
        s.label = label;
        std::vector<Sample>* bucket = split == Split::train ? &data.train
                                      : split == Split::val ? &data.val
                                                            : &data.test;
        bucket->push_back(std::move(s));
    });
    return data;
}

} // namespace kd

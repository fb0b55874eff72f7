#include "kd/multiview.hpp"

#include <algorithm>
#include <cmath>

#include "kd/errors.hpp"
#include "kd/rng.hpp"

namespace kd {

BinPlan make_bin_plan(std::size_t channels, std::size_t width, std::size_t height,
                      const std::array<double, 3>& theta, std::size_t g) {
    const std::size_t n = channels * width * height;
    if (g < 1) throw ConfigError("bin plan: g must be >= 1");
    if (g > n) {
        throw ConfigError("bin plan: g = " + std::to_string(g) + " exceeds element count " +
                          std::to_string(n));
    }
    std::vector<double> position(n);
    std::size_t i = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t x = 0; x < width; ++x) {
            for (std::size_t y = 0; y < height; ++y, ++i) {
                position[i] = theta[0] * static_cast<double>(c) +
                              theta[1] * static_cast<double>(x) +
                              theta[2] * static_cast<double>(y);
            }
        }
    }
    BinPlan plan;
    plan.order.resize(n);
    for (std::size_t j = 0; j < n; ++j) plan.order[j] = static_cast<std::uint32_t>(j);
    std::sort(plan.order.begin(), plan.order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (position[a] != position[b]) return position[a] < position[b];
        return a < b;
    });
    plan.offsets.resize(g + 1);
    const std::size_t base = n / g;
    const std::size_t extra = n % g;
    plan.offsets[0] = 0;
    for (std::size_t j = 0; j < g; ++j) {
        plan.offsets[j + 1] =
            plan.offsets[j] + static_cast<std::uint32_t>(base + (j < extra ? 1 : 0));
    }
    return plan;
}

MvPlan make_mv_plan(std::size_t channels, std::size_t width, std::size_t height, std::size_t k,
                    std::size_t g, std::uint64_t seed) {
    MvPlan plan;
    plan.proj = sample_projections(k, seed);
    plan.channels = channels;
    plan.width = width;
    plan.height = height;
    plan.groups = g;
    plan.plans.reserve(k);
    for (const auto& theta : plan.proj.directions) {
        plan.plans.push_back(make_bin_plan(channels, width, height, theta, g));
    }
    return plan;
}

ProjectionSet sample_projections(std::size_t k, std::uint64_t seed) {
    if (k < 1) throw ConfigError("sample_projections: k must be >= 1");
    ProjectionSet ps;
    ps.k = k;
    ps.seed = seed;
    ps.directions.reserve(k);
    Rng rng(seed);
    while (ps.directions.size() < k) {
        const double x = rng.gaussian();
        const double y = rng.gaussian();
        const double z = rng.gaussian();
        const double norm_sq = x * x + y * y + z * z;
        if (norm_sq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(norm_sq);
        ps.directions.push_back({x * inv, y * inv, z * inv});
    }
    return ps;
}

template <typename T>
DensityTensor<T> normalize_density(const Tensor<T>& a) {
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum_sq += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    }
    if (sum_sq == 0.0) {
        throw DegenerateInputError("normalize_density: all-zero tensor has no density");
    }
    DensityTensor<T> p;
    p.masses = Tensor<T>(a.channels(), a.width(), a.height());
    const double inv = 1.0 / sum_sq;
    for (std::size_t i = 0; i < a.size(); ++i) {
        p.masses[i] = static_cast<T>(static_cast<double>(a[i]) * static_cast<double>(a[i]) * inv);
    }
    return p;
}

template <typename T>
Var<T> normalize_density(Tape<T>& tape, Var<T> a) {
    if (a.tape != &tape) throw ContractError("normalize_density: var from another tape");
    const Tensor<T>& va = tape.value(a);
    T sum_sq = T(0);
    for (std::size_t i = 0; i < va.size(); ++i) sum_sq += va[i] * va[i];
    if (sum_sq == T(0)) {
        throw DegenerateInputError("normalize_density: all-zero tensor has no density");
    }
    Tensor<T> out(va.channels(), va.width(), va.height());
    const T inv = T(1) / sum_sq;
    for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] * va[i] * inv;
    return tape.record(std::move(out), {a.index},
                       [ai = a.index, inv](Tape<T>& tp, int self) {
                           // dP_k/dA_i = (2 A_i / s) (delta_ki - P_k)
                           const Tensor<T>& g = tp.grad_at(self);
                           const Tensor<T>& va2 = tp.value_at(ai);
                           const Tensor<T>& p = tp.value_at(self);
                           T dot = T(0);
                           for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * p[i];
                           Tensor<T>& ga = tp.grad_mut(ai);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               ga[i] += T(2) * va2[i] * inv * (g[i] - dot);
                           }
                       });
}

namespace {

template <typename T>
void bin_masses(const Tensor<T>& masses, const BinPlan& plan, T* out) {
    const std::size_t g = plan.offsets.size() - 1;
    for (std::size_t j = 0; j < g; ++j) {
        double acc = 0.0;
        for (std::uint32_t i = plan.offsets[j]; i < plan.offsets[j + 1]; ++i) {
            acc += static_cast<double>(masses[plan.order[i]]);
        }
        out[j] = static_cast<T>(acc);
    }
}

} // namespace

template <typename T>
AttentionVector<T> project_sort_bin(const DensityTensor<T>& p, const std::array<double, 3>& theta,
                                    std::size_t g) {
    const Tensor<T>& m = p.masses;
    const BinPlan plan = make_bin_plan(m.channels(), m.width(), m.height(), theta, g);
    AttentionVector<T> v;
    v.groups = g;
    v.bin_mass.resize(g);
    bin_masses(m, plan, v.bin_mass.data());
    return v;
}

template <typename T>
T swd_with_plan(const DensityTensor<T>& p_s, const DensityTensor<T>& p_t, const MvPlan& plan) {
    if (!p_s.masses.same_shape(p_t.masses)) {
        throw DimensionError("swd: shape mismatch " + p_s.masses.shape_string() + " vs " +
                             p_t.masses.shape_string());
    }
    const std::size_t g = plan.groups;
    std::vector<T> vs(g);
    std::vector<T> vt(g);
    double total = 0.0;
    for (const BinPlan& bp : plan.plans) {
        bin_masses(p_s.masses, bp, vs.data());
        bin_masses(p_t.masses, bp, vt.data());
        for (std::size_t j = 0; j < g; ++j) {
            const double d = static_cast<double>(vs[j]) - static_cast<double>(vt[j]);
            total += d * d;
        }
    }
    return static_cast<T>(total);
}

template <typename T>
T swd(const DensityTensor<T>& p_s, const DensityTensor<T>& p_t, const ProjectionSet& proj,
      std::size_t g) {
    if (!p_s.masses.same_shape(p_t.masses)) {
        throw DimensionError("swd: shape mismatch " + p_s.masses.shape_string() + " vs " +
                             p_t.masses.shape_string());
    }
    const Tensor<T>& m = p_s.masses;
    MvPlan plan;
    plan.proj = proj;
    plan.channels = m.channels();
    plan.width = m.width();
    plan.height = m.height();
    plan.groups = g;
    plan.plans.reserve(proj.directions.size());
    for (const auto& theta : proj.directions) {
        plan.plans.push_back(make_bin_plan(m.channels(), m.width(), m.height(), theta, g));
    }
    return swd_with_plan(p_s, p_t, plan);
}

template <typename T>
Var<T> swd(Tape<T>& tape, Var<T> p_s, const DensityTensor<T>& p_t,
           std::shared_ptr<const MvPlan> plan) {
    if (p_s.tape != &tape) throw ContractError("swd: var from another tape");
    const Tensor<T>& ms = tape.value(p_s);
    if (!ms.same_shape(p_t.masses)) {
        throw DimensionError("swd: shape mismatch " + ms.shape_string() + " vs " +
                             p_t.masses.shape_string());
    }
    const std::size_t g = plan->groups;
    const std::size_t k = plan->plans.size();
    // per-direction bin differences v_S - v_T, kept for the backward pass
    auto diffs = std::make_shared<std::vector<T>>(k * g);
    std::vector<T> vs(g);
    std::vector<T> vt(g);
    double total = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
        bin_masses(ms, plan->plans[d], vs.data());
        bin_masses(p_t.masses, plan->plans[d], vt.data());
        for (std::size_t j = 0; j < g; ++j) {
            const double diff = static_cast<double>(vs[j]) - static_cast<double>(vt[j]);
            (*diffs)[d * g + j] = static_cast<T>(diff);
            total += diff * diff;
        }
    }
    return tape.record(
        Tensor<T>::scalar(static_cast<T>(total)), {p_s.index},
        [pi = p_s.index, plan, diffs, g](Tape<T>& tp, int self) {
            const T gout = tp.grad_at(self)[0];
            Tensor<T>& gp = tp.grad_mut(pi);
            for (std::size_t d = 0; d < plan->plans.size(); ++d) {
                const BinPlan& bp = plan->plans[d];
                for (std::size_t j = 0; j < g; ++j) {
                    const T coeff = T(2) * (*diffs)[d * g + j] * gout;
                    if (coeff == T(0)) continue;
                    for (std::uint32_t i = bp.offsets[j]; i < bp.offsets[j + 1]; ++i) {
                        gp[bp.order[i]] += coeff;
                    }
                }
            }
        });
}

namespace {

template <typename T>
void check_mv_inputs(const Tensor<T>& a_s, const Tensor<T>& a_t, const Tensor<T>* a_t_pos,
                     const Tensor<T>* a_t_neg, const MultiViewConfig<T>& cfg) {
    if (!a_s.same_shape(a_t)) {
        throw DimensionError("mv_loss: shape mismatch " + a_s.shape_string() + " vs " +
                             a_t.shape_string());
    }
    if (cfg.eta_mv != T(0)) {
        if (a_t_pos == nullptr || a_t_neg == nullptr) {
            throw ConfigError("mv_loss: positive and negative teacher features are required "
                              "when eta_mv is nonzero");
        }
        if (!a_s.same_shape(*a_t_pos) || !a_s.same_shape(*a_t_neg)) {
            throw DimensionError("mv_loss: positive/negative shape mismatch");
        }
    }
}

} // namespace

template <typename T>
Var<T> mv_loss(Tape<T>& tape, Var<T> a_s, const Tensor<T>& a_t, const Tensor<T>* a_t_pos,
               const Tensor<T>* a_t_neg, const MultiViewConfig<T>& cfg,
               std::shared_ptr<const MvPlan> plan) {
    const Tensor<T>& vs = tape.value(a_s);
    check_mv_inputs(vs, a_t, a_t_pos, a_t_neg, cfg);
    if (!plan) {
        const std::size_t g = resolve_groups(cfg.g, vs.channels());
        plan = std::make_shared<const MvPlan>(
            make_mv_plan(vs.channels(), vs.width(), vs.height(), cfg.k, g, cfg.seed));
    }
    Var<T> p_s = normalize_density(tape, a_s);
    const DensityTensor<T> p_t = normalize_density(a_t);

    Var<T> loss = scale(swd(tape, p_s, p_t, plan), cfg.gamma_mv);
    if (cfg.eta_mv != T(0)) {
        const DensityTensor<T> p_pos = normalize_density(*a_t_pos);
        const DensityTensor<T> p_neg = normalize_density(*a_t_neg);
        Var<T> pos_term = swd(tape, p_s, p_pos, plan);
        Var<T> neg_term = swd(tape, p_s, p_neg, plan);
        Var<T> margin = tape.constant(Tensor<T>::scalar(cfg.margin));
        Var<T> hinge = relu(sub(margin, neg_term));
        loss = add(loss, scale(add(pos_term, hinge), cfg.eta_mv));
    }
    return loss;
}

template <typename T>
T mv_loss_value(const Tensor<T>& a_s, const Tensor<T>& a_t, const Tensor<T>* a_t_pos,
                const Tensor<T>* a_t_neg, const MultiViewConfig<T>& cfg) {
    Tape<T> tape;
    Var<T> v = tape.constant(a_s);
    Var<T> loss = mv_loss(tape, v, a_t, a_t_pos, a_t_neg, cfg);
    return tape.value(loss)[0];
}

template DensityTensor<float> normalize_density<float>(const Tensor<float>&);
template DensityTensor<double> normalize_density<double>(const Tensor<double>&);
template Var<float> normalize_density<float>(Tape<float>&, Var<float>);
template Var<double> normalize_density<double>(Tape<double>&, Var<double>);
template AttentionVector<float> project_sort_bin<float>(const DensityTensor<float>&,
                                                        const std::array<double, 3>&, std::size_t);
template AttentionVector<double> project_sort_bin<double>(const DensityTensor<double>&,
                                                          const std::array<double, 3>&,
                                                          std::size_t);
template float swd<float>(const DensityTensor<float>&, const DensityTensor<float>&,
                          const ProjectionSet&, std::size_t);
template double swd<double>(const DensityTensor<double>&, const DensityTensor<double>&,
                            const ProjectionSet&, std::size_t);
template float swd_with_plan<float>(const DensityTensor<float>&, const DensityTensor<float>&,
                                    const MvPlan&);
template double swd_with_plan<double>(const DensityTensor<double>&, const DensityTensor<double>&,
                                      const MvPlan&);
template Var<float> swd<float>(Tape<float>&, Var<float>, const DensityTensor<float>&,
                               std::shared_ptr<const MvPlan>);
template Var<double> swd<double>(Tape<double>&, Var<double>, const DensityTensor<double>&,
                                 std::shared_ptr<const MvPlan>);
template Var<float> mv_loss<float>(Tape<float>&, Var<float>, const Tensor<float>&,
                                   const Tensor<float>*, const Tensor<float>*,
                                   const MultiViewConfig<float>&, std::shared_ptr<const MvPlan>);
template Var<double> mv_loss<double>(Tape<double>&, Var<double>, const Tensor<double>&,
                                     const Tensor<double>*, const Tensor<double>*,
                                     const MultiViewConfig<double>&,
                                     std::shared_ptr<const MvPlan>);
template float mv_loss_value<float>(const Tensor<float>&, const Tensor<float>&,
                                    const Tensor<float>*, const Tensor<float>*,
                                    const MultiViewConfig<float>&);
template double mv_loss_value<double>(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>*, const Tensor<double>*,
                                      const MultiViewConfig<double>&);

} // namespace kd

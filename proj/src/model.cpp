#include "pdmp/model.hpp"
#include "pdmp/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace pdmp {

double ActionMeasure::total() const {
    double s = 0;
    for (double w : weights) s += w;
    return s;
}

void ActionMeasure::validate(std::size_t num_actions) const {
    if (weights.size() != num_actions)
        throw Error("action measure: expected " + std::to_string(num_actions) + " weights, got " +
                    std::to_string(weights.size()));
    for (std::size_t b = 0; b < weights.size(); ++b)
        if (!(weights[b] > 0) || !std::isfinite(weights[b]))
            throw Error("action measure: weight of action " + std::to_string(b) + " must be positive (full support)");
}

ActionMeasure ActionMeasure::uniform(std::size_t num_actions, double mass_per_action) {
    return ActionMeasure{std::vector<double>(num_actions, mass_per_action)};
}

std::size_t MarkedPointPath::jumps_before(double t) const {
    std::size_t n = 0;
    while (n < records.size() && records[n].time <= t) ++n;
    return n;
}

PiecewiseOpenLoopPolicy PiecewiseOpenLoopPolicy::constant(ActionIndex a) {
    PiecewiseOpenLoopPolicy p;
    p.rule = [a](std::size_t, double, const State&) { return a; };
    return p;
}

PiecewiseOpenLoopPolicy PiecewiseOpenLoopPolicy::from_feedback(std::function<ActionIndex(const State&)> fb,
                                                               double resample) {
    if (!(resample > 0)) throw Error("feedback policy: resample period must be positive");
    PiecewiseOpenLoopPolicy p;
    p.feedback = std::move(fb);
    p.resample = resample;
    return p;
}

IntensityControl IntensityControl::constant(double c) {
    IntensityControl nu;
    nu.label = "const" + std::to_string(c);
    nu.rate = [c](const IntensityContext&, ActionIndex) { return c; };
    nu.nu_min = c;
    nu.nu_max = c;
    return nu;
}

bool HypothesisReport::all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.pass; });
}

const HypothesisCheck& HypothesisReport::get(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw Error("hypothesis report: no check named " + name);
}

HypothesisReport validate_hypotheses(const LocalCharacteristics& chars, int probes, std::uint64_t seed) {
    if (probes < 1) throw Error("validate_hypotheses: probes must be >= 1");
    if (chars.actions.empty()) throw Error("validate_hypotheses: empty action set");
    Rng rng = path_rng(seed, 0, 17);
    const int d = chars.dim;
    auto draw_state = [&]() {
        State x(d);
        for (int k = 0; k < d; ++k) {
            const double u = uniform01(rng);
            x[k] = chars.domain.lower[k] + u * (chars.domain.upper[k] - chars.domain.lower[k]);
        }
        return x;
    };
    const std::size_t m = chars.num_actions();

    double f_min = std::numeric_limits<double>::infinity(), f_max = -f_min;
    double lam_min = f_min, lam_max = -f_min;
    double h_max = 0, lip_max = 0, norm_err = 0, neg_weight = 0;
    for (int p = 0; p < probes; ++p) {
        const State x = draw_state(), y = draw_state();
        const ActionIndex a = static_cast<ActionIndex>(rng() % m);
        const double f = chars.cost(x, a), lam = chars.rate(x, a);
        f_min = std::min(f_min, f);
        f_max = std::max(f_max, f);
        lam_min = std::min(lam_min, lam);
        lam_max = std::max(lam_max, lam);
        const State hx = chars.drift(x, a), hy = chars.drift(y, a);
        h_max = std::max({h_max, hx.norm(), hy.norm()});
        const double dist = (x - y).norm();
        if (dist > 1e-12) lip_max = std::max(lip_max, (hx - hy).norm() / dist);
        double wsum = 0;
        for (const auto& atom : chars.kernel.quadrature(x, a)) {
            wsum += atom.weight;
            neg_weight = std::min(neg_weight, atom.weight);
        }
        norm_err = std::max(norm_err, std::abs(wsum - 1.0));
    }
    if (norm_err > 1e-12 || neg_weight < 0)
        throw Error("validate_hypotheses: kernel quadrature weights are not a probability vector (|sum - 1| = " +
                    std::to_string(norm_err) + ")");

    const auto& b = chars.bounds;
    const double slack = 1e-12;
    HypothesisReport r;
    r.checks.push_back({"Hf_lower", f_min >= 0, f_min, 0});
    r.checks.push_back({"Hf_upper", f_max <= b.cost + slack, f_max, b.cost});
    r.checks.push_back({"HhlQ_rate", lam_min >= 0 && lam_max <= b.rate + slack, lam_max, b.rate});
    r.checks.push_back({"HhlQ_drift_bound", h_max <= b.drift + slack, h_max, b.drift});
    r.checks.push_back({"HhlQ_lipschitz", lip_max <= b.lipschitz + 1e-9, lip_max, b.lipschitz});
    r.checks.push_back({"kernel_normalization", true, norm_err, 1e-12});
    r.checks.push_back({"discount", chars.discount > 0, chars.discount, 0});
    return r;
}

namespace {

State scalar_state(double v) {
    State x(1);
    x[0] = v;
    return x;
}

Box interval(double lo, double hi) { return Box{scalar_state(lo), scalar_state(hi)}; }

TransitionKernelT<double> discrete_kernel(std::function<std::vector<QuadratureAtom>(const State&, ActionIndex)> q) {
    TransitionKernelT<double> k;
    k.quadrature = q;
    k.sample = [q](const State& x, ActionIndex a, Rng& rng) {
        const auto atoms = q(x, a);
        std::vector<double> w(atoms.size());
        for (std::size_t j = 0; j < atoms.size(); ++j) w[j] = atoms[j].weight;
        return atoms[categorical(rng, w, 1.0)].point;
    };
    return k;
}

Benchmark make_b1() {
    Benchmark b;
    auto& c = b.chars;
    c.name = "B1_constant_cost";
    c.dim = 1;
    c.domain = interval(-3, 3);
    c.actions = {-1.0, 1.0};
    const std::vector<double> act = c.actions;
    c.drift = [act](const State& x, ActionIndex a) { return scalar_state(std::clamp(act[a] - x[0], -2.0, 2.0)); };
    c.rate = [](const State&, ActionIndex) { return 1.0; };
    const Box box = c.domain;
    c.kernel = discrete_kernel([box](const State& x, ActionIndex) {
        return std::vector<QuadratureAtom>{{box.clamp(scalar_state(x[0] - 0.5)), 0.5},
                                           {box.clamp(scalar_state(x[0] + 0.5)), 0.5}};
    });
    c.cost = [](const State&, ActionIndex) { return 1.0; };
    c.discount = 1.0;
    c.bounds = {2.0, 1.0, 1.0, 1.0};
    b.lambda0 = ActionMeasure::uniform(2);
    b.oracle = OracleKind::constant;
    for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0}) b.oracle_points.push_back(scalar_state(v));
    b.description = "f = 1, delta = 1: V = 1 for every control";
    return b;
}

} // namespace

JumpOnlyData jump_only_data() {
    JumpOnlyData d;
    d.support = {-1.0, 0.0, 1.0};
    Eigen::Matrix3d p0, p1;
    p0 << 0.2, 0.6, 0.2, 0.3, 0.4, 0.3, 0.2, 0.6, 0.2;
    p1 << 0.1, 0.8, 0.1, 0.1, 0.8, 0.1, 0.1, 0.8, 0.1;
    d.transition = {p0, p1};
    d.action_value = {0.0, 1.0};
    d.discount = 0.5;
    return d;
}

namespace {

Benchmark make_b2() {
    const JumpOnlyData data = jump_only_data();
    Benchmark b;
    auto& c = b.chars;
    c.name = "B2_jump_only";
    c.dim = 1;
    c.domain = interval(-1.5, 1.5);
    c.actions = data.action_value;
    c.drift = [](const State&, ActionIndex) { return scalar_state(0.0); };
    c.rate = [data](const State& x, ActionIndex a) { return data.rate(x[0], a); };
    c.kernel = discrete_kernel([data](const State& x, ActionIndex a) {
        // rows are indexed by the nearest support point
        std::size_t row = 0;
        for (std::size_t i = 1; i < data.support.size(); ++i)
            if (std::abs(x[0] - data.support[i]) < std::abs(x[0] - data.support[row])) row = i;
        std::vector<QuadratureAtom> atoms;
        for (std::size_t j = 0; j < data.support.size(); ++j)
            atoms.push_back({scalar_state(data.support[j]), data.transition[a](row, j)});
        return atoms;
    });
    c.cost = [data](const State& x, ActionIndex a) { return data.cost(x[0], a); };
    c.discount = data.discount;
    c.bounds = {0.0, 0.0, 1.5, 1.5 * 1.5 + 0.1};
    b.lambda0 = ActionMeasure::uniform(2);
    b.oracle = OracleKind::finite_mdp;
    for (double v : data.support) b.oracle_points.push_back(scalar_state(v));
    b.description = "zero drift on the support {-1,0,1}; finite MDP oracle";
    return b;
}

Benchmark make_b3() {
    Benchmark b;
    auto& c = b.chars;
    c.name = "B3_deterministic";
    c.dim = 1;
    c.domain = interval(-2, 2);
    c.actions = {-1.0, 0.0, 1.0};
    const std::vector<double> act = c.actions;
    c.drift = [act](const State& x, ActionIndex a) { return scalar_state(act[a] * (1.0 - x[0] * x[0] / 4.0)); };
    c.rate = [](const State&, ActionIndex) { return 0.0; };
    c.kernel = discrete_kernel([](const State& x, ActionIndex) { return std::vector<QuadratureAtom>{{x, 1.0}}; });
    c.cost = [](const State& x, ActionIndex) { return x[0] * x[0]; };
    c.discount = 1.0;
    c.bounds = {1.0, 1.0, 0.0, 4.0};
    b.lambda0 = ActionMeasure::uniform(3);
    b.oracle = OracleKind::deterministic;
    for (double v : {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5}) b.oracle_points.push_back(scalar_state(v));
    b.description = "no jumps; bang-bang drift towards 0";
    return b;
}

Benchmark make_b4() {
    Benchmark b;
    auto& c = b.chars;
    c.name = "B4_full_1d";
    c.dim = 1;
    c.domain = interval(-3, 3);
    c.actions = {-1.0, 0.0, 1.0};
    const std::vector<double> act = c.actions;
    c.drift = [act](const State& x, ActionIndex a) { return scalar_state(act[a] - std::tanh(x[0])); };
    c.rate = [act](const State& x, ActionIndex a) {
        return 0.5 + 0.25 * ((1.0 + act[a]) / 2.0) / (1.0 + x[0] * x[0]);
    };
    // 5-point Gauss-Legendre for the uniform law on [x-1, x+1]
    static const std::array<double, 5> node = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                                               0.9061798459386640};
    static const std::array<double, 5> weight = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                                 0.4786286704993665, 0.2369268850561891};
    const Box box = c.domain;
    c.kernel = discrete_kernel([box](const State& x, ActionIndex) {
        std::vector<QuadratureAtom> atoms;
        for (int j = 0; j < 5; ++j) atoms.push_back({box.clamp(scalar_state(x[0] + node[j])), weight[j] / 2.0});
        return atoms;
    });
    c.cost = [act](const State& x, ActionIndex a) { return std::min(x[0] * x[0], 4.0) + 0.2 * std::abs(act[a]); };
    c.discount = 1.0;
    c.bounds = {1.0 + std::tanh(3.0), 1.0, 0.75, 4.2};
    b.lambda0 = ActionMeasure::uniform(3);
    b.oracle = OracleKind::none;
    for (double v : {-2.0, -1.0, 0.0, 1.0, 2.0}) b.oracle_points.push_back(scalar_state(v));
    b.description = "drift, state jumps and action cost together; cross-solver ground truth only";
    return b;
}

} // namespace

std::vector<std::string> benchmark_names() {
    return {"B1_constant_cost", "B2_jump_only", "B3_deterministic", "B4_full_1d"};
}

std::string canonical_benchmark_name(const std::string& name) {
    for (const auto& n : benchmark_names())
        if (n == name || n.substr(0, 2) == name) return n;
    throw Error("unknown benchmark '" + name + "'");
}

Benchmark builtin_benchmark(const std::string& name) {
    const std::string n = canonical_benchmark_name(name);
    if (n == "B1_constant_cost") return make_b1();
    if (n == "B2_jump_only") return make_b2();
    if (n == "B3_deterministic") return make_b3();
    return make_b4();
}

} // namespace pdmp

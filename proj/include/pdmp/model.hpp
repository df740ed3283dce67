#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdmp {

inline constexpr int kMaxDim = 4;

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using State = StateT<double>;

using ActionIndex = std::size_t;
using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <typename Scalar>
struct BoxT {
    StateT<Scalar> lower;
    StateT<Scalar> upper;

    int dim() const { return static_cast<int>(lower.size()); }
    bool contains(const StateT<Scalar>& x) const {
        return ((x.array() > lower.array()) && (x.array() < upper.array())).all();
    }
    bool contains_closed(const StateT<Scalar>& x) const {
        return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
    }
    StateT<Scalar> clamp(const StateT<Scalar>& x) const {
        return x.cwiseMax(lower).cwiseMin(upper);
    }
};
using Box = BoxT<double>;

template <typename Scalar>
struct QuadratureAtomT {
    StateT<Scalar> point;
    Scalar weight;
};
using QuadratureAtom = QuadratureAtomT<double>;

/// Post-jump kernel Q(x,a,dy) as a sampler plus a finite quadrature.
template <typename Scalar>
struct TransitionKernelT {
    std::function<std::vector<QuadratureAtomT<Scalar>>(const StateT<Scalar>&, ActionIndex)> quadrature;
    std::function<StateT<Scalar>(const StateT<Scalar>&, ActionIndex, Rng&)> sample;
};

struct CharacteristicBounds {
    double drift = 0;      // M_h
    double lipschitz = 0;  // L_h
    double rate = 0;       // Lambda_max
    double cost = 0;       // M_f
};

template <typename Scalar>
struct LocalCharacteristicsT {
    using StateType = StateT<Scalar>;

    std::string name;
    int dim = 1;
    BoxT<Scalar> domain;
    std::vector<Scalar> actions;  // embedded coordinate of a_0..a_{m-1}
    std::function<StateType(const StateType&, ActionIndex)> drift;
    std::function<Scalar(const StateType&, ActionIndex)> rate;
    TransitionKernelT<Scalar> kernel;
    std::function<Scalar(const StateType&, ActionIndex)> cost;
    Scalar discount = 1;
    CharacteristicBounds bounds;

    std::size_t num_actions() const { return actions.size(); }
    Scalar value_bound() const { return Scalar(bounds.cost) / discount; }
};
using LocalCharacteristics = LocalCharacteristicsT<double>;

/// Intensity measure of the randomized action process.
struct ActionMeasure {
    std::vector<double> weights;

    double total() const;
    std::size_t size() const { return weights.size(); }
    void validate(std::size_t num_actions) const;

    static ActionMeasure uniform(std::size_t num_actions, double mass_per_action = 1.0);
};

enum class JumpKind : std::uint8_t { state = 0, action = 1 };

struct JumpRecord {
    double time;
    State state;
    ActionIndex action;
    JumpKind kind;
};

struct MarkedPointPath {
    State start;
    ActionIndex start_action = 0;
    std::vector<JumpRecord> records;
    double horizon = 0;

    std::size_t jumps_before(double t) const;
    State state_after(std::size_t n) const { return n == 0 ? start : records[n - 1].state; }
    ActionIndex action_after(std::size_t n) const { return n == 0 ? start_action : records[n - 1].action; }
    double time_of(std::size_t n) const { return n == 0 ? 0.0 : records[n - 1].time; }
};

/// alpha_n(elapsed, post-jump state). Either given directly, or as a state feedback
/// re-read every `resample` time units along the flow, which is the same thing
/// once the flow is deterministic between jumps.
struct PiecewiseOpenLoopPolicy {
    std::function<ActionIndex(std::size_t n, double elapsed, const State& post_jump)> rule;
    std::function<ActionIndex(const State&)> feedback;
    double resample = 0;

    bool is_feedback() const { return static_cast<bool>(feedback); }

    static PiecewiseOpenLoopPolicy constant(ActionIndex a);
    static PiecewiseOpenLoopPolicy from_feedback(std::function<ActionIndex(const State&)> fb, double resample);
};

struct IntensityContext {
    double t;
    const State& state;
    ActionIndex action;
    std::span<const JumpRecord> history;  // action jumps and state jumps strictly before t
};

/// nu_t(b); the history span selects the piece.
struct IntensityControl {
    std::string label;
    std::function<double(const IntensityContext&, ActionIndex)> rate;
    double nu_min = 1;
    double nu_max = 1;
    std::vector<double> breakpoints;  // absolute times where nu may jump between path jumps
    std::function<double(std::size_t piece)> piece_mass_bound;  // bound on sum_b nu_b lambda0_b per piece

    /// Bound on sum_b nu_b lambda0_b on the piece following `piece` jumps.
    double mass_bound(std::size_t piece, double lambda0_total) const {
        return piece_mass_bound ? piece_mass_bound(piece) : nu_max * lambda0_total;
    }

    double operator()(const IntensityContext& c, ActionIndex b) const { return rate(c, b); }

    static IntensityControl constant(double c);
};

struct HypothesisCheck {
    std::string name;
    bool pass = true;
    double measured = 0;
    double bound = 0;
};

struct HypothesisReport {
    std::vector<HypothesisCheck> checks;
    bool all_pass() const;
    const HypothesisCheck& get(const std::string& name) const;
};

HypothesisReport validate_hypotheses(const LocalCharacteristics& chars, int probes, std::uint64_t seed);

enum class OracleKind { none, constant, finite_mdp, deterministic };

struct Benchmark {
    LocalCharacteristics chars;
    ActionMeasure lambda0;
    OracleKind oracle = OracleKind::none;
    std::vector<State> oracle_points;
    std::string description;
};

Benchmark builtin_benchmark(const std::string& name);
std::string canonical_benchmark_name(const std::string& name);
std::vector<std::string> benchmark_names();

// B2 data exposed so that independent oracles can be written against it.
struct JumpOnlyData {
    std::vector<double> support;
    std::vector<Eigen::Matrix3d> transition;  // per action
    std::vector<double> action_value;
    double discount;
    double rate(double /*x*/, ActionIndex a) const { return 1.0 + 0.5 * action_value[a]; }
    double cost(double x, ActionIndex a) const { return x * x + 0.1 * action_value[a]; }
};
JumpOnlyData jump_only_data();

} // namespace pdmp

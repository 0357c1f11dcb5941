#pragma once

#include "pkgwave/chan_model.hpp"
#include "pkgwave/package.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace pkgwave {

// The three design knobs.
struct Knobs {
    double silicon_thickness = 0.0;  // m
    double spreader_thickness = 0.0; // m
    double carrier_frequency = 0.0;  // Hz

    bool operator==(const Knobs&) const = default;
};

struct RawMetrics {
    double path_loss_db = 0.0;  // L_avg
    double delay_spread = 0.0;  // worst tau_rms, s
};

struct NormalizedMetrics {
    double path_loss = 0.0;
    double delay_spread = 0.0;
    bool clamped = false;
};

// Affine min-max map onto [epsilon, 1], established from a reference set.
struct MetricNormalizer {
    double pl_min = 0.0, pl_max = 1.0; // dB
    double ds_min = 0.0, ds_max = 1.0; // s
    double epsilon = 0.01;

    void validate() const;
    static MetricNormalizer from_samples(const std::vector<RawMetrics>& samples, double epsilon = 0.01);
};

// 1 / (PL^w DS^(1-w)); both metrics in (0, 1], w in [0, 1].
double figure_of_merit(double pl_norm, double ds_norm, double w);
NormalizedMetrics normalize(double raw_pl_db, double raw_ds_s, const MetricNormalizer& norm);

struct DesignPoint {
    Knobs knobs;
    RawMetrics raw;
    NormalizedMetrics norm;
    double phi = 0.0;
    double w = 0.0;
};

DesignPoint make_design_point(const Knobs& k, const RawMetrics& raw, const MetricNormalizer& norm, double w);

// True when a should be preferred over b: higher phi, then lower raw PL, lower T_s, lower f_c.
bool better(const DesignPoint& a, const DesignPoint& b);

using Objective = std::function<RawMetrics(const Knobs&)>;
using DesignEvaluator = std::function<DesignPoint(const Knobs&)>;

// Memoizes an objective. Concurrent requests for one key run the objective once; every caller
// sees the same value.
class EvaluationCache {
public:
    explicit EvaluationCache(Objective objective);

    RawMetrics evaluate(const Knobs& k);
    std::size_t evaluations() const; // objective invocations so far
    std::size_t size() const;

private:
    using Key = std::tuple<long long, long long, long long>;
    static Key key_of(const Knobs& k);

    Objective objective_;
    mutable std::mutex mutex_;
    std::map<Key, std::shared_future<RawMetrics>> entries_;
    std::size_t evaluations_ = 0;
};

struct Granularity {
    double silicon = 10e-6;
    double spreader = 10e-6;
    double frequency = 1e9;

    Knobs snap(const Knobs& k, const DesignBounds& b) const;
};

struct AnnealSchedule {
    double initial_temperature = 1.0;
    double cooling = 0.95;
    std::size_t steps_per_temperature = 20;
    std::array<double, 3> step_sizes{0.1e-3, 0.1e-3, 10e9}; // T_s, T_h, f_c standard deviations at T0
    double step_decay = 0.5;  // proposal widths scale as (T / T0)^step_decay, 0 = fixed
    std::uint64_t seed = 1;
    std::size_t max_evaluations = 1000; // per chain
    std::size_t chains = 4;             // independent restarts, best over all
    Granularity granularity;
    std::optional<Knobs> start; // first chain only; uniform random inside the bounds otherwise

    void validate() const;
};

struct TraceEntry {
    std::size_t chain = 0;
    std::size_t step = 0;
    double temperature = 0.0;
    DesignPoint proposal;
    bool accepted = false;
    double current_phi = 0.0;
    double best_phi = 0.0;
};

struct AnnealResult {
    DesignPoint best;
    std::vector<TraceEntry> trace;
};

// Independent Metropolis chains with geometric cooling; the returned best is the argmax over every
// evaluated point and the trace lists chain 0 first. Chains may run on up to `jobs` threads, so
// the evaluator must be thread safe; results do not depend on jobs. Evaluator failures are
// rethrown as NumericError naming the offending knobs.
AnnealResult anneal(const DesignEvaluator& evaluate, const DesignBounds& bounds, const AnnealSchedule& schedule,
                    std::size_t jobs = 1);

struct SweepSteps {
    std::size_t silicon = 4;
    std::size_t spreader = 4;
    std::size_t frequency = 4;
};

struct SweepResult {
    std::vector<Knobs> cells;
    std::vector<RawMetrics> raw;              // one per evaluated cell
    std::vector<double> weights;
    std::vector<std::vector<DesignPoint>> points; // [w][cell]
    std::vector<std::size_t> argmax;          // per w, index into cells
    bool complete = true;
    std::size_t new_evaluations = 0;
};

// Grid coordinates of one dimension: n evenly spaced values from lo to hi (n == 1 requires lo == hi).
std::vector<double> sweep_axis(double lo, double hi, std::size_t n, const char* name);
std::vector<Knobs> sweep_cells(const DesignBounds& bounds, const SweepSteps& steps);

// Evaluates the Cartesian grid through the cache; stops after `budget` cells (0 = all) and then
// reports complete = false.
SweepResult grid_sweep(const DesignBounds& bounds, const SweepSteps& steps, const std::vector<double>& weights,
                       EvaluationCache& cache, const MetricNormalizer& norm, std::size_t jobs = 1,
                       std::size_t budget = 0);

// Non-dominated subset under (raw PL, raw DS) minimization, ordered by PL then DS.
std::vector<DesignPoint> pareto_front(const std::vector<DesignPoint>& points);

// Surrogate-backed objective: PL = mean per-pair loss, DS = worst tau_rms over the grid.
struct SurrogateProblem {
    PackageConfig base;
    std::size_t rows = 4;
    std::size_t cols = 4;
    double height_fraction = 0.5;
    double band_width = 10e9;
    std::size_t band_points = 201;
    SurrogateOptions options;

    RawMetrics evaluate(const Knobs& k) const;
};

void to_json(nlohmann::json& j, const Knobs& k);
void to_json(nlohmann::json& j, const MetricNormalizer& n);
void to_json(nlohmann::json& j, const DesignPoint& p);
void from_json(const nlohmann::json& j, AnnealSchedule& s);
void to_json(nlohmann::json& j, const AnnealSchedule& s);

} // namespace pkgwave

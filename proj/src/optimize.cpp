#include "pkgwave/optimize.hpp"

#include "pkgwave/error.hpp"
#include "pkgwave/json_util.hpp"
#include "pkgwave/metrics.hpp"
#include "pkgwave/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <random>
#include <sstream>

namespace pkgwave {

void MetricNormalizer::validate() const
{
    if (!(pl_max > pl_min) || !(ds_max > ds_min) || !std::isfinite(pl_max - pl_min) || !std::isfinite(ds_max - ds_min)) {
        throw NumericError("degenerate normalizer range");
    }
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw ConfigError("normalizer epsilon must lie in (0, 1)");
    }
}

MetricNormalizer MetricNormalizer::from_samples(const std::vector<RawMetrics>& samples, double epsilon)
{
    if (samples.empty()) {
        throw NumericError("normalizer needs at least one reference sample");
    }
    MetricNormalizer n;
    n.epsilon = epsilon;
    n.pl_min = n.pl_max = samples.front().path_loss_db;
    n.ds_min = n.ds_max = samples.front().delay_spread;
    for (const auto& s : samples) {
        n.pl_min = std::min(n.pl_min, s.path_loss_db);
        n.pl_max = std::max(n.pl_max, s.path_loss_db);
        n.ds_min = std::min(n.ds_min, s.delay_spread);
        n.ds_max = std::max(n.ds_max, s.delay_spread);
    }
    n.validate();
    return n;
}

double figure_of_merit(double pl_norm, double ds_norm, double w)
{
    if (!(w >= 0.0 && w <= 1.0)) {
        throw ConfigError("weight w must lie in [0, 1]");
    }
    if (!(pl_norm > 0.0 && pl_norm <= 1.0) || !(ds_norm > 0.0 && ds_norm <= 1.0)) {
        throw NumericError("figure of merit needs normalized metrics in (0, 1]");
    }
    return 1.0 / (std::pow(pl_norm, w) * std::pow(ds_norm, 1.0 - w));
}

NormalizedMetrics normalize(double raw_pl_db, double raw_ds_s, const MetricNormalizer& norm)
{
    norm.validate();
    NormalizedMetrics out;
    auto map = [&](double v, double lo, double hi) {
        if (v <= lo) {
            out.clamped = out.clamped || v < lo;
            return norm.epsilon;
        }
        if (v >= hi) {
            out.clamped = out.clamped || v > hi;
            return 1.0;
        }
        return norm.epsilon + (1.0 - norm.epsilon) * (v - lo) / (hi - lo);
    };
    if (!std::isfinite(raw_pl_db) || !std::isfinite(raw_ds_s)) {
        throw NumericError("raw metrics must be finite");
    }
    out.path_loss = map(raw_pl_db, norm.pl_min, norm.pl_max);
    out.delay_spread = map(raw_ds_s, norm.ds_min, norm.ds_max);
    return out;
}

DesignPoint make_design_point(const Knobs& k, const RawMetrics& raw, const MetricNormalizer& norm, double w)
{
    DesignPoint p;
    p.knobs = k;
    p.raw = raw;
    p.norm = normalize(raw.path_loss_db, raw.delay_spread, norm);
    p.w = w;
    p.phi = figure_of_merit(p.norm.path_loss, p.norm.delay_spread, w);
    return p;
}

bool better(const DesignPoint& a, const DesignPoint& b)
{
    if (a.phi != b.phi) {
        return a.phi > b.phi;
    }
    if (a.raw.path_loss_db != b.raw.path_loss_db) {
        return a.raw.path_loss_db < b.raw.path_loss_db;
    }
    if (a.knobs.silicon_thickness != b.knobs.silicon_thickness) {
        return a.knobs.silicon_thickness < b.knobs.silicon_thickness;
    }
    return a.knobs.carrier_frequency < b.knobs.carrier_frequency;
}

EvaluationCache::EvaluationCache(Objective objective) : objective_(std::move(objective))
{
    if (!objective_) {
        throw ConfigError("evaluation cache needs an objective");
    }
}

EvaluationCache::Key EvaluationCache::key_of(const Knobs& k)
{
    // nm / nm / Hz resolution
    return {std::llround(k.silicon_thickness * 1e9), std::llround(k.spreader_thickness * 1e9),
            std::llround(k.carrier_frequency)};
}

RawMetrics EvaluationCache::evaluate(const Knobs& k)
{
    const Key key = key_of(k);
    std::shared_future<RawMetrics> fut;
    std::promise<RawMetrics> promise;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            fut = promise.get_future().share();
            entries_.emplace(key, fut);
            ++evaluations_;
            owner = true;
        }
        else {
            fut = it->second;
        }
    }
    if (owner) {
        try {
            promise.set_value(objective_(k));
        }
        catch (...) {
            promise.set_exception(std::current_exception());
        }
    }
    return fut.get();
}

std::size_t EvaluationCache::evaluations() const
{
    std::lock_guard lock(mutex_);
    return evaluations_;
}

std::size_t EvaluationCache::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

Knobs Granularity::snap(const Knobs& k, const DesignBounds& b) const
{
    auto one = [](double v, double step, double lo, double hi) {
        if (step > 0.0) {
            v = std::round(v / step) * step;
        }
        return std::clamp(v, lo, hi);
    };
    return {one(k.silicon_thickness, silicon, b.silicon_min, b.silicon_max),
            one(k.spreader_thickness, spreader, b.spreader_min, b.spreader_max),
            one(k.carrier_frequency, frequency, b.frequency_min, b.frequency_max)};
}

void AnnealSchedule::validate() const
{
    if (!(initial_temperature > 0.0) || !std::isfinite(initial_temperature)) {
        throw ConfigError("anneal: initial_temperature must be > 0");
    }
    if (!(cooling > 0.0 && cooling < 1.0)) {
        throw ConfigError("anneal: cooling factor must lie in (0, 1)");
    }
    if (steps_per_temperature == 0 || max_evaluations == 0 || chains == 0) {
        throw ConfigError("anneal: steps_per_temperature, max_evaluations and chains must be > 0");
    }
    for (double s : step_sizes) {
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw ConfigError("anneal: step sizes must be > 0");
        }
    }
    if (!(step_decay >= 0.0) || !std::isfinite(step_decay)) {
        throw ConfigError("anneal: step_decay must be >= 0");
    }
    if (granularity.silicon < 0.0 || granularity.spreader < 0.0 || granularity.frequency < 0.0) {
        throw ConfigError("anneal: granularity must be >= 0");
    }
}

namespace {

std::string describe(const Knobs& k)
{
    std::ostringstream os;
    os.precision(10);
    os << "{T_s=" << k.silicon_thickness << " m, T_h=" << k.spreader_thickness << " m, f_c=" << k.carrier_frequency
       << " Hz}";
    return os.str();
}

DesignPoint guarded(const DesignEvaluator& evaluate, const Knobs& k)
{
    try {
        return evaluate(k);
    }
    catch (const Error& e) {
        throw Error(e.kind(), std::string(e.what()) + " at " + describe(k));
    }
    catch (const std::exception& e) {
        throw NumericError(std::string(e.what()) + " at " + describe(k));
    }
}

double reflect(double v, double lo, double hi)
{
    if (!(hi > lo)) {
        return lo;
    }
    for (int guard = 0; guard < 64 && (v < lo || v > hi); ++guard) {
        v = v > hi ? 2.0 * hi - v : 2.0 * lo - v;
    }
    return std::clamp(v, lo, hi);
}

} // namespace

namespace {

AnnealResult anneal_chain(const DesignEvaluator& evaluate, const DesignBounds& bounds, const AnnealSchedule& schedule,
                          std::size_t chain)
{
    std::seed_seq seq{static_cast<std::uint32_t>(schedule.seed), static_cast<std::uint32_t>(schedule.seed >> 32),
                      static_cast<std::uint32_t>(chain)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Knobs start;
    if (schedule.start && chain == 0) {
        start = *schedule.start;
    }
    else {
        start.silicon_thickness = bounds.silicon_min + unit(rng) * (bounds.silicon_max - bounds.silicon_min);
        start.spreader_thickness = bounds.spreader_min + unit(rng) * (bounds.spreader_max - bounds.spreader_min);
        start.carrier_frequency = bounds.frequency_min + unit(rng) * (bounds.frequency_max - bounds.frequency_min);
    }
    start = schedule.granularity.snap(start, bounds);

    AnnealResult result;
    DesignPoint current = guarded(evaluate, start);
    result.best = current;
    double temperature = schedule.initial_temperature;
    result.trace.push_back({chain, 0, temperature, current, true, current.phi, current.phi});

    std::size_t evaluations = 1;
    std::size_t step = 0;
    while (evaluations < schedule.max_evaluations) {
        const double scale = std::pow(temperature / schedule.initial_temperature, schedule.step_decay);
        for (std::size_t s = 0; s < schedule.steps_per_temperature && evaluations < schedule.max_evaluations; ++s) {
            Knobs k = current.knobs;
            k.silicon_thickness = reflect(k.silicon_thickness + scale * schedule.step_sizes[0] * gauss(rng),
                                          bounds.silicon_min, bounds.silicon_max);
            k.spreader_thickness = reflect(k.spreader_thickness + scale * schedule.step_sizes[1] * gauss(rng),
                                           bounds.spreader_min, bounds.spreader_max);
            k.carrier_frequency = reflect(k.carrier_frequency + scale * schedule.step_sizes[2] * gauss(rng),
                                          bounds.frequency_min, bounds.frequency_max);
            k = schedule.granularity.snap(k, bounds);
            const double u = unit(rng);

            DesignPoint proposal = guarded(evaluate, k);
            ++evaluations;
            ++step;
            const double delta = proposal.phi - current.phi;
            const bool accept = delta >= 0.0 || u < std::exp(delta / temperature);
            if (better(proposal, result.best)) {
                result.best = proposal;
            }
            if (accept) {
                current = proposal;
            }
            result.trace.push_back({chain, step, temperature, std::move(proposal), accept, current.phi, result.best.phi});
        }
        temperature *= schedule.cooling;
    }
    return result;
}

} // namespace

AnnealResult anneal(const DesignEvaluator& evaluate, const DesignBounds& bounds, const AnnealSchedule& schedule,
                    std::size_t jobs)
{
    bounds.validate();
    schedule.validate();
    std::vector<AnnealResult> chains(schedule.chains);
    parallel_for(chains.size(), jobs, [&](std::size_t c) { chains[c] = anneal_chain(evaluate, bounds, schedule, c); });
    AnnealResult out = std::move(chains.front());
    for (std::size_t c = 1; c < chains.size(); ++c) {
        if (better(chains[c].best, out.best)) {
            out.best = chains[c].best;
        }
        out.trace.insert(out.trace.end(), std::make_move_iterator(chains[c].trace.begin()),
                         std::make_move_iterator(chains[c].trace.end()));
    }
    return out;
}

std::vector<double> sweep_axis(double lo, double hi, std::size_t n, const char* name)
{
    if (n == 0) {
        throw ConfigError(std::string("sweep: ") + name + " needs at least one step");
    }
    if (n == 1) {
        if (lo != hi) {
            throw ConfigError(std::string("sweep: ") + name + " needs >= 2 steps unless its bounds coincide");
        }
        return {lo};
    }
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) {
        v[k] = k + 1 == n ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return v;
}

std::vector<Knobs> sweep_cells(const DesignBounds& bounds, const SweepSteps& steps)
{
    bounds.validate();
    const auto ts = sweep_axis(bounds.silicon_min, bounds.silicon_max, steps.silicon, "silicon_thickness");
    const auto th = sweep_axis(bounds.spreader_min, bounds.spreader_max, steps.spreader, "spreader_thickness");
    const auto fc = sweep_axis(bounds.frequency_min, bounds.frequency_max, steps.frequency, "carrier_frequency");
    std::vector<Knobs> cells;
    cells.reserve(ts.size() * th.size() * fc.size());
    for (double a : ts) {
        for (double b : th) {
            for (double c : fc) {
                cells.push_back({a, b, c});
            }
        }
    }
    return cells;
}

SweepResult grid_sweep(const DesignBounds& bounds, const SweepSteps& steps, const std::vector<double>& weights,
                       EvaluationCache& cache, const MetricNormalizer& norm, std::size_t jobs, std::size_t budget)
{
    if (weights.empty()) {
        throw ConfigError("sweep: at least one weight is required");
    }
    for (double w : weights) {
        if (!(w >= 0.0 && w <= 1.0)) {
            throw ConfigError("sweep: weight w must lie in [0, 1]");
        }
    }
    norm.validate();
    SweepResult r;
    r.cells = sweep_cells(bounds, steps);
    if (budget > 0 && budget < r.cells.size()) {
        r.cells.resize(budget);
        r.complete = false;
    }
    const std::size_t before = cache.evaluations();
    r.raw.resize(r.cells.size());
    parallel_for(r.cells.size(), jobs, [&](std::size_t k) { r.raw[k] = cache.evaluate(r.cells[k]); });
    r.new_evaluations = cache.evaluations() - before;
    r.weights = weights;
    for (double w : weights) {
        std::vector<DesignPoint> pts;
        pts.reserve(r.cells.size());
        std::size_t best = 0;
        for (std::size_t k = 0; k < r.cells.size(); ++k) {
            pts.push_back(make_design_point(r.cells[k], r.raw[k], norm, w));
            if (k > 0 && better(pts[k], pts[best])) {
                best = k;
            }
        }
        r.points.push_back(std::move(pts));
        r.argmax.push_back(best);
    }
    return r;
}

std::vector<DesignPoint> pareto_front(const std::vector<DesignPoint>& points)
{
    if (points.empty()) {
        throw ConfigError("pareto front needs at least one point");
    }
    std::vector<std::size_t> order(points.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        order[k] = k;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& pa = points[a].raw;
        const auto& pb = points[b].raw;
        if (pa.path_loss_db != pb.path_loss_db) {
            return pa.path_loss_db < pb.path_loss_db;
        }
        return pa.delay_spread < pb.delay_spread;
    });
    std::vector<DesignPoint> front;
    double best_ds = std::numeric_limits<double>::infinity(); // over strictly lower PL
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        const double pl = points[order[i]].raw.path_loss_db;
        while (j < order.size() && points[order[j]].raw.path_loss_db == pl) {
            ++j;
        }
        const double group_min = points[order[i]].raw.delay_spread;
        if (group_min < best_ds) {
            for (std::size_t k = i; k < j && points[order[k]].raw.delay_spread == group_min; ++k) {
                front.push_back(points[order[k]]);
            }
        }
        best_ds = std::min(best_ds, group_min);
        i = j;
    }
    return front;
}

RawMetrics SurrogateProblem::evaluate(const Knobs& k) const
{
    PackageConfig cfg = base;
    cfg.silicon_thickness = k.silicon_thickness;
    cfg.spreader_thickness = k.spreader_thickness;
    cfg.carrier_frequency = k.carrier_frequency;
    const AntennaGrid grid = AntennaGrid::homogeneous(cfg, rows, cols, height_fraction);
    const FrequencyBand band = FrequencyBand::around(k.carrier_frequency, band_width, band_points);
    const ChannelMatrix cm = synth_channel(cfg, grid, band, options);
    const auto rows_m = pair_metrics(cm);
    RawMetrics r;
    r.path_loss_db = mean_loss(rows_m);
    r.delay_spread = 0.0;
    for (const auto& row : rows_m) {
        r.delay_spread = std::max(r.delay_spread, row.tau_rms);
    }
    return r;
}

void to_json(nlohmann::json& j, const Knobs& k)
{
    j = nlohmann::json{{"silicon_thickness", k.silicon_thickness},
                       {"spreader_thickness", k.spreader_thickness},
                       {"carrier_frequency", k.carrier_frequency}};
}

void to_json(nlohmann::json& j, const MetricNormalizer& n)
{
    j = nlohmann::json{{"pl_min_db", n.pl_min}, {"pl_max_db", n.pl_max}, {"ds_min_s", n.ds_min},
                       {"ds_max_s", n.ds_max},  {"epsilon", n.epsilon}};
}

void to_json(nlohmann::json& j, const DesignPoint& p)
{
    j = nlohmann::json{{"knobs", p.knobs},
                       {"path_loss_db", p.raw.path_loss_db},
                       {"delay_spread_s", p.raw.delay_spread},
                       {"pl_norm", p.norm.path_loss},
                       {"ds_norm", p.norm.delay_spread},
                       {"clamped", p.norm.clamped},
                       {"phi", p.phi},
                       {"w", p.w}};
}

void to_json(nlohmann::json& j, const AnnealSchedule& s)
{
    j = nlohmann::json{{"initial_temperature", s.initial_temperature},
                       {"cooling", s.cooling},
                       {"steps_per_temperature", s.steps_per_temperature},
                       {"step_sizes", s.step_sizes},
                       {"step_decay", s.step_decay},
                       {"seed", s.seed},
                       {"max_evaluations", s.max_evaluations},
                       {"chains", s.chains},
                       {"granularity", {s.granularity.silicon, s.granularity.spreader, s.granularity.frequency}}};
}

void from_json(const nlohmann::json& j, AnnealSchedule& s)
{
    const std::string path = "/optimize/schedule";
    s.initial_temperature = jsonu::number_or(j, "initial_temperature", s.initial_temperature, path);
    s.cooling = jsonu::number_or(j, "cooling", s.cooling, path);
    s.steps_per_temperature = jsonu::count_or(j, "steps_per_temperature", s.steps_per_temperature, path);
    s.max_evaluations = jsonu::count_or(j, "max_evaluations", s.max_evaluations, path);
    s.chains = jsonu::count_or(j, "chains", s.chains, path);
    s.step_decay = jsonu::number_or(j, "step_decay", s.step_decay, path);
    auto triple = [&](const char* key, std::array<double, 3>& out) {
        if (!j.contains(key)) {
            return;
        }
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 3) {
            jsonu::fail(jsonu::join(path, key), "expected an array of 3 numbers");
        }
        for (std::size_t k = 0; k < 3; ++k) {
            if (!a[k].is_number()) {
                jsonu::fail(jsonu::join(path, key) + "/" + std::to_string(k), "expected a number");
            }
            out[k] = a[k].get<double>();
        }
    };
    triple("step_sizes", s.step_sizes);
    std::array<double, 3> g{s.granularity.silicon, s.granularity.spreader, s.granularity.frequency};
    triple("granularity", g);
    s.granularity = {g[0], g[1], g[2]};
    try {
        s.validate();
    }
    catch (const ConfigError& e) {
        jsonu::fail(path, e.what());
    }
}

} // namespace pkgwave

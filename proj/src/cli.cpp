#include "pkgwave/cli.hpp"

#include "pkgwave/archive.hpp"
#include "pkgwave/csv.hpp"
#include "pkgwave/digest.hpp"
#include "pkgwave/error.hpp"
#include "pkgwave/json_util.hpp"
#include "pkgwave/parallel.hpp"
#include "pkgwave/touchstone.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

namespace pkgwave {

using nlohmann::json;
namespace fs = std::filesystem;

FrequencyBand BandSpec::resolve(double carrier) const
{
    FrequencyBand b;
    if (start || stop) {
        if (!start || !stop) {
            throw ConfigError("band: start and stop must be given together");
        }
        b.start = *start;
        b.stop = *stop;
        b.points = points;
    }
    else {
        b = FrequencyBand::around(carrier, width, points);
    }
    b.validate(allow_out_of_range);
    return b;
}

namespace {

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed)
{
    jsonu::object(j, path);
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            jsonu::fail(jsonu::join(path, key), "unknown key");
        }
    }
}

std::vector<double> number_list(const json& j, const std::string& key, const std::string& path)
{
    const auto& a = j.at(key);
    const auto p = jsonu::join(path, key);
    if (!a.is_array()) {
        jsonu::fail(p, "expected an array of numbers");
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!a[k].is_number()) {
            jsonu::fail(p + "/" + std::to_string(k), "expected a number");
        }
        out.push_back(a[k].get<double>());
    }
    return out;
}

std::vector<std::size_t> count_list(const json& j, const std::string& key, const std::string& path)
{
    const auto& a = j.at(key);
    const auto p = jsonu::join(path, key);
    if (!a.is_array()) {
        jsonu::fail(p, "expected an array of integers");
    }
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!a[k].is_number_unsigned()) {
            jsonu::fail(p + "/" + std::to_string(k), "expected a non-negative integer");
        }
        out.push_back(a[k].get<std::size_t>());
    }
    return out;
}

SweepSteps steps_at(const json& j, const std::string& path, SweepSteps s)
{
    check_keys(j, path, {"silicon", "spreader", "frequency"});
    s.silicon = jsonu::count_or(j, "silicon", s.silicon, path);
    s.spreader = jsonu::count_or(j, "spreader", s.spreader, path);
    s.frequency = jsonu::count_or(j, "frequency", s.frequency, path);
    return s;
}

void range_at(const json& j, const char* key, const std::string& path, double& lo, double& hi)
{
    if (!j.contains(key)) {
        return;
    }
    const auto r = number_list(j, key, path);
    if (r.size() != 2) {
        jsonu::fail(jsonu::join(path, key), "expected [min, max]");
    }
    lo = r[0];
    hi = r[1];
}

const char* window_name(WindowKind k)
{
    switch (k) {
    case WindowKind::rectangular:
        return "rectangular";
    case WindowKind::hann:
        return "hann";
    case WindowKind::blackman:
        return "blackman";
    }
    return "hann";
}

} // namespace

RunConfig run_config_from_json(const json& j)
{
    RunConfig c;
    check_keys(j, "", {"package", "grid", "band", "surrogate", "metrics", "optimize", "phy", "linksim", "characterize"});
    if (j.contains("package")) {
        check_keys(j["package"], "/package",
                   {"silicon_thickness", "spreader_thickness", "carrier_frequency", "chip_side", "materials",
                    "boundaries"});
        c.package = package_config_from_json(j["package"], "/package");
    }
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        check_keys(g, "/grid", {"rows", "cols", "height_fraction"});
        c.grid.rows = jsonu::count_or(g, "rows", c.grid.rows, "/grid");
        c.grid.cols = jsonu::count_or(g, "cols", c.grid.cols, "/grid");
        c.grid.height_fraction = jsonu::number_or(g, "height_fraction", c.grid.height_fraction, "/grid");
        if (c.grid.rows == 0 || c.grid.cols == 0) {
            jsonu::fail("/grid", "rows and cols must be >= 1");
        }
        if (!(c.grid.height_fraction >= 0.0 && c.grid.height_fraction <= 1.0)) {
            jsonu::fail("/grid/height_fraction", "must lie in [0, 1]");
        }
    }
    if (j.contains("band")) {
        const auto& b = j["band"];
        check_keys(b, "/band", {"start", "stop", "width", "points", "allow_out_of_range"});
        if (b.contains("start")) {
            c.band.start = jsonu::number(b, "start", "/band");
        }
        if (b.contains("stop")) {
            c.band.stop = jsonu::number(b, "stop", "/band");
        }
        c.band.width = jsonu::number_or(b, "width", c.band.width, "/band");
        c.band.points = jsonu::count_or(b, "points", c.band.points, "/band");
        c.band.allow_out_of_range = jsonu::boolean_or(b, "allow_out_of_range", false, "/band");
        if (!(c.band.width > 0.0)) {
            jsonu::fail("/band/width", "must be > 0");
        }
    }
    if (j.contains("surrogate")) {
        check_keys(j["surrogate"], "/surrogate", {"max_order", "floor_db", "coefficients"});
        c.surrogate = j["surrogate"].get<SurrogateOptions>();
    }
    if (j.contains("metrics")) {
        const auto& m = j["metrics"];
        check_keys(m, "/metrics", {"bc_constant", "d0", "window", "zero_pad"});
        c.metrics.bc_constant = jsonu::number_or(m, "bc_constant", 1.0, "/metrics");
        if (!(c.metrics.bc_constant > 0.0)) {
            jsonu::fail("/metrics/bc_constant", "must be > 0");
        }
        if (m.contains("d0")) {
            c.metrics.d0 = jsonu::number(m, "d0", "/metrics");
            if (!(*c.metrics.d0 > 0.0)) {
                jsonu::fail("/metrics/d0", "must be > 0");
            }
        }
        const auto w = jsonu::string_or(m, "window", "hann", "/metrics");
        if (w == "rectangular") {
            c.metrics.window.kind = WindowKind::rectangular;
        }
        else if (w == "hann") {
            c.metrics.window.kind = WindowKind::hann;
        }
        else if (w == "blackman") {
            c.metrics.window.kind = WindowKind::blackman;
        }
        else {
            jsonu::fail("/metrics/window", "expected rectangular, hann or blackman");
        }
        c.metrics.window.zero_pad = jsonu::count_or(m, "zero_pad", c.metrics.window.zero_pad, "/metrics");
        if (c.metrics.window.zero_pad == 0) {
            jsonu::fail("/metrics/zero_pad", "must be >= 1");
        }
    }
    if (j.contains("optimize")) {
        const auto& o = j["optimize"];
        const std::string p = "/optimize";
        check_keys(o, p, {"bounds", "steps", "pilot", "weights", "schedule", "epsilon", "budget"});
        if (o.contains("bounds")) {
            const auto bp = jsonu::join(p, "bounds");
            check_keys(o["bounds"], bp, {"silicon_thickness", "spreader_thickness", "carrier_frequency"});
            auto& b = c.optimize.bounds;
            range_at(o["bounds"], "silicon_thickness", bp, b.silicon_min, b.silicon_max);
            range_at(o["bounds"], "spreader_thickness", bp, b.spreader_min, b.spreader_max);
            range_at(o["bounds"], "carrier_frequency", bp, b.frequency_min, b.frequency_max);
            try {
                b.validate();
            }
            catch (const ConfigError& e) {
                jsonu::fail(bp, e.what());
            }
        }
        if (o.contains("steps")) {
            c.optimize.steps = steps_at(o["steps"], jsonu::join(p, "steps"), c.optimize.steps);
        }
        if (o.contains("pilot")) {
            c.optimize.pilot = steps_at(o["pilot"], jsonu::join(p, "pilot"), c.optimize.pilot);
        }
        if (o.contains("weights")) {
            c.optimize.weights = number_list(o, "weights", p);
            for (std::size_t k = 0; k < c.optimize.weights.size(); ++k) {
                const double w = c.optimize.weights[k];
                if (!(w >= 0.0 && w <= 1.0)) {
                    jsonu::fail(p + "/weights/" + std::to_string(k), "w must lie in [0, 1]");
                }
            }
            if (c.optimize.weights.empty()) {
                jsonu::fail(p + "/weights", "at least one weight is required");
            }
        }
        if (o.contains("schedule")) {
            check_keys(o["schedule"], p + "/schedule",
                       {"initial_temperature", "cooling", "steps_per_temperature", "step_sizes", "step_decay",
                        "max_evaluations", "chains", "granularity"});
            c.optimize.schedule = o["schedule"].get<AnnealSchedule>();
        }
        c.optimize.epsilon = jsonu::number_or(o, "epsilon", c.optimize.epsilon, p);
        if (!(c.optimize.epsilon > 0.0 && c.optimize.epsilon < 1.0)) {
            jsonu::fail(p + "/epsilon", "must lie in (0, 1)");
        }
        c.optimize.budget = jsonu::count_or(o, "budget", 0, p);
    }
    if (j.contains("phy")) {
        check_keys(j["phy"], "/phy",
                   {"symbol_rate", "duty", "samples_per_symbol", "equal_energy", "rx_power", "noise_density"});
        c.phy = j["phy"].get<PhyConfig>();
    }
    if (j.contains("linksim")) {
        const auto& l = j["linksim"];
        const std::string p = "/linksim";
        check_keys(l, p, {"axis", "pair", "ebn0_db", "rates", "duties", "ks", "fixed_ebn0_db", "k", "memory", "mc_bits"});
        c.link.axis = jsonu::string_or(l, "axis", c.link.axis, p);
        if (l.contains("pair")) {
            const auto v = count_list(l, "pair", p);
            if (v.size() != 2 || v[0] == v[1]) {
                jsonu::fail(p + "/pair", "expected [tx, rx] with tx != rx");
            }
            c.link.pair = std::make_pair(v[0], v[1]);
        }
        if (l.contains("ebn0_db")) {
            c.link.ebn0_db = number_list(l, "ebn0_db", p);
        }
        if (l.contains("rates")) {
            c.link.rates = number_list(l, "rates", p);
        }
        if (l.contains("duties")) {
            c.link.duties = number_list(l, "duties", p);
        }
        if (l.contains("ks")) {
            c.link.ks = count_list(l, "ks", p);
        }
        c.link.fixed_ebn0_db = jsonu::number_or(l, "fixed_ebn0_db", c.link.fixed_ebn0_db, p);
        c.link.k = jsonu::count_or(l, "k", c.link.k, p);
        c.link.memory = jsonu::count_or(l, "memory", c.link.memory, p);
        c.link.mc_bits = jsonu::count_or(l, "mc_bits", c.link.mc_bits, p);
    }
    if (j.contains("characterize")) {
        check_keys(j["characterize"], "/characterize", {"write_archive"});
        c.write_archive = jsonu::boolean_or(j["characterize"], "write_archive", false, "/characterize");
    }
    return c;
}

json to_json(const RunConfig& c)
{
    json band{{"width", c.band.width}, {"points", c.band.points}, {"allow_out_of_range", c.band.allow_out_of_range}};
    if (c.band.start) {
        band["start"] = *c.band.start;
    }
    if (c.band.stop) {
        band["stop"] = *c.band.stop;
    }
    json metrics{{"bc_constant", c.metrics.bc_constant},
                 {"window", window_name(c.metrics.window.kind)},
                 {"zero_pad", c.metrics.window.zero_pad}};
    if (c.metrics.d0) {
        metrics["d0"] = *c.metrics.d0;
    }
    auto steps = [](const SweepSteps& s) {
        return json{{"silicon", s.silicon}, {"spreader", s.spreader}, {"frequency", s.frequency}};
    };
    json sched = c.optimize.schedule;
    sched.erase("seed");
    json link{{"axis", c.link.axis},       {"ebn0_db", c.link.ebn0_db},          {"rates", c.link.rates},
              {"duties", c.link.duties},   {"ks", c.link.ks},                    {"fixed_ebn0_db", c.link.fixed_ebn0_db},
              {"k", c.link.k},             {"memory", c.link.memory},            {"mc_bits", c.link.mc_bits}};
    if (c.link.pair) {
        link["pair"] = {c.link.pair->first, c.link.pair->second};
    }
    return json{{"package", c.package},
                {"grid", {{"rows", c.grid.rows}, {"cols", c.grid.cols}, {"height_fraction", c.grid.height_fraction}}},
                {"band", band},
                {"surrogate", c.surrogate},
                {"metrics", metrics},
                {"optimize",
                 {{"bounds", c.optimize.bounds},
                  {"steps", steps(c.optimize.steps)},
                  {"pilot", steps(c.optimize.pilot)},
                  {"weights", c.optimize.weights},
                  {"schedule", sched},
                  {"epsilon", c.optimize.epsilon},
                  {"budget", c.optimize.budget}}},
                {"phy",
                 {{"symbol_rate", c.phy.symbol_rate},
                  {"duty", c.phy.duty},
                  {"samples_per_symbol", c.phy.samples_per_symbol},
                  {"equal_energy", c.phy.equal_energy},
                  {"rx_power", c.phy.rx_power},
                  {"noise_density", c.phy.noise_density}}},
                {"linksim", link},
                {"characterize", {{"write_archive", c.write_archive}}}};
}

namespace {

struct Inputs {
    std::string touchstone;
    std::string ir_csv;
    std::string archive;

    json to_json() const
    {
        json j = json::object();
        if (!touchstone.empty()) {
            j["touchstone"] = touchstone;
        }
        if (!ir_csv.empty()) {
            j["ir_csv"] = ir_csv;
        }
        if (!archive.empty()) {
            j["archive"] = archive;
        }
        return j;
    }
};

struct Context {
    std::string command;
    RunConfig cfg;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::string out_dir = ".";
    Inputs inputs;
    std::vector<std::string> outputs;

    void emit(const std::string& name, const std::string& content)
    {
        write_file((fs::path(out_dir) / name).string(), content);
        outputs.push_back(name);
    }
    void emit_json(const std::string& name, const json& j) { emit(name, j.dump(2) + "\n"); }
};

std::string fmt(double v)
{
    return format_double(v);
}

std::string fmt(std::size_t v)
{
    return std::to_string(v);
}

AntennaGrid make_grid(const RunConfig& c)
{
    return AntennaGrid::homogeneous(c.package, c.grid.rows, c.grid.cols, c.grid.height_fraction);
}

double default_d0(const RunConfig& c, const std::vector<PairMetrics>& rows)
{
    if (c.metrics.d0) {
        return *c.metrics.d0;
    }
    double d = std::numeric_limits<double>::infinity();
    for (const auto& r : rows) {
        if (std::isfinite(r.distance)) {
            d = std::min(d, r.distance);
        }
    }
    return d;
}

json fit_json(const RunConfig& c, const std::vector<PairMetrics>& rows)
{
    std::vector<PairMetrics> usable;
    std::set<double> distinct;
    for (const auto& r : rows) {
        if (std::isfinite(r.distance)) {
            usable.push_back(r);
            distinct.insert(r.distance);
        }
    }
    if (distinct.size() < 2) {
        return json{{"status", "insufficient_distances"}, {"sample_count", usable.size()}};
    }
    json j = fit_pairs(usable, default_d0(c, usable));
    j["status"] = "ok";
    j["mean_loss_db"] = mean_loss(usable);
    return j;
}

void write_pair_table(Context& ctx, const std::vector<PairMetrics>& rows)
{
    std::ostringstream os;
    CsvWriter w(os, {"pair_i", "pair_j", "distance_m", "loss_db", "tau_rms_s"});
    for (const auto& r : rows) {
        w.row({fmt(r.tx), fmt(r.rx), fmt(r.distance), fmt(r.loss_db), fmt(r.tau_rms)});
    }
    ctx.emit("pairs.csv", os.str());
}

json dispersion_json(const std::vector<PairMetrics>& rows, double bc_constant)
{
    DispersionSummary s;
    s.bc_constant = bc_constant;
    s.worst_tau_rms = -1.0;
    for (const auto& r : rows) {
        s.pairs.push_back({r.tx, r.rx, r.tau_rms});
        if (r.tau_rms > s.worst_tau_rms) {
            s.worst_tau_rms = r.tau_rms;
            s.worst_tx = r.tx;
            s.worst_rx = r.rx;
        }
    }
    s.coherence_bandwidth = coherence_bandwidth(s.worst_tau_rms, bc_constant);
    return s;
}

// Impulse responses and metrics of every ordered port pair; a 2-port file is the single link 0 -> 1.
struct IngestedTouchstone {
    ChannelMatrix channel;
    std::vector<PairMetrics> rows;
    bool minimum_phase = false;
};

IngestedTouchstone ingest_touchstone(const RunConfig& c, const std::string& path)
{
    const SParameterSet sp = parse_touchstone(read_file(path), ports_from_extension(path));
    IngestedTouchstone out;
    const std::size_t n = sp.ports;
    if (n < 2) {
        throw ConfigError("touchstone input needs at least 2 ports");
    }
    AntennaGrid grid;
    const bool mapped = n == c.grid.rows * c.grid.cols;
    if (mapped) {
        grid = make_grid(c);
    }
    ChannelMatrix& cm = out.channel;
    cm.antenna_count = n;
    cm.band.start = sp.frequencies.front();
    cm.band.stop = sp.frequencies.back();
    cm.band.points = sp.size();
    cm.carrier_frequency = sp.frequencies.front();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j || (n == 2 && i == 1)) {
                continue;
            }
            const FrequencyResponse fr = freq_response(sp, i, j);
            PairMetrics row;
            row.tx = i;
            row.rx = j;
            row.distance = mapped ? grid.distance(i, j) : std::numeric_limits<double>::quiet_NaN();
            row.loss_db = path_loss_per_pair(fr, cm.band);
            InverseResult inv = impulse_from_freq(fr, c.metrics.window);
            out.minimum_phase = out.minimum_phase || inv.minimum_phase;
            row.tau_rms = delay_spread(pdp(inv.response));
            out.rows.push_back(row);
            cm.responses.push_back(std::move(inv.response));
            cm.distances.push_back(row.distance);
        }
    }
    return out;
}

ChannelMatrix ingest_ir_csv(const RunConfig& c, const std::string& path)
{
    const std::size_t grid_size = c.grid.rows * c.grid.cols;
    ChannelMatrix cm = read_impulse_csv(read_file(path));
    cm.carrier_frequency = c.package.carrier_frequency;
    cm.band = c.band.resolve(c.package.carrier_frequency);
    if (cm.antenna_count <= grid_size) {
        const AntennaGrid grid = make_grid(c);
        for (std::size_t k = 0; k < cm.responses.size(); ++k) {
            cm.distances[k] = grid.distance(cm.responses[k].tx, cm.responses[k].rx);
        }
        cm.antenna_count = grid_size;
    }
    return cm;
}

void cmd_characterize(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    std::vector<PairMetrics> rows;
    json meta{{"loss_reduction", "band-averaged |H|^2"}};
    ChannelArchive archive;
    if (!ctx.inputs.touchstone.empty()) {
        auto t = ingest_touchstone(c, ctx.inputs.touchstone);
        rows = std::move(t.rows);
        meta["source"] = "touchstone";
        meta["impulse_response"] = t.minimum_phase ? "minimum-phase reconstruction" : "inverse FFT of H(f)";
        archive.provenance = Provenance::ingested;
        archive.channel = std::move(t.channel);
    }
    else {
        if (!ctx.inputs.ir_csv.empty()) {
            archive.channel = ingest_ir_csv(c, ctx.inputs.ir_csv);
            archive.provenance = Provenance::ingested;
            meta["source"] = "impulse-response csv";
        }
        else if (!ctx.inputs.archive.empty()) {
            archive = load_channel_archive(ctx.inputs.archive);
            meta["source"] = "archive";
        }
        else {
            const AntennaGrid grid = make_grid(c);
            const FrequencyBand band = c.band.resolve(c.package.carrier_frequency);
            archive.channel = synth_channel(c.package, grid, band, c.surrogate, c.band.allow_out_of_range);
            archive.config = c.package;
            archive.grid = grid;
            archive.surrogate = c.surrogate;
            meta["source"] = "surrogate";
        }
        meta["impulse_response"] = "time-domain taps";
        rows = pair_metrics(archive.channel);
    }
    write_pair_table(ctx, rows);
    json fit = fit_json(c, rows);
    fit["metadata"] = meta;
    ctx.emit_json("path_loss_fit.json", fit);
    json disp = dispersion_json(rows, c.metrics.bc_constant);
    disp["metadata"] = meta;
    ctx.emit_json("dispersion.json", disp);
    if (c.write_archive) {
        ctx.emit("channel_archive.json", archive_to_string(archive));
    }
}

SurrogateProblem make_problem(const RunConfig& c)
{
    SurrogateProblem p;
    p.base = c.package;
    p.rows = c.grid.rows;
    p.cols = c.grid.cols;
    p.height_fraction = c.grid.height_fraction;
    p.band_width = c.band.width;
    p.band_points = c.band.points;
    p.options = c.surrogate;
    return p;
}

MetricNormalizer pilot_normalizer(const RunConfig& c, EvaluationCache& cache, std::size_t jobs)
{
    const auto cells = sweep_cells(c.optimize.bounds, c.optimize.pilot);
    std::vector<RawMetrics> raw(cells.size());
    parallel_for(cells.size(), jobs, [&](std::size_t k) { raw[k] = cache.evaluate(cells[k]); });
    return MetricNormalizer::from_samples(raw, c.optimize.epsilon);
}

std::vector<std::string> point_fields(const DesignPoint& p)
{
    return {fmt(p.w),
            fmt(p.knobs.silicon_thickness),
            fmt(p.knobs.spreader_thickness),
            fmt(p.knobs.carrier_frequency),
            fmt(p.raw.path_loss_db),
            fmt(p.raw.delay_spread),
            fmt(p.norm.path_loss),
            fmt(p.norm.delay_spread),
            fmt(p.phi),
            p.norm.clamped ? "true" : "false"};
}

const std::vector<std::string> kPointHeader{"w",       "silicon_thickness_m", "spreader_thickness_m", "carrier_frequency_hz",
                                            "path_loss_db", "delay_spread_s",   "pl_norm",              "ds_norm",
                                            "phi",     "clamped"};

void cmd_sweep(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const SurrogateProblem problem = make_problem(c);
    EvaluationCache cache([&](const Knobs& k) { return problem.evaluate(k); });
    const MetricNormalizer norm = pilot_normalizer(c, cache, ctx.jobs);
    const SweepResult r = grid_sweep(c.optimize.bounds, c.optimize.steps, c.optimize.weights, cache, norm, ctx.jobs,
                                     c.optimize.budget);
    std::ostringstream os;
    CsvWriter w(os, kPointHeader);
    for (const auto& pts : r.points) {
        for (const auto& p : pts) {
            w.row(point_fields(p));
        }
    }
    ctx.emit("sweep.csv", os.str());

    std::ostringstream ps;
    CsvWriter pw(ps, kPointHeader);
    const auto front = pareto_front(r.points.front());
    for (const auto& p : front) {
        auto f = point_fields(p);
        f[0] = "";
        pw.row(f);
    }
    ctx.emit("pareto.csv", ps.str());

    json best = json::array();
    for (std::size_t k = 0; k < r.weights.size(); ++k) {
        best.push_back(r.points[k][r.argmax[k]]);
    }
    ctx.emit_json("sweep_summary.json", json{{"normalizer", norm},
                                             {"normalizer_reference", "pilot grid sweep"},
                                             {"complete", r.complete},
                                             {"cells", r.cells.size()},
                                             {"argmax", best},
                                             {"pareto_size", front.size()}});
}

void cmd_optimize(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    const SurrogateProblem problem = make_problem(c);
    EvaluationCache cache([&](const Knobs& k) { return problem.evaluate(k); });
    const MetricNormalizer norm = pilot_normalizer(c, cache, ctx.jobs);
    const auto& weights = c.optimize.weights;
    std::vector<AnnealResult> results(weights.size());
    const std::size_t inner_jobs = std::max<std::size_t>(1, ctx.jobs / std::max<std::size_t>(1, weights.size()));
    parallel_for(weights.size(), ctx.jobs, [&](std::size_t k) {
        AnnealSchedule s = c.optimize.schedule;
        s.seed = splitmix64(ctx.seed ^ splitmix64(k + 1));
        const double w = weights[k];
        results[k] = anneal(
            [&](const Knobs& kn) { return make_design_point(kn, cache.evaluate(kn), norm, w); }, c.optimize.bounds, s,
            inner_jobs);
    });

    std::ostringstream ts;
    std::vector<std::string> th = kPointHeader;
    th.insert(th.begin() + 1, {"chain", "step", "temperature", "accepted", "current_phi", "best_phi"});
    CsvWriter tw(ts, th);
    for (const auto& res : results) {
        for (const auto& e : res.trace) {
            auto f = point_fields(e.proposal);
            f.insert(f.begin() + 1,
                     {fmt(e.chain), fmt(e.step), fmt(e.temperature), e.accepted ? "true" : "false", fmt(e.current_phi), fmt(e.best_phi)});
            tw.row(f);
        }
    }
    ctx.emit("anneal_trace.csv", ts.str());

    std::ostringstream bs;
    CsvWriter bw(bs, kPointHeader);
    json best = json::array();
    for (const auto& res : results) {
        bw.row(point_fields(res.best));
        best.push_back(res.best);
    }
    ctx.emit("optimize.csv", bs.str());
    ctx.emit_json("optimize_summary.json", json{{"normalizer", norm},
                                                {"normalizer_reference", "pilot grid sweep"},
                                                {"best", best},
                                                {"distinct_evaluations", cache.size()}});
}

struct LinkRow {
    double ebn0_db = 0.0;
    double rate = 0.0;
    double duty = 1.0;
    std::size_t k = 1;
    BerEstimate ber;
};

double from_db(double db)
{
    return std::pow(10.0, db / 10.0);
}

void cmd_linksim(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    if (ctx.inputs.archive.empty()) {
        throw ConfigError("linksim needs --archive");
    }
    if (!fs::exists(ctx.inputs.archive)) {
        throw IoError("archive '" + ctx.inputs.archive + "' does not exist");
    }
    const ChannelArchive archive = load_channel_archive(ctx.inputs.archive);
    const ChannelMatrix& cm = archive.channel;
    const ImpulseResponse* ir = nullptr;
    if (c.link.pair) {
        ir = cm.find(c.link.pair->first, c.link.pair->second);
        if (!ir) {
            throw ConfigError("linksim: pair not present in the archive");
        }
    }
    else {
        const auto d = dispersion_summary(cm);
        ir = cm.find(d.worst_tx, d.worst_rx);
    }
    const ImpulseResponse h = normalize_energy(*ir);
    const LinkSpec& L = c.link;
    std::vector<LinkRow> rows;
    json notes = json::array();
    notes.push_back("semi-analytic thresholds are selected with true past bits; Monte Carlo feeds back decoded bits");
    notes.push_back("sampler noise variance E_b / (2 EbN0) for an integrate-and-dump over one bit; E_b is the received energy of an isolated 1");

    auto note_tail = [&](const IsiStateTable& t, double rate, double duty) {
        if (t.tail_warning) {
            std::ostringstream os;
            os << "channel tail beyond memory " << t.memory << " carries " << t.tail_fraction * 100.0
               << " % of tap energy at rate " << rate << " duty " << duty;
            notes.push_back(os.str());
        }
    };
    auto mc = [&](const IsiStateTable& t, const ThresholdBank& b, const PhyConfig& phy, double ebn0, std::size_t idx) {
        MonteCarloOptions o;
        o.bits = L.mc_bits;
        o.seed = splitmix64(ctx.seed ^ splitmix64(idx + 1));
        o.jobs = ctx.jobs;
        return ber_monte_carlo(h, phy, t, b, ebn0, o);
    };

    PhyConfig phy = c.phy;
    if (L.axis == "ebn0") {
        std::vector<double> grid = L.ebn0_db;
        if (grid.empty()) {
            for (int d = 0; d <= 30; d += 2) {
                grid.push_back(d);
            }
        }
        const auto t = enumerate_isi_states(h, phy, L.memory);
        note_tail(t, phy.symbol_rate, phy.duty);
        const auto bank = derive_thresholds(t, L.k);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double e = from_db(grid[i]);
            rows.push_back({grid[i], phy.symbol_rate, phy.duty, L.k, ber_semi_analytic(t, bank, e)});
            rows.push_back({grid[i], phy.symbol_rate, phy.duty, 1, ber_closed_form(e)});
            if (L.mc_bits > 0 && rows[rows.size() - 2].ber.value >= 1e-6) {
                rows.push_back({grid[i], phy.symbol_rate, phy.duty, L.k, mc(t, bank, phy, e, i)});
            }
        }
    }
    else if (L.axis == "rate") {
        std::vector<double> grid = L.rates;
        if (grid.empty()) {
            grid = {1e9, 2e9, 5e9, 10e9, 15e9, 20e9, 30e9};
        }
        const double e = from_db(L.fixed_ebn0_db);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            PhyConfig p = phy;
            p.symbol_rate = grid[i];
            const auto t = enumerate_isi_states(h, p, L.memory);
            note_tail(t, p.symbol_rate, p.duty);
            const auto bank = derive_thresholds(t, L.k);
            rows.push_back({L.fixed_ebn0_db, p.symbol_rate, p.duty, L.k, ber_semi_analytic(t, bank, e)});
            if (L.mc_bits > 0 && rows.back().ber.value >= 1e-6) {
                rows.push_back({L.fixed_ebn0_db, p.symbol_rate, p.duty, L.k, mc(t, bank, p, e, i)});
            }
        }
    }
    else if (L.axis == "duty") {
        const std::vector<double> grid = L.duties.empty() ? default_duty_grid() : L.duties;
        const double e = from_db(L.fixed_ebn0_db);
        const auto res = optimize_duty_cycle(h, phy, e, grid, L.k, L.memory);
        for (const auto& pt : res.curve) {
            rows.push_back({L.fixed_ebn0_db, phy.symbol_rate, pt.duty, L.k, pt.ber});
        }
        std::ostringstream os;
        os << "best duty " << res.best_duty;
        notes.push_back(os.str());
    }
    else if (L.axis == "k") {
        std::vector<std::size_t> grid = L.ks;
        if (grid.empty()) {
            for (std::size_t k = 1; k <= (std::size_t{1} << L.memory); k <<= 1) {
                grid.push_back(k);
            }
        }
        const double e = from_db(L.fixed_ebn0_db);
        const auto t = enumerate_isi_states(h, phy, L.memory);
        note_tail(t, phy.symbol_rate, phy.duty);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto bank = derive_thresholds(t, grid[i]);
            rows.push_back({L.fixed_ebn0_db, phy.symbol_rate, phy.duty, grid[i], ber_semi_analytic(t, bank, e)});
            if (L.mc_bits > 0 && rows.back().ber.value >= 1e-6) {
                rows.push_back({L.fixed_ebn0_db, phy.symbol_rate, phy.duty, grid[i], mc(t, bank, phy, e, i)});
            }
        }
    }
    else {
        throw ConfigError("linksim: axis must be one of ebn0, rate, duty, k");
    }

    std::ostringstream os;
    CsvWriter w(os, {"ebn0_db", "rate_bps", "duty", "k", "ber", "ci_low", "ci_high", "method"});
    json curve = json::array();
    for (const auto& r : rows) {
        w.row({fmt(r.ebn0_db), fmt(r.rate), fmt(r.duty), fmt(r.k), fmt(r.ber.value), fmt(r.ber.ci_low),
               fmt(r.ber.ci_high), to_string(r.ber.method)});
        json e = r.ber;
        e["ebn0_db"] = r.ebn0_db;
        e["rate_bps"] = r.rate;
        e["duty"] = r.duty;
        e["k"] = r.k;
        curve.push_back(std::move(e));
    }
    ctx.emit("ber.csv", os.str());
    ctx.emit_json("curve.json", json{{"axis", L.axis},
                                     {"pair", {h.tx, h.rx}},
                                     {"provenance", to_string(archive.provenance)},
                                     {"points", curve},
                                     {"notes", notes}});
}

void cmd_ingest(Context& ctx)
{
    const RunConfig& c = ctx.cfg;
    ChannelArchive archive;
    archive.provenance = Provenance::ingested;
    json summary;
    if (!ctx.inputs.touchstone.empty()) {
        auto t = ingest_touchstone(c, ctx.inputs.touchstone);
        archive.channel = std::move(t.channel);
        summary["source"] = "touchstone";
        summary["minimum_phase"] = t.minimum_phase;
    }
    else if (!ctx.inputs.ir_csv.empty()) {
        archive.channel = ingest_ir_csv(c, ctx.inputs.ir_csv);
        summary["source"] = "impulse-response csv";
    }
    else {
        throw ConfigError("ingest needs --touchstone or --ir-csv");
    }
    for (std::size_t k = 0; k < archive.channel.antenna_count; ++k) {
        archive.port_map.push_back(k);
    }
    if (archive.channel.antenna_count == c.grid.rows * c.grid.cols) {
        archive.grid = make_grid(c);
    }
    summary["pairs"] = archive.channel.responses.size();
    summary["antennas"] = archive.channel.antenna_count;
    ctx.emit("channel_archive.json", archive_to_string(archive));
    ctx.emit_json("ingest_summary.json", summary);
}

int exit_code_for(ErrorKind k)
{
    switch (k) {
    case ErrorKind::config:
        return exit_config;
    case ErrorKind::input_parse:
        return exit_parse;
    case ErrorKind::numeric:
        return exit_numeric;
    case ErrorKind::io:
        return exit_io;
    }
    return exit_internal;
}

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void execute(Context& ctx, const std::vector<std::string>& argv)
{
    const auto started = std::chrono::steady_clock::now();
    const std::string start_utc = utc_now();
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + ctx.out_dir + "': " + ec.message());
    }
    json inputs = json::array();
    const json spec = ctx.inputs.to_json();
    for (auto it = spec.begin(); it != spec.end(); ++it) {
        const std::string role = it.key();
        const std::string p = it.value().get<std::string>();
        if (!fs::exists(p)) {
            throw IoError("input '" + p + "' does not exist");
        }
        inputs.push_back({{"role", role}, {"path", p}, {"sha256", sha256_file(p)}});
    }

    if (ctx.command == "characterize") {
        cmd_characterize(ctx);
    }
    else if (ctx.command == "sweep") {
        cmd_sweep(ctx);
    }
    else if (ctx.command == "optimize") {
        cmd_optimize(ctx);
    }
    else if (ctx.command == "linksim") {
        cmd_linksim(ctx);
    }
    else if (ctx.command == "ingest") {
        cmd_ingest(ctx);
    }
    else {
        throw ConfigError("unknown command '" + ctx.command + "'");
    }

    json outputs = json::array();
    std::sort(ctx.outputs.begin(), ctx.outputs.end());
    for (const auto& name : ctx.outputs) {
        outputs.push_back({{"file", name}, {"sha256", sha256_file((fs::path(ctx.out_dir) / name).string())}});
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest{{"tool", "pkgwave"},
                  {"version", kToolVersion},
                  {"command", ctx.command},
                  {"argv", argv},
                  {"config", to_json(ctx.cfg)},
                  {"seed", ctx.seed},
                  {"jobs", ctx.jobs},
                  {"inputs_spec", ctx.inputs.to_json()},
                  {"inputs", inputs},
                  {"outputs", outputs},
                  {"wall_clock", {{"start_utc", start_utc}, {"elapsed_s", elapsed}}}};
    write_file((fs::path(ctx.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

void replay(Context& ctx, const std::string& manifest_path, bool out_given, bool jobs_given)
{
    json m;
    try {
        m = json::parse(read_file(manifest_path));
    }
    catch (const json::parse_error& e) {
        throw ParseError("manifest_malformed", 0, e.what());
    }
    try {
        ctx.command = m.at("command").get<std::string>();
        ctx.cfg = run_config_from_json(m.at("config"));
        ctx.seed = m.at("seed").get<std::uint64_t>();
        if (!jobs_given) {
            ctx.jobs = m.at("jobs").get<std::size_t>();
        }
        const json& in = m.at("inputs_spec");
        ctx.inputs.touchstone = in.value("touchstone", "");
        ctx.inputs.ir_csv = in.value("ir_csv", "");
        ctx.inputs.archive = in.value("archive", "");
        for (const auto& rec : m.at("inputs")) {
            const std::string p = rec.at("path").get<std::string>();
            if (fs::exists(p) && sha256_file(p) != rec.at("sha256").get<std::string>()) {
                throw IoError("input '" + p + "' changed since the manifest was written");
            }
        }
    }
    catch (const json::exception& e) {
        throw ParseError("manifest_schema", 0, e.what());
    }
    if (!out_given) {
        ctx.out_dir = fs::path(manifest_path).parent_path().string();
        if (ctx.out_dir.empty()) {
            ctx.out_dir = ".";
        }
    }
}

} // namespace

int run_cli(int argc, char** argv)
{
    CLI::App app{"Flip-chip package channel toolkit"};
    app.set_version_flag("--version", kToolVersion);
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out_dir = ".";
    std::string config_path;
    std::string manifest_path;
    app.add_option("--seed", seed, "master random seed (recorded in the manifest)");
    app.add_option("--jobs", jobs, "worker threads for sweeps and Monte Carlo")->check(CLI::PositiveNumber);
    auto* out_opt = app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--manifest", manifest_path, "re-run the command recorded in a manifest");
    app.require_subcommand(0, 1);

    Inputs inputs;
    bool archive_out = false;
    auto* characterize = app.add_subcommand("characterize", "per-pair loss, delay spread and path-loss fit");
    characterize->add_option("--touchstone", inputs.touchstone, "Touchstone v1 S-parameter file");
    characterize->add_option("--ir-csv", inputs.ir_csv, "impulse-response CSV (pair_i,pair_j,delay_s,re,im)");
    characterize->add_option("--archive", inputs.archive, "channel archive to characterize");
    characterize->add_flag("--write-archive", archive_out, "also write channel_archive.json");

    std::vector<double> weights;
    auto* sweep = app.add_subcommand("sweep", "grid sweep of the design space");
    sweep->add_option("--w", weights, "figure-of-merit weights");
    auto* optimize = app.add_subcommand("optimize", "simulated annealing per weight");
    optimize->add_option("--w", weights, "figure-of-merit weights");

    std::string axis;
    std::vector<std::size_t> pair;
    std::uint64_t mc_bits = 0;
    auto* linksim = app.add_subcommand("linksim", "OOK bit error rate curves on an archived channel");
    linksim->add_option("--archive", inputs.archive, "channel archive")->required();
    linksim->add_option("--axis", axis, "ebn0 | rate | duty | k");
    linksim->add_option("--pair", pair, "tx rx antenna indices")->expected(2);
    linksim->add_option("--mc-bits", mc_bits, "Monte Carlo bits per point (0 = off)");

    auto* ingest = app.add_subcommand("ingest", "convert external data into a channel archive");
    ingest->add_option("--touchstone", inputs.touchstone, "Touchstone v1 S-parameter file");
    ingest->add_option("--ir-csv", inputs.ir_csv, "impulse-response CSV");

    try {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    std::vector<std::string> args(argv, argv + argc);
    Context ctx;
    ctx.out_dir = out_dir;
    ctx.jobs = jobs;
    try {
        if (!manifest_path.empty()) {
            replay(ctx, manifest_path, out_opt->count() > 0, app.count("--jobs") > 0);
        }
        else {
            if (app.get_subcommands().empty()) {
                std::cerr << app.help();
                return exit_config;
            }
            ctx.command = app.get_subcommands().front()->get_name();
            if (!config_path.empty()) {
                json j;
                try {
                    j = json::parse(read_file(config_path));
                }
                catch (const json::parse_error& e) {
                    throw ParseError("config_malformed", 0, e.what());
                }
                ctx.cfg = run_config_from_json(j);
            }
            if (!weights.empty()) {
                for (double w : weights) {
                    if (!(w >= 0.0 && w <= 1.0)) {
                        throw ConfigError("--w values must lie in [0, 1]");
                    }
                }
                ctx.cfg.optimize.weights = weights;
            }
            if (!axis.empty()) {
                ctx.cfg.link.axis = axis;
            }
            if (pair.size() == 2) {
                if (pair[0] == pair[1]) {
                    throw ConfigError("--pair needs two distinct antennas");
                }
                ctx.cfg.link.pair = std::make_pair(pair[0], pair[1]);
            }
            if (mc_bits > 0) {
                ctx.cfg.link.mc_bits = mc_bits;
            }
            if (archive_out) {
                ctx.cfg.write_archive = true;
            }
            ctx.inputs = inputs;
            if (seed) {
                ctx.seed = *seed;
            }
            else {
                std::random_device rd;
                ctx.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
            }
        }
        execute(ctx, args);
        return exit_ok;
    }
    catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code_for(e.kind());
    }
    catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return exit_internal;
    }
}

} // namespace pkgwave

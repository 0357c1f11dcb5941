#include "pkgwave/chan_model.hpp"

#include "pkgwave/constants.hpp"
#include "pkgwave/error.hpp"
#include "pkgwave/json_util.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>

namespace pkgwave {

namespace {

struct Layer {
    double z_lo = 0.0;
    double z_hi = 0.0;
    double index = 1.0;
    double alpha = 0.0;
};

struct Stack {
    std::vector<Layer> layers;
    bool top_conductor = true;
    bool bottom_conductor = true;

    std::size_t layer_of(double z) const
    {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (z <= layers[i].z_hi) {
                return i;
            }
        }
        return layers.size() - 1;
    }
};

// Per-interface interaction counters: reflect from below, reflect from above, transmit up, transmit down.
using InterfaceEvents = std::array<std::uint16_t, 4>;

struct VerticalPath {
    std::vector<double> lengths; // vertical distance per layer
    std::vector<InterfaceEvents> events;
    std::size_t conductor_bounces = 0;
    std::size_t bounces = 0;
    double multiplicity = 1.0;
    double total = 0.0;
};

struct LateralImage {
    double rho = 0.0;
    std::size_t bounces = 0;
    double sign = 1.0;
};

Stack make_stack(const PackageConfig& cfg)
{
    Stack s;
    s.top_conductor = cfg.boundaries.top_conductor;
    s.bottom_conductor = cfg.boundaries.bottom_conductor;
    const double f = cfg.carrier_frequency;
    s.layers.push_back({0.0, cfg.silicon_thickness, cfg.materials.silicon.refractive_index(),
                        material_attenuation(cfg.materials.silicon, f)});
    if (cfg.spreader_thickness > 0.0) {
        s.layers.push_back({cfg.silicon_thickness, cfg.stack_height(), cfg.materials.spreader.refractive_index(),
                            material_attenuation(cfg.materials.spreader, f)});
    }
    return s;
}

class VerticalWalker {
public:
    VerticalWalker(const Stack& s, double zr, std::size_t max_order) : stack_(s), zr_(zr), max_(max_order) {}

    std::vector<VerticalPath> run(double zt)
    {
        VerticalPath start;
        start.lengths.assign(stack_.layers.size(), 0.0);
        start.events.assign(stack_.layers.size() - 1, InterfaceEvents{});
        const std::size_t lt = stack_.layer_of(zt);
        if (zt == zr_) {
            found_.push_back(start);
        }
        walk(zt, lt, +1, start);
        walk(zt, lt, -1, start);
        return merge();
    }

private:
    // Segment (z, boundary] in the travel direction; rx is counted when it lies inside it.
    void walk(double z, std::size_t L, int dir, VerticalPath path)
    {
        const Layer& layer = stack_.layers[L];
        const double zb = dir > 0 ? layer.z_hi : layer.z_lo;
        const bool hit = dir > 0 ? (zr_ > z && zr_ <= zb) : (zr_ < z && zr_ >= zb);
        if (hit) {
            VerticalPath p = path;
            p.lengths[L] += std::abs(zr_ - z);
            found_.push_back(std::move(p));
        }
        path.lengths[L] += std::abs(zb - z);

        const bool outer = dir > 0 ? L + 1 == stack_.layers.size() : L == 0;
        if (outer) {
            const bool conductor = dir > 0 ? stack_.top_conductor : stack_.bottom_conductor;
            if (conductor && path.bounces < max_) {
                path.bounces += 1;
                path.conductor_bounces += 1;
                walk(zb, L, -dir, std::move(path));
            }
            return;
        }
        const std::size_t next = dir > 0 ? L + 1 : L - 1;
        const std::size_t iface = dir > 0 ? L : L - 1;
        const bool mismatch = stack_.layers[L].index != stack_.layers[next].index;
        if (mismatch && path.bounces < max_) {
            VerticalPath r = path;
            r.bounces += 1;
            r.events[iface][dir > 0 ? 0 : 1] += 1;
            walk(zb, L, -dir, std::move(r));
        }
        path.events[iface][dir > 0 ? 2 : 3] += 1;
        walk(zb, next, dir, std::move(path));
    }

    std::vector<VerticalPath> merge()
    {
        // Histories with identical geometry and interaction counts are coherent copies of one tap.
        std::map<std::vector<long long>, std::size_t> index;
        std::vector<VerticalPath> out;
        for (auto& p : found_) {
            std::vector<long long> key;
            key.push_back(static_cast<long long>(p.bounces));
            key.push_back(static_cast<long long>(p.conductor_bounces));
            for (double l : p.lengths) {
                key.push_back(std::llround(l * 1e12));
            }
            for (const auto& e : p.events) {
                key.insert(key.end(), e.begin(), e.end());
            }
            auto [it, inserted] = index.emplace(std::move(key), out.size());
            if (inserted) {
                p.total = std::accumulate(p.lengths.begin(), p.lengths.end(), 0.0);
                out.push_back(std::move(p));
            }
            else {
                out[it->second].multiplicity += 1.0;
            }
        }
        return out;
    }

    const Stack& stack_;
    double zr_;
    std::size_t max_;
    std::vector<VerticalPath> found_;
};

std::vector<LateralImage> lateral_images(const PackageConfig& cfg, const Position& tx, const Position& rx,
                                         std::size_t max_order)
{
    std::vector<LateralImage> out;
    if (cfg.boundaries.lateral_walls == LateralBoundary::absorbing) {
        out.push_back({std::hypot(tx[0] - rx[0], tx[1] - rx[1]), 0, 1.0});
        return out;
    }
    const double side = cfg.chip_side;
    // 1-D images along one axis: coordinate and reflection count.
    auto axis = [&](double s) {
        std::vector<std::pair<double, std::size_t>> v;
        const long long K = static_cast<long long>(max_order);
        for (long long k = -K; k <= K; ++k) {
            const std::size_t straight = static_cast<std::size_t>(std::llabs(2 * k));
            const std::size_t mirrored = static_cast<std::size_t>(std::llabs(2 * k - 1));
            if (straight <= max_order) {
                v.emplace_back(2.0 * k * side + s, straight);
            }
            if (mirrored <= max_order) {
                v.emplace_back(2.0 * k * side - s, mirrored);
            }
        }
        return v;
    };
    const auto xs = axis(tx[0]);
    const auto ys = axis(tx[1]);
    for (const auto& [x, nx] : xs) {
        for (const auto& [y, ny] : ys) {
            const std::size_t b = nx + ny;
            if (b > max_order) {
                continue;
            }
            out.push_back({std::hypot(x - rx[0], y - rx[1]), b, (b % 2 == 0) ? 1.0 : -1.0});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const LateralImage& a, const LateralImage& b) {
        return a.rho != b.rho ? a.rho < b.rho : a.bounces < b.bounces;
    });
    return out;
}

// Coefficient product of a vertical history at ray angle cos_theta (1 = normal incidence).
cplx vertical_coefficient(const Stack& s, const VerticalPath& p, double cos_theta, CoefficientMode mode)
{
    cplx c = (p.conductor_bounces % 2 == 0) ? 1.0 : -1.0;
    for (std::size_t k = 0; k < p.events.size(); ++k) {
        const auto& e = p.events[k];
        if (e[0] + e[1] + e[2] + e[3] == 0) {
            continue;
        }
        const double n1 = s.layers[k].index;
        const double n2 = s.layers[k + 1].index;
        cplx r12, r21, t;
        if (mode == CoefficientMode::normal_incidence) {
            r12 = (n1 - n2) / (n1 + n2);
            r21 = -r12;
            t = 2.0 * std::sqrt(n1 * n2) / (n1 + n2);
        }
        else {
            // TE Fresnel; the straight unfolded ray keeps one angle in both media.
            const double sin2 = std::max(0.0, 1.0 - cos_theta * cos_theta);
            auto cos_in = [&](double na, double nb) {
                return std::sqrt(cplx(1.0 - (na / nb) * (na / nb) * sin2, 0.0));
            };
            const cplx c1 = cos_theta;
            const cplx c2a = cos_in(n1, n2); // transmitted angle, incident from layer k
            const cplx c2b = cos_in(n2, n1); // transmitted angle, incident from layer k+1
            r12 = (n1 * c1 - n2 * c2a) / (n1 * c1 + n2 * c2a);
            r21 = (n2 * c1 - n1 * c2b) / (n2 * c1 + n1 * c2b);
            const bool evanescent = std::abs(c2a.imag()) > 0.0 || std::abs(c2b.imag()) > 0.0;
            t = evanescent ? cplx(0.0) : cplx(std::sqrt(1.0 - std::norm(r12)));
        }
        c *= std::pow(r12, static_cast<int>(e[0])) * std::pow(r21, static_cast<int>(e[1]))
             * std::pow(t, static_cast<int>(e[2] + e[3]));
    }
    return c * p.multiplicity;
}

struct Candidate {
    std::size_t v = 0;
    std::size_t l = 0;
    double distance = 0.0;
    double magnitude = 0.0;
    cplx coef;
};

std::vector<RayPath> combine(const PackageConfig& cfg, const Stack& stack, const std::vector<VerticalPath>& vertical,
                             const std::vector<LateralImage>& lateral, std::size_t antenna_layer,
                             std::size_t max_order, double floor_db, CoefficientMode mode)
{
    const double lambda = constants::c0 / cfg.carrier_frequency;
    const std::size_t nl = stack.layers.size();
    std::vector<cplx> normal_coef(vertical.size());
    for (std::size_t v = 0; v < vertical.size(); ++v) {
        normal_coef[v] = vertical_coefficient(stack, vertical[v], 1.0, CoefficientMode::normal_incidence);
    }

    // Vertical histories in order of increasing length so a strong running maximum forms early.
    std::vector<std::size_t> order(vertical.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vertical[a].total < vertical[b].total; });
    const double keep_ratio = std::pow(10.0, -floor_db / 20.0);
    const bool monotone = mode == CoefficientMode::normal_incidence;

    std::vector<Candidate> cands;
    double strongest = 0.0;
    for (std::size_t v : order) {
        const VerticalPath& vp = vertical[v];
        if (vp.bounces > max_order || normal_coef[v] == cplx(0.0)) {
            continue;
        }
        double loss_per_unit = 0.0; // sum(alpha_i * V_i) / V
        if (vp.total > 0.0) {
            for (std::size_t i = 0; i < nl; ++i) {
                loss_per_unit += stack.layers[i].alpha * vp.lengths[i];
            }
            loss_per_unit /= vp.total;
        }
        else {
            loss_per_unit = stack.layers[antenna_layer].alpha;
        }
        for (std::size_t l = 0; l < lateral.size(); ++l) {
            const LateralImage& li = lateral[l];
            if (vp.bounces + li.bounces > max_order) {
                continue;
            }
            const double D = std::hypot(li.rho, vp.total);
            if (!(D > 0.0)) {
                continue;
            }
            const bool direct = vp.bounces + li.bounces == 0;
            if (monotone && !direct) {
                // Images are sorted by rho, so the magnitude only falls from here on.
                const double bound =
                    std::abs(normal_coef[v]) * std::exp(-loss_per_unit * D) * lambda / (4.0 * constants::pi * D);
                if (bound < strongest * keep_ratio) {
                    break;
                }
            }
            cplx coef = normal_coef[v];
            if (mode == CoefficientMode::angle_dependent) {
                coef = vertical_coefficient(stack, vp, vp.total / D, mode);
            }
            coef *= li.sign;
            const double mag = std::abs(coef) * std::exp(-loss_per_unit * D) * lambda / (4.0 * constants::pi * D);
            if (mag == 0.0) {
                continue;
            }
            strongest = std::max(strongest, mag);
            cands.push_back({v, l, D, mag, coef});
        }
    }

    const double keep = strongest * keep_ratio;
    std::vector<RayPath> out;
    for (const auto& c : cands) {
        const VerticalPath& vp = vertical[c.v];
        const LateralImage& li = lateral[c.l];
        const bool direct = vp.bounces + li.bounces == 0;
        if (c.magnitude < keep && !direct) {
            continue;
        }
        RayPath r;
        r.layer_lengths.assign(nl, 0.0);
        if (vp.total > 0.0) {
            for (std::size_t i = 0; i < nl; ++i) {
                r.layer_lengths[i] = c.distance * vp.lengths[i] / vp.total;
            }
        }
        else {
            r.layer_lengths[antenna_layer] = c.distance;
        }
        double optical = 0.0;
        for (std::size_t i = 0; i < nl; ++i) {
            optical += r.layer_lengths[i] * stack.layers[i].index;
        }
        r.delay = optical / constants::c0;
        r.bounce_count = vp.bounces + li.bounces;
        r.lateral_bounces = li.bounces;
        r.direct = direct;
        const double phase = -2.0 * constants::pi * std::fmod(optical / lambda, 1.0);
        r.amplitude = c.coef / std::abs(c.coef) * c.magnitude * std::polar(1.0, phase);
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(), [](const RayPath& a, const RayPath& b) {
        if (a.delay != b.delay) {
            return a.delay < b.delay;
        }
        return a.bounce_count < b.bounce_count;
    });
    return out;
}

void check_position(const PackageConfig& cfg, const Position& p, const char* what)
{
    const double eps = 1e-12;
    for (double c : p) {
        if (!std::isfinite(c)) {
            throw ConfigError(std::string(what) + " position is not finite");
        }
    }
    if (p[0] < -eps || p[0] > cfg.chip_side + eps || p[1] < -eps || p[1] > cfg.chip_side + eps) {
        throw ConfigError(std::string(what) + " position lies outside the chip");
    }
    if (p[2] < -eps || p[2] > cfg.stack_height() + eps) {
        throw ConfigError(std::string(what) + " position lies outside the stack");
    }
}

void check_floor(double floor_db)
{
    if (!(floor_db > 0.0) || std::isnan(floor_db)) {
        throw ConfigError("floor_db must be > 0");
    }
}

} // namespace

void SurrogateOptions::validate() const
{
    check_floor(floor_db);
}

std::vector<RayPath> enumerate_images(const PackageConfig& cfg, const Position& tx, const Position& rx,
                                      std::size_t max_order, double floor_db, CoefficientMode mode)
{
    cfg.validate();
    check_floor(floor_db);
    check_position(cfg, tx, "tx");
    check_position(cfg, rx, "rx");
    if (tx == rx) {
        throw ConfigError("tx and rx coincide");
    }
    const Stack stack = make_stack(cfg);
    const auto vertical = VerticalWalker(stack, rx[2], max_order).run(tx[2]);
    const auto lateral = lateral_images(cfg, tx, rx, max_order);
    return combine(cfg, stack, vertical, lateral, stack.layer_of(tx[2]), max_order, floor_db, mode);
}

ChannelMatrix synth_channel(const PackageConfig& cfg, const AntennaGrid& grid, const FrequencyBand& band,
                            const SurrogateOptions& options, bool allow_out_of_band)
{
    cfg.validate();
    options.validate();
    band.validate(allow_out_of_band);
    grid.validate();
    for (const auto& p : grid.positions) {
        check_position(cfg, p, "antenna");
    }
    const Stack stack = make_stack(cfg);
    const std::size_t n = grid.size();

    ChannelMatrix cm;
    cm.antenna_count = n;
    cm.carrier_frequency = cfg.carrier_frequency;
    cm.band = band;

    std::map<std::pair<double, double>, std::vector<VerticalPath>> vertical_cache;
    std::vector<std::vector<Tap>> upper(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Position& a = grid.positions[i];
            const Position& b = grid.positions[j];
            auto key = std::make_pair(a[2], b[2]);
            auto it = vertical_cache.find(key);
            if (it == vertical_cache.end()) {
                it = vertical_cache.emplace(key, VerticalWalker(stack, b[2], options.max_order).run(a[2])).first;
            }
            const auto lateral = lateral_images(cfg, a, b, options.max_order);
            const auto paths = combine(cfg, stack, it->second, lateral, stack.layer_of(a[2]), options.max_order,
                                       options.floor_db, options.mode);
            auto& taps = upper[i * n + j];
            taps.reserve(paths.size());
            for (const auto& p : paths) {
                taps.push_back({p.delay, p.amplitude});
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            ImpulseResponse ir;
            ir.tx = i;
            ir.rx = j;
            ir.taps = i < j ? upper[i * n + j] : upper[j * n + i];
            cm.responses.push_back(std::move(ir));
            cm.distances.push_back(grid.distance(i, j));
        }
    }
    return cm;
}

void to_json(nlohmann::json& j, const SurrogateOptions& o)
{
    j = nlohmann::json{{"max_order", o.max_order},
                       {"floor_db", o.floor_db},
                       {"coefficients", o.mode == CoefficientMode::normal_incidence ? "normal" : "angle"}};
}

void from_json(const nlohmann::json& j, SurrogateOptions& o)
{
    const std::string path = "/surrogate";
    o.max_order = jsonu::count_or(j, "max_order", o.max_order, path);
    o.floor_db = jsonu::number_or(j, "floor_db", o.floor_db, path);
    const auto mode = jsonu::string_or(j, "coefficients", "normal", path);
    if (mode == "normal") {
        o.mode = CoefficientMode::normal_incidence;
    }
    else if (mode == "angle") {
        o.mode = CoefficientMode::angle_dependent;
    }
    else {
        jsonu::fail(jsonu::join(path, "coefficients"), "expected \"normal\" or \"angle\"");
    }
    if (!(o.floor_db > 0.0)) {
        jsonu::fail(jsonu::join(path, "floor_db"), "must be > 0");
    }
}

} // namespace pkgwave

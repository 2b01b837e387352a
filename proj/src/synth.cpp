#include "pdpfkg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace pdpfkg {

namespace {

// Gaussian deviate via Box-Muller on the shared uniform source.
double normal01(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Marsaglia-Tsang gamma deviate (any positive shape, unit scale).
double gamma_deviate(Rng& rng, double shape) {
    if (shape < 1.0) {
        const double u = 1.0 - uniform01(rng);
        return gamma_deviate(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double x = normal01(rng);
        const double t = 1.0 + c * x;
        if (t <= 0.0) continue;
        const double v = t * t * t;
        const double u = uniform01(rng);
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

// Poisson deviate: Knuth's product method for small means, Gaussian
// approximation for large ones (well beyond desk-scale defaults).
long long poisson_deviate(Rng& rng, double mean) {
    if (mean <= 0.0) return 0;
    if (mean > 60.0) {
        const double x = mean + std::sqrt(mean) * normal01(rng);
        return x < 0.0 ? 0 : static_cast<long long>(std::llround(x));
    }
    const double limit = std::exp(-mean);
    long long k = 0;
    double p = 1.0;
    do {
        ++k;
        p *= uniform01(rng);
    } while (p > limit);
    return k - 1;
}

int pick(Rng& rng, const std::vector<int>& pool) {
    return pool[static_cast<std::size_t>(uniform_below(rng, pool.size()))];
}

}  // namespace

void SynthConfig::validate() const {
    if (num_individuals < 1) throw ConfigError("num_individuals must be at least 1");
    if (num_zones < 1) throw ConfigError("num_zones must be at least 1");
    if (num_groups < 1) throw ConfigError("num_groups must be at least 1");
    if (zones_per_group_affinity < 1)
        throw ConfigError("zones_per_group_affinity must be at least 1");
    if (num_groups * zones_per_group_affinity > num_zones)
        throw ConfigError("affinity sets need " +
                          std::to_string(num_groups * zones_per_group_affinity) +
                          " distinct zones but num_zones is " + std::to_string(num_zones));
    if (!(trips_mean > 0)) throw ConfigError("trips_mean must be positive");
    if (trips_dispersion < 0) throw ConfigError("trips_dispersion must be non-negative");
    if (observation_days < 1) throw ConfigError("observation_days must be at least 1");
    if (future_days < 1) throw ConfigError("future_days must be at least 1");
    if (exploration_rate < 0 || exploration_rate > 1)
        throw ConfigError("exploration_rate must be in [0, 1]");
    if (noise_rate < 0 || noise_rate > 1) throw ConfigError("noise_rate must be in [0, 1]");
    if (exploration_rate + noise_rate > 1.0)
        throw ConfigError("exploration_rate + noise_rate must not exceed 1");
}

SynthOutput generate(const SynthConfig& cfg) {
    cfg.validate();
    SynthOutput out;

    for (int z = 1; z <= cfg.num_zones; ++z) out.zones.insert(z);

    // Disjoint affinity sets over the leading zones; any remainder is
    // background reachable only through noise draws.
    out.group_zones.assign(cfg.num_groups, {});
    for (int g = 0; g < cfg.num_groups; ++g)
        for (int j = 0; j < cfg.zones_per_group_affinity; ++j)
            out.group_zones[g].push_back(g * cfg.zones_per_group_affinity + j + 1);

    // Grid coordinates, roughly 2 km apart.
    const int grid_w = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(cfg.num_zones))));
    for (int z = 1; z <= cfg.num_zones; ++z) {
        const int row = (z - 1) / grid_w, col = (z - 1) % grid_w;
        out.coords[z] = {30.0 + 0.02 * row, 118.0 + 0.02 * col};
    }

    // One shared point-of-interest label per group.
    for (int g = 0; g < cfg.num_groups; ++g) {
        char label[32];
        std::snprintf(label, sizeof label, "amenity_g%d", g);
        for (const int z : out.group_zones[g]) out.poi.push_back({z, label});
    }

    const Date base = parse_date("2023-05-01");  // a Monday
    const int base_day = day_number(base);
    out.split.observe_begin = base;
    out.split.observe_end = date_from_day_number(base_day + cfg.observation_days - 1);
    out.split.future_begin = date_from_day_number(base_day + cfg.observation_days);
    out.split.future_end =
        date_from_day_number(base_day + cfg.observation_days + cfg.future_days - 1);

    std::vector<int> all_zones(out.zones.begin(), out.zones.end());
    // Group signature beyond the destination choice: origins come almost
    // entirely from the group's zones, and each group prefers one departure
    // span, so shared time entities differentiate groups instead of gluing
    // them together.
    const double origin_affinity_rate = 0.95;
    const double preferred_span_rate = 0.8;
    const TemporalConfig temporal = TemporalConfig::defaults();
    const int span_count = static_cast<int>(temporal.spans.size());

    Rng rng(cfg.seed);
    const int id_width = static_cast<int>(std::to_string(cfg.num_individuals).size());
    for (int i = 0; i < cfg.num_individuals; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "s%0*d", id_width, i + 1);
        const int group = i % cfg.num_groups;
        out.group_of[id] = group;
        const std::vector<int>& affinity = out.group_zones[group];

        double rate = 1.0;
        if (cfg.trips_dispersion > 0)
            rate = gamma_deviate(rng, 1.0 / cfg.trips_dispersion) * cfg.trips_dispersion;
        const double future_mean =
            cfg.trips_mean * static_cast<double>(cfg.future_days) / cfg.observation_days;
        const long long obs_n = std::max<long long>(1, poisson_deviate(rng, rate * cfg.trips_mean));
        const long long fut_n = std::max<long long>(1, poisson_deviate(rng, rate * future_mean));

        std::vector<int> history;  // every destination so far; replay draws uniformly here
        std::set<int> visited;
        for (long long t = 0; t < obs_n + fut_n; ++t) {
            const bool in_future = t >= obs_n;
            int dest;
            if (history.empty()) {
                dest = pick(rng, affinity);
            } else if (!in_future) {
                dest = pick(rng, history);  // observation window is pure routine
            } else {
                const double u = uniform01(rng);
                if (u < cfg.noise_rate) {
                    dest = pick(rng, all_zones);
                } else if (u < cfg.noise_rate + cfg.exploration_rate) {
                    std::vector<int> fresh;
                    for (const int z : affinity)
                        if (!visited.count(z)) fresh.push_back(z);
                    dest = fresh.empty() ? pick(rng, history) : pick(rng, fresh);
                } else {
                    dest = pick(rng, history);
                }
            }
            history.push_back(dest);
            visited.insert(dest);

            int origin = uniform01(rng) < origin_affinity_rate ? pick(rng, affinity)
                                                               : pick(rng, all_zones);
            while (origin == dest && cfg.num_zones > 1) origin = pick(rng, all_zones);

            TripRecord rec;
            rec.vehicle_id = id;
            const int day_lo = in_future ? cfg.observation_days : 0;
            const int day_span = in_future ? cfg.future_days : cfg.observation_days;
            rec.date = date_from_day_number(
                base_day + day_lo + static_cast<int>(uniform_below(rng, day_span)));
            if (uniform01(rng) < preferred_span_rate) {
                const TimeSpan& span = temporal.spans[(2 + group) % span_count];
                rec.ftime =
                    span.start + static_cast<int>(uniform_below(
                                     rng, static_cast<std::uint64_t>(span.end - span.start)));
            } else {
                rec.ftime = static_cast<int>(uniform_below(rng, 86400));
            }
            rec.fzone = origin;
            rec.tzone = dest;
            (in_future ? out.future : out.observed).push_back(std::move(rec));
        }
    }

    const auto by_vehicle_day_time = [](const TripRecord& a, const TripRecord& b) {
        if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
        if (day_number(a.date) != day_number(b.date)) return day_number(a.date) < day_number(b.date);
        return a.ftime < b.ftime;
    };
    std::stable_sort(out.observed.begin(), out.observed.end(), by_vehicle_day_time);
    std::stable_sort(out.future.begin(), out.future.end(), by_vehicle_day_time);

    out.profiles = build_profiles(out.observed, out.future);
    return out;
}

}  // namespace pdpfkg

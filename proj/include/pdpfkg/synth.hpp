#pragma once
// Synthetic trip populations with planted group structure: individuals belong
// to disjoint, equally popular affinity groups; destinations replay heavily
// with occasional exploration of unvisited affinity zones, so each
// individual's future window contains destinations that are absent from its
// observation window yet predictable from group membership.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdpfkg/baselines.hpp"
#include "pdpfkg/tkg.hpp"
#include "pdpfkg/trip_data.hpp"

namespace pdpfkg {

struct SynthConfig {
    int num_individuals = 500;
    int num_zones = 40;
    int num_groups = 5;
    int zones_per_group_affinity = 8;
    double trips_mean = 6.0;         // mean observed trips per individual
    double trips_dispersion = 0.15;  // variance of the per-individual rate multiplier
    int observation_days = 7;
    int future_days = 14;
    // Per-trip draw in the future window: noise_rate targets a uniformly
    // random zone, exploration_rate targets an unvisited affinity zone, and
    // the remainder replays a previously visited destination. The
    // observation window is pure routine (first destination + replays), so
    // novelty appears only in the future window; this is what guarantees
    // potential destinations exist by construction instead of being consumed
    // during observation.
    double exploration_rate = 0.3;
    double noise_rate = 0.01;
    std::uint64_t seed = 7;

    void validate() const;  // throws ConfigError
};

struct SynthOutput {
    std::vector<TripRecord> observed;
    std::vector<TripRecord> future;
    std::vector<IndividualProfile> profiles;  // built from the generated records
    std::vector<PoiRow> poi;                  // one shared label per group
    std::map<int, ZoneCoord> coords;          // grid layout
    ObservationSplit split;
    std::set<int> zones;
    std::map<std::string, int> group_of;       // vehicle id -> group index
    std::vector<std::vector<int>> group_zones; // group index -> affinity zones
};

// Deterministic given cfg.seed; emits records in the exact formats the
// parsing/graph/baseline layers consume.
SynthOutput generate(const SynthConfig& cfg);

}  // namespace pdpfkg

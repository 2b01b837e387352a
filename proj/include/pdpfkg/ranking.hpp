#pragma once
// Per-individual rankings of unobserved zones: embedding ranks (ascending
// core-triple distance, ties share a rank), population hotness ranks, and
// their rank-sum combination.

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdpfkg/embedding.hpp"
#include "pdpfkg/tkg.hpp"
#include "pdpfkg/trip_data.hpp"

namespace pdpfkg {

struct RankingTable {
    std::string vehicle_id;
    std::string kind;          // "embedding", "hotness", "combined", or a baseline name
    std::map<int, int> ranks;  // zone -> rank, minimum 1
    bool fallback = false;     // set when the method had no signal and used the tie-break order
};

struct HotnessTable {
    // Population-wide visit counts over the observation window and the
    // derived dense ranking: rank 1 is a most-visited zone, count ties broken
    // by ascending zone id, every zone ranked.
    std::map<int, long long> counts;
    std::map<int, int> ranks;
};

// Distance of the vehicle's core triple to every unobserved zone; rank(z) is
// one plus the number of strictly closer unobserved zones, so exact ties
// share a rank.
RankingTable embedding_ranking(const EmbeddingModel& model, const TripKnowledgeGraph& graph,
                               const std::string& vehicle);

// Visit counts of observed destinations across the target population.
HotnessTable hotness_ranking(const std::vector<TripRecord>& observed,
                             const std::set<std::string>& targets, const std::set<int>& zones);

// The hotness order restricted to one vehicle's unobserved zones and
// re-ranked from 1, for evaluating hotness as a standalone method.
RankingTable hotness_individual_ranking(const HotnessTable& hotness,
                                        const std::vector<int>& unobserved_zones,
                                        const std::string& vehicle);

// Shared rank-sum combination: sums the two ranks per zone, resolves sum
// collisions by probing upward (+1 until free) over zones in ascending id
// order, then re-ranks the distinct sums from 1. Both inputs must cover
// exactly the same zones.
RankingTable combine_rank_tables(const std::map<int, int>& a, const std::map<int, int>& b,
                                 const std::string& vehicle, const std::string& kind);

// Embedding ranks combined with the population hotness ranks.
RankingTable combined_ranking(const RankingTable& embedding, const HotnessTable& hotness);

// Flat artifact format: vehicle_id,zone_id,rank_kind,rank.
void write_rankings(std::ostream& out, const std::vector<RankingTable>& tables);
std::vector<RankingTable> read_rankings(std::istream& in);

}  // namespace pdpfkg

#include "pdpfkg/ranking.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

namespace pdpfkg {

namespace {

// Strict-less ranking of (score, zone) pairs sorted ascending: equal scores
// share the rank of their first occurrence.
std::map<int, int> strict_less_ranks(std::vector<std::pair<double, int>> scored) {
    std::sort(scored.begin(), scored.end());
    std::map<int, int> ranks;
    int current_rank = 1;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (i > 0 && scored[i].first != scored[i - 1].first)
            current_rank = static_cast<int>(i) + 1;
        ranks[scored[i].second] = current_rank;
    }
    return ranks;
}

}  // namespace

RankingTable embedding_ranking(const EmbeddingModel& model, const TripKnowledgeGraph& graph,
                               const std::string& vehicle) {
    if (model.graph_hash() != graph.content_hash())
        throw PipelineError("model was trained on a different graph than the one provided");
    const int relation = graph.core_relation(vehicle);
    const auto veh_idx = graph.entity_index(EntityKind::vehicle, vehicle);
    if (!veh_idx) throw DataError("vehicle '" + vehicle + "' is not in the graph");

    std::vector<std::pair<double, int>> scored;
    for (const int z : graph.unobserved_zones(vehicle)) {
        const auto zone_idx = graph.entity_index(EntityKind::zone, std::to_string(z));
        if (!zone_idx) throw DataError("zone " + std::to_string(z) + " is not in the graph");
        const Triple t{*veh_idx, relation, *zone_idx};
        scored.emplace_back(triple_distance(model, t), z);
    }
    RankingTable table;
    table.vehicle_id = vehicle;
    table.kind = "embedding";
    table.ranks = strict_less_ranks(std::move(scored));
    return table;
}

HotnessTable hotness_ranking(const std::vector<TripRecord>& observed,
                             const std::set<std::string>& targets, const std::set<int>& zones) {
    HotnessTable table;
    for (const int z : zones) table.counts[z] = 0;
    for (const auto& r : observed) {
        if (!targets.count(r.vehicle_id)) continue;
        auto it = table.counts.find(r.tzone);
        if (it == table.counts.end())
            throw DataError("observed destination zone " + std::to_string(r.tzone) +
                            " is outside the zone universe");
        ++it->second;
    }
    std::vector<std::pair<long long, int>> order;  // (-count, zone) ascending
    order.reserve(table.counts.size());
    for (const auto& [zone, count] : table.counts) order.emplace_back(-count, zone);
    std::sort(order.begin(), order.end());
    for (std::size_t i = 0; i < order.size(); ++i)
        table.ranks[order[i].second] = static_cast<int>(i) + 1;
    return table;
}

RankingTable hotness_individual_ranking(const HotnessTable& hotness,
                                        const std::vector<int>& unobserved_zones,
                                        const std::string& vehicle) {
    std::vector<std::pair<int, int>> order;  // (global rank, zone)
    order.reserve(unobserved_zones.size());
    for (const int z : unobserved_zones) {
        auto it = hotness.ranks.find(z);
        if (it == hotness.ranks.end())
            throw DataError("zone " + std::to_string(z) + " missing from the hotness table");
        order.emplace_back(it->second, z);
    }
    std::sort(order.begin(), order.end());
    RankingTable table;
    table.vehicle_id = vehicle;
    table.kind = "hotness";
    for (std::size_t i = 0; i < order.size(); ++i)
        table.ranks[order[i].second] = static_cast<int>(i) + 1;
    return table;
}

RankingTable combine_rank_tables(const std::map<int, int>& a, const std::map<int, int>& b,
                                 const std::string& vehicle, const std::string& kind) {
    if (a.size() != b.size())
        throw DataError("rank combination requires matching zone domains for '" + vehicle + "'");
    std::set<int> used;
    std::map<int, int> sums;
    for (const auto& [zone, rank_a] : a) {  // ascending zone id
        auto it = b.find(zone);
        if (it == b.end())
            throw DataError("rank combination requires matching zone domains for '" + vehicle +
                            "'");
        int sum = rank_a + it->second;
        while (used.count(sum)) ++sum;  // probe upward until the slot is free
        used.insert(sum);
        sums[zone] = sum;
    }
    std::vector<std::pair<double, int>> scored;
    scored.reserve(sums.size());
    for (const auto& [zone, sum] : sums) scored.emplace_back(static_cast<double>(sum), zone);
    RankingTable table;
    table.vehicle_id = vehicle;
    table.kind = kind;
    table.ranks = strict_less_ranks(std::move(scored));
    return table;
}

RankingTable combined_ranking(const RankingTable& embedding, const HotnessTable& hotness) {
    std::map<int, int> hot;
    for (const auto& [zone, rank] : embedding.ranks) {
        auto it = hotness.ranks.find(zone);
        if (it == hotness.ranks.end())
            throw DataError("zone " + std::to_string(zone) + " missing from the hotness table");
        hot[zone] = it->second;
    }
    return combine_rank_tables(embedding.ranks, hot, embedding.vehicle_id, "combined");
}

void write_rankings(std::ostream& out, const std::vector<RankingTable>& tables) {
    out << "vehicle_id,zone_id,rank_kind,rank\n";
    for (const auto& t : tables)
        for (const auto& [zone, rank] : t.ranks)
            out << t.vehicle_id << ',' << zone << ',' << t.kind << ',' << rank << '\n';
}

std::vector<RankingTable> read_rankings(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("ranking input is empty (missing header)");
    std::vector<RankingTable> tables;
    std::map<std::pair<std::string, std::string>, std::size_t> index;  // (vehicle, kind)
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 4)
            throw DataError("rankings line " + std::to_string(lineno) + ": expected 4 fields");
        const std::string vehicle = trim(fields[0]);
        const std::string kind = trim(fields[2]);
        int zone = 0, rank = 0;
        try {
            zone = std::stoi(fields[1]);
            rank = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw DataError("rankings line " + std::to_string(lineno) + ": malformed number");
        }
        if (rank < 1)
            throw DataError("rankings line " + std::to_string(lineno) + ": rank below 1");
        const auto key = std::make_pair(vehicle, kind);
        auto it = index.find(key);
        if (it == index.end()) {
            index.emplace(key, tables.size());
            tables.push_back({vehicle, kind, {}, false});
            it = index.find(key);
        }
        tables[it->second].ranks[zone] = rank;
    }
    return tables;
}

}  // namespace pdpfkg

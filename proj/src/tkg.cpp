#include "pdpfkg/tkg.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>

namespace pdpfkg {

std::vector<PoiRow> read_poi(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("poi input is empty (missing header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "zone_id,poi_label")
        throw DataError("poi header must be 'zone_id,poi_label', got '" + line + "'");
    std::vector<PoiRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 2)
            throw DataError("poi line " + std::to_string(lineno) + ": expected 2 fields");
        PoiRow row;
        try {
            row.zone = std::stoi(fields[0]);
        } catch (const std::exception&) {
            throw DataError("poi line " + std::to_string(lineno) + ": malformed zone id");
        }
        row.label = trim(fields[1]);
        if (row.label.empty())
            throw DataError("poi line " + std::to_string(lineno) + ": empty label");
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_poi(std::ostream& out, const std::vector<PoiRow>& rows) {
    out << "zone_id,poi_label\n";
    for (const auto& r : rows) out << r.zone << ',' << r.label << '\n';
}

std::string entity_kind_label(EntityKind k) {
    switch (k) {
        case EntityKind::vehicle: return "vehicle";
        case EntityKind::day: return "day";
        case EntityKind::time: return "time";
        case EntityKind::zone: return "zone";
        case EntityKind::poi: return "poi";
    }
    throw std::logic_error("unreachable entity kind");
}

std::string relation_kind_label(RelationKind k) {
    switch (k) {
        case RelationKind::choose_destination: return "choose_destination";
        case RelationKind::trip_origin: return "trip_origin";
        case RelationKind::trip_time: return "trip_time";
        case RelationKind::trip_day: return "trip_day";
        case RelationKind::has_poi: return "has_poi";
    }
    throw std::logic_error("unreachable relation kind");
}

EntityKind entity_kind_from_label(const std::string& label) {
    if (label == "vehicle") return EntityKind::vehicle;
    if (label == "day") return EntityKind::day;
    if (label == "time") return EntityKind::time;
    if (label == "zone") return EntityKind::zone;
    if (label == "poi") return EntityKind::poi;
    throw DataError("unknown entity kind '" + label + "'");
}

RelationKind relation_kind_from_label(const std::string& label) {
    if (label == "choose_destination") return RelationKind::choose_destination;
    if (label == "trip_origin") return RelationKind::trip_origin;
    if (label == "trip_time") return RelationKind::trip_time;
    if (label == "trip_day") return RelationKind::trip_day;
    if (label == "has_poi") return RelationKind::has_poi;
    throw DataError("unknown relation kind '" + label + "'");
}

namespace {

void check_key(const std::string& key, const char* what) {
    if (key.empty()) throw DataError(std::string(what) + " key is empty");
    for (const char c : key)
        if (c == '\t' || c == '\n' || c == '\r')
            throw DataError(std::string(what) + " key contains whitespace control characters: '" +
                            key + "'");
}

std::string canonical_poi_label(const std::string& raw) {
    return to_lower(trim(raw));
}

}  // namespace

int TripKnowledgeGraph::intern_entity(EntityKind kind, const std::string& key) {
    auto it = entity_index_.find(Entity{kind, key});
    if (it == entity_index_.end()) throw std::logic_error("entity not pre-registered: " + key);
    return it->second;
}

int TripKnowledgeGraph::intern_relation(RelationKind kind, const std::string& owner) {
    auto it = relation_index_.find(Relation{kind, owner});
    if (it == relation_index_.end()) throw std::logic_error("relation not pre-registered");
    return it->second;
}

TripKnowledgeGraph TripKnowledgeGraph::build(const std::vector<TripRecord>& observed,
                                             const std::vector<PoiRow>& poi_table,
                                             const TemporalConfig& temporal,
                                             const std::set<int>& zone_universe,
                                             const std::set<std::string>& target_vehicles,
                                             const GraphOptions& options, BuildStats* stats) {
    temporal.validate();
    if (zone_universe.empty()) throw ConfigError("zone universe is empty");

    BuildStats local_stats;
    std::vector<const TripRecord*> kept;
    kept.reserve(observed.size());
    for (const auto& r : observed) {
        if (!target_vehicles.count(r.vehicle_id)) {
            ++local_stats.skipped_foreign_vehicle;
            continue;
        }
        if (!zone_universe.count(r.fzone) || !zone_universe.count(r.tzone))
            throw DataError("trip references a zone outside the zone universe");
        kept.push_back(&r);
    }

    std::vector<PoiRow> poi;
    if (!options.core_only) {
        std::set<std::pair<int, std::string>> seen;
        for (const auto& row : poi_table) {
            if (!zone_universe.count(row.zone))
                throw DataError("poi table references unknown zone " + std::to_string(row.zone));
            const std::string label = canonical_poi_label(row.label);
            check_key(label, "poi");
            if (!seen.emplace(row.zone, label).second) {
                ++local_stats.duplicate_poi_rows;
                continue;
            }
            poi.push_back({row.zone, label});
        }
    }

    // Pass 1: collect the entity and relation universes so indices can be
    // assigned by canonical order, independent of record order.
    std::set<Entity> entity_set;
    std::set<Relation> relation_set;
    for (const int z : zone_universe) entity_set.insert({EntityKind::zone, std::to_string(z)});
    for (const TripRecord* r : kept) {
        check_key(r->vehicle_id, "vehicle");
        entity_set.insert({EntityKind::vehicle, r->vehicle_id});
        const std::string owner = options.private_relations ? r->vehicle_id : std::string();
        relation_set.insert({RelationKind::choose_destination, owner});
        if (!options.core_only) {
            relation_set.insert({RelationKind::trip_origin, owner});
            relation_set.insert({RelationKind::trip_time, owner});
            relation_set.insert({RelationKind::trip_day, ""});
            entity_set.insert({EntityKind::time, map_time_span(r->ftime, temporal)});
            entity_set.insert(
                {EntityKind::day, day_nature_label(map_day_nature(r->date, temporal))});
        }
    }
    for (const auto& row : poi) {
        entity_set.insert({EntityKind::poi, row.label});
        relation_set.insert({RelationKind::has_poi, ""});
    }

    TripKnowledgeGraph g;
    g.zones_ = zone_universe;
    g.private_relations_ = options.private_relations;
    g.entities_.assign(entity_set.begin(), entity_set.end());
    g.relations_.assign(relation_set.begin(), relation_set.end());
    for (std::size_t i = 0; i < g.entities_.size(); ++i)
        g.entity_index_[g.entities_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < g.relations_.size(); ++i)
        g.relation_index_[g.relations_[i]] = static_cast<int>(i);

    // Pass 2: emit triples with set semantics.
    std::set<Triple> triple_set;
    for (const TripRecord* r : kept) {
        const int veh = g.intern_entity(EntityKind::vehicle, r->vehicle_id);
        const std::string owner = options.private_relations ? r->vehicle_id : std::string();
        triple_set.insert({veh, g.intern_relation(RelationKind::choose_destination, owner),
                           g.intern_entity(EntityKind::zone, std::to_string(r->tzone))});
        if (options.core_only) continue;
        triple_set.insert({veh, g.intern_relation(RelationKind::trip_origin, owner),
                           g.intern_entity(EntityKind::zone, std::to_string(r->fzone))});
        triple_set.insert({veh, g.intern_relation(RelationKind::trip_time, owner),
                           g.intern_entity(EntityKind::time, map_time_span(r->ftime, temporal))});
        triple_set.insert(
            {veh, g.intern_relation(RelationKind::trip_day, ""),
             g.intern_entity(EntityKind::day,
                             day_nature_label(map_day_nature(r->date, temporal)))});
    }
    for (const auto& row : poi) {
        triple_set.insert({g.intern_entity(EntityKind::zone, std::to_string(row.zone)),
                           g.intern_relation(RelationKind::has_poi, ""),
                           g.intern_entity(EntityKind::poi, row.label)});
    }
    g.triples_.assign(triple_set.begin(), triple_set.end());
    g.finalize();
    if (stats) *stats = local_stats;
    return g;
}

void TripKnowledgeGraph::finalize() {
    core_triples_.clear();
    for (std::size_t i = 0; i < triples_.size(); ++i) {
        const auto& t = triples_[i];
        if (relations_.at(t.relation).kind != RelationKind::choose_destination) continue;
        core_triples_[entities_.at(t.head).key].push_back(i);
    }
}

std::optional<int> TripKnowledgeGraph::entity_index(EntityKind kind,
                                                    const std::string& key) const {
    auto it = entity_index_.find(Entity{kind, key});
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> TripKnowledgeGraph::relation_index(RelationKind kind,
                                                      const std::string& owner) const {
    auto it = relation_index_.find(Relation{kind, owner});
    if (it == relation_index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> TripKnowledgeGraph::vehicles() const {
    std::vector<std::string> out;
    out.reserve(core_triples_.size());
    for (const auto& [vehicle, triples] : core_triples_) {
        (void)triples;
        out.push_back(vehicle);
    }
    return out;
}

std::set<int> TripKnowledgeGraph::observed_destinations(const std::string& vehicle) const {
    auto it = core_triples_.find(vehicle);
    if (it == core_triples_.end())
        throw DataError("vehicle '" + vehicle + "' has no destination-choice relation");
    std::set<int> out;
    for (const std::size_t pos : it->second)
        out.insert(std::stoi(entities_.at(triples_[pos].tail).key));
    return out;
}

std::vector<int> TripKnowledgeGraph::unobserved_zones(const std::string& vehicle) const {
    const std::set<int> observed = observed_destinations(vehicle);
    std::vector<int> out;
    out.reserve(zones_.size() - observed.size());
    for (const int z : zones_)
        if (!observed.count(z)) out.push_back(z);
    return out;
}

int TripKnowledgeGraph::core_relation(const std::string& vehicle) const {
    if (!core_triples_.count(vehicle))
        throw DataError("vehicle '" + vehicle + "' has no destination-choice relation");
    const auto idx = private_relations_
                         ? relation_index(RelationKind::choose_destination, vehicle)
                         : relation_index(RelationKind::choose_destination, "");
    if (!idx) throw DataError("vehicle '" + vehicle + "' has no destination-choice relation");
    return *idx;
}

GraphStats TripKnowledgeGraph::stats() const {
    GraphStats s;
    s.entity_count = entities_.size();
    s.relation_count = relations_.size();
    for (const auto& kind :
         {RelationKind::choose_destination, RelationKind::trip_origin, RelationKind::trip_time,
          RelationKind::trip_day, RelationKind::has_poi})
        s.triples_by_kind[relation_kind_label(kind)] = 0;
    for (const auto& t : triples_) {
        const RelationKind kind = relations_.at(t.relation).kind;
        ++s.triples_by_kind[relation_kind_label(kind)];
        if (kind == RelationKind::has_poi)
            ++s.poi_triples;
        else
            ++s.trip_triples;
    }
    s.total_triples = triples_.size();
    return s;
}

void TripKnowledgeGraph::dump(std::ostream& out) const {
    out << "# tkg v1\n";
    out << "zones";
    for (const int z : zones_) out << ' ' << z;
    out << '\n';
    out << "private " << (private_relations_ ? 1 : 0) << '\n';
    for (const auto& t : triples_) {
        const Entity& h = entities_.at(t.head);
        const Relation& r = relations_.at(t.relation);
        const Entity& tl = entities_.at(t.tail);
        out << entity_kind_label(h.kind) << ':' << h.key << '\t' << relation_kind_label(r.kind);
        if (!r.owner.empty()) out << ':' << r.owner;
        out << '\t' << entity_kind_label(tl.kind) << ':' << tl.key << '\n';
    }
}

TripKnowledgeGraph TripKnowledgeGraph::load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "# tkg v1")
        throw DataError("graph dump: missing '# tkg v1' header");
    if (!std::getline(in, line) || line.rfind("zones", 0) != 0)
        throw DataError("graph dump: missing zones line");

    TripKnowledgeGraph g;
    {
        std::istringstream zs(line.substr(5));
        int z = 0;
        while (zs >> z) g.zones_.insert(z);
        if (g.zones_.empty()) throw DataError("graph dump: empty zone universe");
    }
    if (!std::getline(in, line) || line.rfind("private ", 0) != 0)
        throw DataError("graph dump: missing private flag line");
    g.private_relations_ = trim(line.substr(8)) == "1";

    struct RawTriple {
        Entity head;
        Relation rel;
        Entity tail;
    };
    const auto parse_entity = [](const std::string& token) {
        const auto colon = token.find(':');
        if (colon == std::string::npos)
            throw DataError("graph dump: malformed entity token '" + token + "'");
        return Entity{entity_kind_from_label(token.substr(0, colon)), token.substr(colon + 1)};
    };

    std::vector<RawTriple> raw;
    int lineno = 3;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cols = split_fields(line, '\t');
        if (cols.size() != 3)
            throw DataError("graph dump line " + std::to_string(lineno) +
                            ": expected 3 tab-separated columns");
        RawTriple t;
        t.head = parse_entity(cols[0]);
        const auto colon = cols[1].find(':');
        if (colon == std::string::npos)
            t.rel = Relation{relation_kind_from_label(cols[1]), ""};
        else
            t.rel = Relation{relation_kind_from_label(cols[1].substr(0, colon)),
                             cols[1].substr(colon + 1)};
        t.tail = parse_entity(cols[2]);
        raw.push_back(std::move(t));
    }

    std::set<Entity> entity_set;
    std::set<Relation> relation_set;
    for (const int z : g.zones_) entity_set.insert({EntityKind::zone, std::to_string(z)});
    for (const auto& t : raw) {
        entity_set.insert(t.head);
        entity_set.insert(t.tail);
        relation_set.insert(t.rel);
    }
    g.entities_.assign(entity_set.begin(), entity_set.end());
    g.relations_.assign(relation_set.begin(), relation_set.end());
    for (std::size_t i = 0; i < g.entities_.size(); ++i)
        g.entity_index_[g.entities_[i]] = static_cast<int>(i);
    for (std::size_t i = 0; i < g.relations_.size(); ++i)
        g.relation_index_[g.relations_[i]] = static_cast<int>(i);

    std::set<Triple> triple_set;
    for (const auto& t : raw)
        triple_set.insert({g.entity_index_.at(t.head), g.relation_index_.at(t.rel),
                           g.entity_index_.at(t.tail)});
    g.triples_.assign(triple_set.begin(), triple_set.end());
    g.finalize();
    return g;
}

std::uint64_t TripKnowledgeGraph::content_hash() const {
    std::ostringstream out;
    dump(out);
    return fnv1a64(out.str());
}

}  // namespace pdpfkg

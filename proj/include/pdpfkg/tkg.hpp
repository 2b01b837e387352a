#pragma once
// Trip knowledge graph: entity and relation registries plus a deduplicated
// triple set built from observed trips and a POI table.
//
// Relation kinds choose_destination / trip_origin / trip_time are
// instantiated privately per vehicle by default, so each such relation has a
// single head entity (the owning vehicle) regardless of data scale; trip_day
// and has_poi are shared.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pdpfkg/common.hpp"
#include "pdpfkg/trip_data.hpp"

namespace pdpfkg {

enum class EntityKind { vehicle, day, time, zone, poi };
enum class RelationKind { choose_destination, trip_origin, trip_time, trip_day, has_poi };

std::string entity_kind_label(EntityKind k);
std::string relation_kind_label(RelationKind k);
EntityKind entity_kind_from_label(const std::string& label);
RelationKind relation_kind_from_label(const std::string& label);

struct Entity {
    EntityKind kind{};
    std::string key;

    bool operator==(const Entity&) const = default;
    auto operator<=>(const Entity&) const = default;
};

struct Relation {
    RelationKind kind{};
    std::string owner;  // owning vehicle id; empty for shared relations

    bool operator==(const Relation&) const = default;
    auto operator<=>(const Relation&) const = default;
};

struct Triple {
    int head = 0;
    int relation = 0;
    int tail = 0;

    bool operator==(const Triple&) const = default;
    auto operator<=>(const Triple&) const = default;
};

struct PoiRow {
    int zone = 0;
    std::string label;
};

// Flat table format: zone_id,poi_label.
std::vector<PoiRow> read_poi(std::istream& in);
void write_poi(std::ostream& out, const std::vector<PoiRow>& rows);

struct GraphOptions {
    // When false, the three per-vehicle relation kinds collapse into one
    // shared relation each (ablation: shared vs private relations).
    bool private_relations = true;
    // When true, only choose_destination triples are built (ablation:
    // contribution of the non-core schema).
    bool core_only = false;
};

struct BuildStats {
    std::size_t skipped_foreign_vehicle = 0;  // records whose vehicle is outside the target set
    std::size_t duplicate_poi_rows = 0;
};

struct GraphStats {
    std::size_t entity_count = 0;
    std::size_t relation_count = 0;
    std::map<std::string, std::size_t> triples_by_kind;
    std::size_t trip_triples = 0;  // all kinds except has_poi
    std::size_t poi_triples = 0;
    std::size_t total_triples = 0;
};

class TripKnowledgeGraph {
public:
    // Indices are assigned by canonical sort (entities by kind then key,
    // relations by kind then owner), so rebuilding from equal inputs yields
    // identical registries.
    static TripKnowledgeGraph build(const std::vector<TripRecord>& observed,
                                    const std::vector<PoiRow>& poi_table,
                                    const TemporalConfig& temporal,
                                    const std::set<int>& zone_universe,
                                    const std::set<std::string>& target_vehicles,
                                    const GraphOptions& options = {},
                                    BuildStats* stats = nullptr);

    std::size_t num_entities() const { return entities_.size(); }
    std::size_t num_relations() const { return relations_.size(); }
    const std::vector<Entity>& entities() const { return entities_; }
    const std::vector<Relation>& relations() const { return relations_; }
    const std::vector<Triple>& triples() const { return triples_; }
    const std::set<int>& zones() const { return zones_; }

    std::optional<int> entity_index(EntityKind kind, const std::string& key) const;
    std::optional<int> relation_index(RelationKind kind, const std::string& owner) const;
    const Entity& entity(int index) const { return entities_.at(index); }
    const Relation& relation(int index) const { return relations_.at(index); }

    // Vehicles owning at least one choose_destination triple, sorted.
    std::vector<std::string> vehicles() const;

    // Destination zones the vehicle chose during the observation window.
    std::set<int> observed_destinations(const std::string& vehicle) const;

    // Complement of the observed destinations within the zone universe.
    // Throws DataError for vehicles without a choose_destination relation.
    std::vector<int> unobserved_zones(const std::string& vehicle) const;

    // The vehicle's choose_destination relation (shared one when built with
    // private_relations = false).
    int core_relation(const std::string& vehicle) const;

    GraphStats stats() const;

    // Line-oriented text format: header, zone universe, then one triple per
    // line as head_kind:key <tab> relation_kind[:owner] <tab> tail_kind:key.
    void dump(std::ostream& out) const;
    static TripKnowledgeGraph load(std::istream& in);

    // FNV-1a over the dump text; binds checkpoints to the exact graph.
    std::uint64_t content_hash() const;

private:
    int intern_entity(EntityKind kind, const std::string& key);
    int intern_relation(RelationKind kind, const std::string& owner);
    void finalize();

    std::vector<Entity> entities_;
    std::vector<Relation> relations_;
    std::vector<Triple> triples_;  // sorted, unique
    std::map<Entity, int> entity_index_;
    std::map<Relation, int> relation_index_;
    std::set<int> zones_;
    bool private_relations_ = true;
    // vehicle -> positions of its core triples in triples_
    std::map<std::string, std::vector<std::size_t>> core_triples_;

    friend struct GraphBuilder;
};

}  // namespace pdpfkg

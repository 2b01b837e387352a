// Pipeline driver: stages from raw trip records to evaluation reports, plus
// reference methods and a synthetic population generator. Every stage writes
// its artifacts and a manifest (input hashes, resolved settings) into the
// configured output directory; re-running a stage with unchanged inputs
// reproduces its artifacts byte for byte.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pdpfkg/baselines.hpp"
#include "pdpfkg/config.hpp"
#include "pdpfkg/embedding.hpp"
#include "pdpfkg/evaluation.hpp"
#include "pdpfkg/ranking.hpp"
#include "pdpfkg/synth.hpp"
#include "pdpfkg/tkg.hpp"
#include "pdpfkg/trip_data.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pdpfkg;

namespace {

constexpr const char* kToolVersion = "1.0.0";

// ---------------------------------------------------------------- utilities

std::string read_file_or_throw(const fs::path& path, const std::string& missing_hint) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (!missing_hint.empty())
            throw PipelineError("missing artifact '" + path.string() + "'; " + missing_hint);
        throw DataError("cannot open '" + path.string() + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string file_hash(const fs::path& path, const std::string& missing_hint = "") {
    return hash_hex(fnv1a64(read_file_or_throw(path, missing_hint)));
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw DataError("write failed for '" + path.string() + "'");
}

// Shared state resolved from the config file and global flags.
struct Ctx {
    ConfigFile cfg;
    fs::path out_dir;
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;

    fs::path artifact(const std::string& name) const { return out_dir / name; }
};

Ctx make_ctx(const std::string& config_path, std::optional<std::uint64_t> seed,
             std::optional<int> threads) {
    Ctx ctx;
    ctx.cfg = ConfigFile::parse_file(config_path);
    if (!ctx.cfg.has("paths", "output_dir"))
        throw ConfigError("config needs paths.output_dir");
    ctx.out_dir = ctx.cfg.get_or("paths", "output_dir", "");
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) throw ConfigError("cannot create output_dir '" + ctx.out_dir.string() + "'");
    ctx.seed_override = seed;
    ctx.threads_override = threads;
    return ctx;
}

void write_manifest(const Ctx& ctx, const std::string& stage, json body) {
    body["stage"] = stage;
    body["tool_version"] = kToolVersion;
    write_file(ctx.artifact(stage + ".manifest.json"), body.dump(2) + "\n");
}

std::vector<std::string> parse_list(const std::string& csv) {
    std::vector<std::string> items;
    for (const auto& field : split_fields(csv, ',')) {
        const std::string item = trim(field);
        if (!item.empty()) items.push_back(item);
    }
    return items;
}

// ------------------------------------------------------ config file readers

std::set<int> zone_universe(const Ctx& ctx) {
    if (!ctx.cfg.has("zones", "universe"))
        throw ConfigError("config needs zones.universe (e.g. \"1..40\")");
    const auto zones = ConfigFile::parse_zone_list(ctx.cfg.get_or("zones", "universe", ""));
    if (zones.empty()) throw ConfigError("zones.universe is empty");
    return {zones.begin(), zones.end()};
}

ObservationSplit read_split(const Ctx& ctx) {
    for (const char* key : {"observe_begin", "observe_end", "future_begin", "future_end"})
        if (!ctx.cfg.has("split", key))
            throw ConfigError(std::string("config needs split.") + key);
    ObservationSplit split;
    split.observe_begin = parse_date(ctx.cfg.get_or("split", "observe_begin", ""));
    split.observe_end = parse_date(ctx.cfg.get_or("split", "observe_end", ""));
    split.future_begin = parse_date(ctx.cfg.get_or("split", "future_begin", ""));
    split.future_end = parse_date(ctx.cfg.get_or("split", "future_end", ""));
    split.validate();
    return split;
}

TemporalConfig read_temporal(const Ctx& ctx) {
    TemporalConfig temporal = TemporalConfig::defaults();
    if (ctx.cfg.has("temporal", "spans")) {
        temporal.spans.clear();
        // label=HH:MM-HH:MM entries separated by semicolons; 24:00 ends the day.
        for (const auto& entry : split_fields(ctx.cfg.get_or("temporal", "spans", ""), ';')) {
            const std::string item = trim(entry);
            if (item.empty()) continue;
            const auto eq = item.find('=');
            const auto dash = item.find('-', eq == std::string::npos ? 0 : eq);
            if (eq == std::string::npos || dash == std::string::npos)
                throw ConfigError("temporal.spans entry '" + item +
                                  "' is not label=HH:MM-HH:MM");
            TimeSpan span;
            span.label = trim(item.substr(0, eq));
            span.start = parse_time_of_day(trim(item.substr(eq + 1, dash - eq - 1)));
            const std::string end = trim(item.substr(dash + 1));
            span.end = end == "24:00" ? 86400 : parse_time_of_day(end);
            temporal.spans.push_back(std::move(span));
        }
    }
    if (ctx.cfg.has("temporal", "holidays"))
        for (const auto& d : parse_list(ctx.cfg.get_or("temporal", "holidays", "")))
            temporal.holidays.insert(day_number(parse_date(d)));
    temporal.validate();
    return temporal;
}

FilterThresholds read_filter(const Ctx& ctx) {
    FilterThresholds t;
    if (ctx.cfg.has("filter", "max_trip_count"))
        t.max_trip_count = ctx.cfg.get_int("filter", "max_trip_count", 0);
    if (ctx.cfg.has("filter", "min_trip_count"))
        t.min_trip_count = ctx.cfg.get_int("filter", "min_trip_count", 0);
    if (ctx.cfg.has("filter", "min_entropy_fraction"))
        t.min_entropy_fraction = ctx.cfg.get_double("filter", "min_entropy_fraction", 0);
    return t;
}

TrainConfig read_train(const Ctx& ctx) {
    TrainConfig cfg;
    const auto& c = ctx.cfg;
    cfg.dim = static_cast<int>(c.get_int("train", "dim", cfg.dim));
    cfg.margin = c.get_double("train", "margin", cfg.margin);
    cfg.learning_rate = c.get_double("train", "learning_rate", cfg.learning_rate);
    cfg.batch_size = static_cast<int>(c.get_int("train", "batch_size", cfg.batch_size));
    cfg.epochs = static_cast<int>(c.get_int("train", "epochs", cfg.epochs));
    cfg.seed = static_cast<std::uint64_t>(
        c.get_int("train", "seed", static_cast<std::int64_t>(cfg.seed)));
    cfg.norm = distance_norm_from_label(c.get_or("train", "norm", distance_norm_label(cfg.norm)));
    cfg.poi_balancing = poi_balancing_from_label(
        c.get_or("train", "poi_balancing", poi_balancing_label(cfg.poi_balancing)));
    cfg.negative_sampling = negative_sampling_from_label(
        c.get_or("train", "negative_sampling", negative_sampling_label(cfg.negative_sampling)));
    cfg.pretrain_epochs =
        static_cast<int>(c.get_int("train", "pretrain_epochs", cfg.pretrain_epochs));
    cfg.orthogonality_penalty =
        c.get_double("train", "orthogonality_penalty", cfg.orthogonality_penalty);
    cfg.threads = static_cast<int>(c.get_int("train", "threads", cfg.threads));
    cfg.early_stop_fraction =
        c.get_double("train", "early_stop_fraction", cfg.early_stop_fraction);
    cfg.early_stop_patience =
        static_cast<int>(c.get_int("train", "early_stop_patience", cfg.early_stop_patience));
    if (ctx.seed_override) cfg.seed = *ctx.seed_override;
    if (ctx.threads_override) cfg.threads = *ctx.threads_override;
    cfg.validate();
    return cfg;
}

json train_config_json(const TrainConfig& cfg) {
    return {{"dim", cfg.dim},
            {"margin", cfg.margin},
            {"learning_rate", cfg.learning_rate},
            {"batch_size", cfg.batch_size},
            {"epochs", cfg.epochs},
            {"seed", cfg.seed},
            {"norm", distance_norm_label(cfg.norm)},
            {"poi_balancing", poi_balancing_label(cfg.poi_balancing)},
            {"negative_sampling", negative_sampling_label(cfg.negative_sampling)},
            {"pretrain_epochs", cfg.pretrain_epochs},
            {"orthogonality_penalty", cfg.orthogonality_penalty},
            {"threads", cfg.threads},
            {"early_stop_fraction", cfg.early_stop_fraction},
            {"early_stop_patience", cfg.early_stop_patience}};
}

SynthConfig read_synth(const Ctx& ctx) {
    SynthConfig cfg;
    const auto& c = ctx.cfg;
    cfg.num_individuals =
        static_cast<int>(c.get_int("synth", "num_individuals", cfg.num_individuals));
    cfg.num_zones = static_cast<int>(c.get_int("synth", "num_zones", cfg.num_zones));
    cfg.num_groups = static_cast<int>(c.get_int("synth", "num_groups", cfg.num_groups));
    cfg.zones_per_group_affinity = static_cast<int>(
        c.get_int("synth", "zones_per_group_affinity", cfg.zones_per_group_affinity));
    cfg.trips_mean = c.get_double("synth", "trips_mean", cfg.trips_mean);
    cfg.trips_dispersion = c.get_double("synth", "trips_dispersion", cfg.trips_dispersion);
    cfg.observation_days =
        static_cast<int>(c.get_int("synth", "observation_days", cfg.observation_days));
    cfg.future_days = static_cast<int>(c.get_int("synth", "future_days", cfg.future_days));
    cfg.exploration_rate = c.get_double("synth", "exploration_rate", cfg.exploration_rate);
    cfg.noise_rate = c.get_double("synth", "noise_rate", cfg.noise_rate);
    cfg.seed = static_cast<std::uint64_t>(
        c.get_int("synth", "seed", static_cast<std::int64_t>(cfg.seed)));
    if (ctx.seed_override) cfg.seed = *ctx.seed_override;
    cfg.validate();
    return cfg;
}

GraphOptions read_graph_options(const Ctx& ctx) {
    GraphOptions options;
    options.private_relations =
        ctx.cfg.get_bool("graph", "private_relations", options.private_relations);
    options.core_only = ctx.cfg.get_bool("graph", "core_only", options.core_only);
    return options;
}

// ------------------------------------------------------- artifact shorthand

std::vector<TripRecord> load_trips(const fs::path& path, const std::set<int>& zones,
                                   const std::string& missing_hint) {
    std::istringstream in(read_file_or_throw(path, missing_hint));
    return parse_trips(in, zones);
}

std::vector<IndividualProfile> load_profiles(const Ctx& ctx) {
    std::istringstream in(read_file_or_throw(ctx.artifact("profiles.csv"),
                                             "run the ingest stage first"));
    return read_profiles(in);
}

TripKnowledgeGraph load_graph(const Ctx& ctx) {
    std::istringstream in(read_file_or_throw(ctx.artifact("graph.tkg"),
                                             "run the build-graph stage first"));
    return TripKnowledgeGraph::load(in);
}

void save_rankings(const Ctx& ctx, const std::string& kind,
                   const std::vector<RankingTable>& tables) {
    std::ostringstream out;
    write_rankings(out, tables);
    write_file(ctx.artifact("rankings_" + kind + ".csv"), out.str());
}

std::set<std::string> profile_vehicles(const std::vector<IndividualProfile>& profiles) {
    std::set<std::string> ids;
    for (const auto& p : profiles) ids.insert(p.vehicle_id);
    return ids;
}

// ------------------------------------------------------------------- stages

int cmd_synth(const Ctx& ctx) {
    const SynthConfig cfg = read_synth(ctx);
    const SynthOutput out = generate(cfg);

    std::vector<TripRecord> all = out.observed;
    all.insert(all.end(), out.future.begin(), out.future.end());
    std::stable_sort(all.begin(), all.end(), [](const TripRecord& a, const TripRecord& b) {
        if (a.vehicle_id != b.vehicle_id) return a.vehicle_id < b.vehicle_id;
        if (day_number(a.date) != day_number(b.date))
            return day_number(a.date) < day_number(b.date);
        return a.ftime < b.ftime;
    });

    {
        std::ostringstream s;
        write_trips(s, all);
        write_file(ctx.artifact("trips.csv"), s.str());
    }
    {
        std::ostringstream s;
        write_poi(s, out.poi);
        write_file(ctx.artifact("poi.csv"), s.str());
    }
    {
        std::ostringstream s;
        write_coords(s, out.coords);
        write_file(ctx.artifact("coords.csv"), s.str());
    }
    {
        std::ostringstream s;
        s << "vehicle_id,group\n";
        for (const auto& [vehicle, group] : out.group_of) s << vehicle << ',' << group << '\n';
        write_file(ctx.artifact("groups.csv"), s.str());
    }
    {
        // Ready-to-run pipeline config pointing at the generated files.
        std::ostringstream s;
        s << "[paths]\n"
          << "trips = " << ctx.artifact("trips.csv").string() << "\n"
          << "poi = " << ctx.artifact("poi.csv").string() << "\n"
          << "coords = " << ctx.artifact("coords.csv").string() << "\n"
          << "output_dir = " << ctx.out_dir.string() << "\n\n"
          << "[zones]\n"
          << "universe = 1.." << cfg.num_zones << "\n\n"
          << "[split]\n"
          << "observe_begin = " << format_date(out.split.observe_begin) << "\n"
          << "observe_end = " << format_date(out.split.observe_end) << "\n"
          << "future_begin = " << format_date(out.split.future_begin) << "\n"
          << "future_end = " << format_date(out.split.future_end) << "\n";
        write_file(ctx.artifact("pipeline.ini"), s.str());
    }

    json groups = json::array();
    for (const auto& zones : out.group_zones) groups.push_back(zones);
    write_manifest(
        ctx, "synth",
        {{"config",
          {{"num_individuals", cfg.num_individuals},
           {"num_zones", cfg.num_zones},
           {"num_groups", cfg.num_groups},
           {"zones_per_group_affinity", cfg.zones_per_group_affinity},
           {"trips_mean", cfg.trips_mean},
           {"trips_dispersion", cfg.trips_dispersion},
           {"observation_days", cfg.observation_days},
           {"future_days", cfg.future_days},
           {"exploration_rate", cfg.exploration_rate},
           {"noise_rate", cfg.noise_rate},
           {"seed", cfg.seed}}},
         {"group_zones", groups},
         {"outputs",
          {{"trips", {{"path", "trips.csv"}, {"hash", file_hash(ctx.artifact("trips.csv"))}}},
           {"poi", {{"path", "poi.csv"}, {"hash", file_hash(ctx.artifact("poi.csv"))}}},
           {"coords",
            {{"path", "coords.csv"}, {"hash", file_hash(ctx.artifact("coords.csv"))}}}}},
         {"counts",
          {{"observed_records", out.observed.size()},
           {"future_records", out.future.size()},
           {"individuals", out.group_of.size()}}}});
    std::cout << "synth: " << all.size() << " records for " << out.group_of.size()
              << " individuals -> " << ctx.out_dir.string() << "\n";
    return 0;
}

int cmd_ingest(const Ctx& ctx) {
    if (!ctx.cfg.has("paths", "trips")) throw ConfigError("config needs paths.trips");
    const fs::path trips_path = ctx.cfg.get_or("paths", "trips", "");
    const std::set<int> zones = zone_universe(ctx);
    const ObservationSplit split = read_split(ctx);
    const FilterThresholds thresholds = read_filter(ctx);

    std::istringstream in(read_file_or_throw(trips_path, ""));
    const std::vector<TripRecord> records = parse_trips(in, zones);
    const SplitResult windows = split_periods(records, split);
    const std::vector<IndividualProfile> profiles =
        build_profiles(windows.observed, windows.future);
    const FilterResult filtered = filter_low_predictability(profiles, thresholds);

    {
        std::ostringstream s;
        write_trips(s, windows.observed);
        write_file(ctx.artifact("observed.csv"), s.str());
    }
    {
        std::ostringstream s;
        write_trips(s, windows.future);
        write_file(ctx.artifact("future.csv"), s.str());
    }
    {
        std::ostringstream s;
        write_profiles(s, filtered.selected);
        write_file(ctx.artifact("profiles.csv"), s.str());
    }

    json rejected = json::object();
    for (const auto& [predicate, count] : filtered.rejected_by) rejected[predicate] = count;
    write_manifest(
        ctx, "ingest",
        {{"inputs", {{"trips", {{"path", trips_path.string()}, {"hash", file_hash(trips_path)}}}}},
         {"config",
          {{"observe_begin", format_date(split.observe_begin)},
           {"observe_end", format_date(split.observe_end)},
           {"future_begin", format_date(split.future_begin)},
           {"future_end", format_date(split.future_end)},
           {"zone_count", zones.size()}}},
         {"counts",
          {{"parsed", records.size()},
           {"observed", windows.observed.size()},
           {"future", windows.future.size()},
           {"discarded", windows.discarded},
           {"profiles", profiles.size()},
           {"selected", filtered.selected.size()},
           {"rejected_by", rejected}}},
         {"outputs",
          {{"observed",
            {{"path", "observed.csv"}, {"hash", file_hash(ctx.artifact("observed.csv"))}}},
           {"future", {{"path", "future.csv"}, {"hash", file_hash(ctx.artifact("future.csv"))}}},
           {"profiles",
            {{"path", "profiles.csv"}, {"hash", file_hash(ctx.artifact("profiles.csv"))}}}}}});
    std::cout << "ingest: " << windows.observed.size() << " observed / " << windows.future.size()
              << " future records, " << filtered.selected.size() << " of " << profiles.size()
              << " individuals selected\n";
    return 0;
}

int cmd_build_graph(const Ctx& ctx) {
    const std::set<int> zones = zone_universe(ctx);
    const TemporalConfig temporal = read_temporal(ctx);
    const GraphOptions options = read_graph_options(ctx);
    const std::vector<TripRecord> observed =
        load_trips(ctx.artifact("observed.csv"), zones, "run the ingest stage first");
    const std::vector<IndividualProfile> profiles = load_profiles(ctx);
    const std::set<std::string> targets = profile_vehicles(profiles);

    std::vector<PoiRow> poi;
    std::string poi_hash;
    if (ctx.cfg.has("paths", "poi")) {
        const fs::path poi_path = ctx.cfg.get_or("paths", "poi", "");
        std::istringstream in(read_file_or_throw(poi_path, ""));
        poi = read_poi(in);
        poi_hash = file_hash(poi_path);
    }

    BuildStats build_stats;
    const TripKnowledgeGraph graph =
        TripKnowledgeGraph::build(observed, poi, temporal, zones, targets, options, &build_stats);
    {
        std::ostringstream s;
        graph.dump(s);
        write_file(ctx.artifact("graph.tkg"), s.str());
    }

    const GraphStats stats = graph.stats();
    json by_kind = json::object();
    for (const auto& [kind, count] : stats.triples_by_kind) by_kind[kind] = count;
    json inputs = {
        {"observed",
         {{"path", "observed.csv"}, {"hash", file_hash(ctx.artifact("observed.csv"))}}},
        {"profiles",
         {{"path", "profiles.csv"}, {"hash", file_hash(ctx.artifact("profiles.csv"))}}}};
    if (!poi_hash.empty())
        inputs["poi"] = {{"path", ctx.cfg.get_or("paths", "poi", "")}, {"hash", poi_hash}};
    write_manifest(ctx, "build_graph",
                   {{"inputs", inputs},
                    {"config",
                     {{"private_relations", options.private_relations},
                      {"core_only", options.core_only}}},
                    {"stats",
                     {{"entities", stats.entity_count},
                      {"relations", stats.relation_count},
                      {"triples_by_kind", by_kind},
                      {"trip_triples", stats.trip_triples},
                      {"poi_triples", stats.poi_triples},
                      {"total_triples", stats.total_triples},
                      {"skipped_foreign_vehicle", build_stats.skipped_foreign_vehicle},
                      {"duplicate_poi_rows", build_stats.duplicate_poi_rows}}},
                    {"outputs",
                     {{"graph",
                       {{"path", "graph.tkg"},
                        {"hash", file_hash(ctx.artifact("graph.tkg"))},
                        {"content_hash", hash_hex(graph.content_hash())}}}}}});
    std::cout << "build-graph: " << stats.entity_count << " entities, " << stats.relation_count
              << " relations, " << stats.total_triples << " triples\n";
    return 0;
}

int cmd_train(const Ctx& ctx) {
    const TrainConfig cfg = read_train(ctx);
    const TripKnowledgeGraph graph = load_graph(ctx);
    const auto [model, reports] = train(graph, cfg);

    {
        std::ostringstream s;
        model.save(s);
        write_file(ctx.artifact("model.bin"), s.str());
    }
    {
        std::ostringstream s;
        write_train_log(s, reports);
        write_file(ctx.artifact("train_log.csv"), s.str());
    }

    const LossReport& last = reports.back();
    write_manifest(
        ctx, "train",
        {{"inputs",
          {{"graph",
            {{"path", "graph.tkg"},
             {"hash", file_hash(ctx.artifact("graph.tkg"))},
             {"content_hash", hash_hex(graph.content_hash())}}}}},
         {"config", train_config_json(cfg)},
         {"result",
          {{"epochs_run", reports.size()},
           {"final_mean_loss", last.mean_loss},
           {"final_satisfied_fraction", last.satisfied_fraction}}},
         {"outputs",
          {{"model",
            {{"path", "model.bin"},
             {"hash", file_hash(ctx.artifact("model.bin"))},
             {"content_hash", hash_hex(model.content_hash())}}},
           {"train_log",
            {{"path", "train_log.csv"}, {"hash", file_hash(ctx.artifact("train_log.csv"))}}}}}});
    std::cout << "train: " << reports.size() << " epochs, final mean loss "
              << format_double(last.mean_loss) << ", satisfied fraction "
              << format_double(last.satisfied_fraction) << "\n";
    return 0;
}

int cmd_rank(const Ctx& ctx) {
    const std::set<int> zones = zone_universe(ctx);
    const TripKnowledgeGraph graph = load_graph(ctx);
    std::istringstream model_in(read_file_or_throw(ctx.artifact("model.bin"),
                                                   "run the train stage first"));
    const EmbeddingModel model = EmbeddingModel::load(model_in, graph.content_hash(), true);
    const std::vector<TripRecord> observed =
        load_trips(ctx.artifact("observed.csv"), zones, "run the ingest stage first");
    const std::vector<IndividualProfile> profiles = load_profiles(ctx);

    std::vector<std::string> methods = {"embedding", "hotness", "combined"};
    if (ctx.cfg.has("rank", "methods"))
        methods = parse_list(ctx.cfg.get_or("rank", "methods", ""));
    for (const auto& m : methods)
        if (m != "embedding" && m != "hotness" && m != "combined")
            throw ConfigError("rank.methods: unknown method '" + m + "'");

    const HotnessTable hotness = hotness_ranking(observed, profile_vehicles(profiles), zones);
    {
        std::ostringstream s;
        s << "zone_id,count,rank\n";
        for (const auto& [zone, count] : hotness.counts)
            s << zone << ',' << count << ',' << hotness.ranks.at(zone) << '\n';
        write_file(ctx.artifact("hotness.csv"), s.str());
    }

    std::vector<RankingTable> embedding_tables, hotness_tables, combined_tables;
    for (const auto& p : profiles) {
        const RankingTable emb = embedding_ranking(model, graph, p.vehicle_id);
        embedding_tables.push_back(emb);
        hotness_tables.push_back(hotness_individual_ranking(
            hotness, graph.unobserved_zones(p.vehicle_id), p.vehicle_id));
        combined_tables.push_back(combined_ranking(emb, hotness));
    }

    json outputs = {{"hotness",
                     {{"path", "hotness.csv"}, {"hash", file_hash(ctx.artifact("hotness.csv"))}}}};
    for (const auto& m : methods) {
        if (m == "embedding") save_rankings(ctx, m, embedding_tables);
        if (m == "hotness") save_rankings(ctx, m, hotness_tables);
        if (m == "combined") save_rankings(ctx, m, combined_tables);
        const std::string name = "rankings_" + m + ".csv";
        outputs[m] = {{"path", name}, {"hash", file_hash(ctx.artifact(name))}};
    }

    write_manifest(ctx, "rank",
                   {{"inputs",
                     {{"graph",
                       {{"path", "graph.tkg"},
                        {"hash", file_hash(ctx.artifact("graph.tkg"))},
                        {"content_hash", hash_hex(graph.content_hash())}}},
                      {"model",
                       {{"path", "model.bin"},
                        {"hash", file_hash(ctx.artifact("model.bin"))},
                        {"content_hash", hash_hex(model.content_hash())}}}}},
                    {"config", {{"methods", methods}}},
                    {"outputs", outputs}});
    std::cout << "rank: wrote " << methods.size() << " table set(s) for " << profiles.size()
              << " individuals\n";
    return 0;
}

int cmd_baseline(const Ctx& ctx) {
    const std::set<int> zones = zone_universe(ctx);
    const std::vector<IndividualProfile> profiles = load_profiles(ctx);
    const std::vector<TripRecord> observed =
        load_trips(ctx.artifact("observed.csv"), zones, "run the ingest stage first");

    std::vector<std::string> methods = {"rc"};
    if (ctx.cfg.has("baseline", "methods"))
        methods = parse_list(ctx.cfg.get_or("baseline", "methods", ""));

    std::uint64_t rc_seed = static_cast<std::uint64_t>(ctx.cfg.get_int("baseline", "rc_seed", 1));
    std::uint64_t md_seed = static_cast<std::uint64_t>(ctx.cfg.get_int("baseline", "md_seed", 1));
    if (ctx.seed_override) rc_seed = md_seed = *ctx.seed_override;
    const int md_rank = static_cast<int>(ctx.cfg.get_int("baseline", "md_rank", 8));
    const int md_als_iterations =
        static_cast<int>(ctx.cfg.get_int("baseline", "md_als_iterations", 100));
    const int cf_k = static_cast<int>(ctx.cfg.get_int("baseline", "cf_k", 20));
    const double epr_bin_width = ctx.cfg.get_double("baseline", "epr_bin_width_meters", 1000.0);

    // Shared inputs, built lazily.
    std::optional<VisitMatrix> matrix;
    const auto visit_matrix = [&]() -> const VisitMatrix& {
        if (!matrix) matrix = build_visit_matrix(profiles, zones);
        return *matrix;
    };
    std::optional<std::map<int, ZoneCoord>> coords;
    const auto coord_table = [&]() -> const std::map<int, ZoneCoord>& {
        if (!coords) {
            if (!ctx.cfg.has("paths", "coords"))
                throw ConfigError("config needs paths.coords for the jump-size methods");
            std::istringstream in(read_file_or_throw(ctx.cfg.get_or("paths", "coords", ""), ""));
            coords = read_coords(in);
        }
        return *coords;
    };
    std::optional<std::vector<TripRecord>> future;
    const auto future_records = [&]() -> const std::vector<TripRecord>& {
        if (!future)
            future = load_trips(ctx.artifact("future.csv"), zones, "run the ingest stage first");
        return *future;
    };

    json outputs = json::object();
    for (const auto& m : methods) {
        std::vector<RankingTable> tables;
        if (m == "rc") {
            for (const auto& p : profiles) {
                std::vector<int> unobserved;
                for (const int z : zones)
                    if (!p.observed_destinations.count(z)) unobserved.push_back(z);
                tables.push_back(random_ranking(p.vehicle_id, unobserved, rc_seed));
            }
        } else if (m == "md_uv" || m == "md_qr" || m == "md_svd") {
            const MdMethod method = m == "md_uv"   ? MdMethod::uv
                                    : m == "md_qr" ? MdMethod::qr
                                                   : MdMethod::svd;
            tables = md_ranking(visit_matrix(), method, md_rank, md_seed, md_als_iterations);
        } else if (m == "cf_user" || m == "cf_item") {
            tables = cf_ranking(visit_matrix(), m == "cf_user" ? CfMode::user : CfMode::item,
                                cf_k);
        } else if (m == "epr" || m == "pepr") {
            const JumpSizeDistribution j =
                jump_size_distribution(observed, coord_table(), epr_bin_width);
            const HotnessTable hotness =
                hotness_ranking(observed, profile_vehicles(profiles), zones);
            tables = epr_event_rankings(profiles, future_records(), zones, j, coord_table(),
                                        m == "pepr" ? &hotness : nullptr);
        } else {
            throw ConfigError("baseline.methods: unknown method '" + m + "'");
        }
        save_rankings(ctx, m, tables);
        const std::string name = "rankings_" + m + ".csv";
        outputs[m] = {{"path", name}, {"hash", file_hash(ctx.artifact(name))}};
    }

    write_manifest(ctx, "baseline",
                   {{"inputs",
                     {{"observed",
                       {{"path", "observed.csv"},
                        {"hash", file_hash(ctx.artifact("observed.csv"))}}},
                      {"profiles",
                       {{"path", "profiles.csv"},
                        {"hash", file_hash(ctx.artifact("profiles.csv"))}}}}},
                    {"config",
                     {{"methods", methods},
                      {"rc_seed", rc_seed},
                      {"md_rank", md_rank},
                      {"md_seed", md_seed},
                      {"md_als_iterations", md_als_iterations},
                      {"cf_k", cf_k},
                      {"epr_bin_width_meters", epr_bin_width}}},
                    {"outputs", outputs}});
    std::cout << "baseline: wrote " << methods.size() << " method table set(s)\n";
    return 0;
}

int cmd_evaluate(const Ctx& ctx) {
    const std::set<int> zones = zone_universe(ctx);
    const std::vector<IndividualProfile> profiles = load_profiles(ctx);

    std::vector<std::string> kinds = {"combined"};
    if (ctx.cfg.has("evaluate", "tables"))
        kinds = parse_list(ctx.cfg.get_or("evaluate", "tables", ""));
    const int support = static_cast<int>(
        ctx.cfg.get_int("evaluate", "support", static_cast<std::int64_t>(zones.size())));
    std::vector<int> k_list = {3, 5, 8};
    if (ctx.cfg.has("evaluate", "k_list")) {
        k_list.clear();
        for (const auto& k : parse_list(ctx.cfg.get_or("evaluate", "k_list", "")))
            k_list.push_back(static_cast<int>(std::stoll(k)));
    }
    const double h_bin_width = ctx.cfg.get_double("evaluate", "h_bin_width", 2.0);
    const std::string rho_label = to_lower(ctx.cfg.get_or("evaluate", "rho_support", "full"));
    if (rho_label != "full" && rho_label != "nonzero")
        throw ConfigError("evaluate.rho_support must be 'full' or 'nonzero'");
    const RhoSupport rho_support =
        rho_label == "full" ? RhoSupport::full : RhoSupport::nonzero;

    // Provenance carried through from the stage that produced the tables.
    json upstream = json::object();
    for (const char* producer : {"rank", "baseline"}) {
        const fs::path manifest_path = ctx.artifact(std::string(producer) + ".manifest.json");
        std::ifstream in(manifest_path);
        if (!in) continue;
        try {
            upstream[producer] = json::parse(in).value("inputs", json::object());
        } catch (const json::exception&) {
            throw DataError("unreadable manifest '" + manifest_path.string() + "'");
        }
    }

    json inputs = {{"profiles",
                    {{"path", "profiles.csv"}, {"hash", file_hash(ctx.artifact("profiles.csv"))}}}};
    json results = json::object();
    for (const auto& kind : kinds) {
        const std::string name = "rankings_" + kind + ".csv";
        std::istringstream in(read_file_or_throw(
            ctx.artifact(name), "run the rank or baseline stage that produces '" + kind + "'"));
        const std::vector<RankingTable> tables = read_rankings(in);
        const std::vector<PairRank> pairs = potential_pair_ranks(tables, profiles);
        const EvalReport report = evaluate(kind, pairs, support, k_list, rho_support);
        const DistributionU u = aggregate_U(pairs, support);
        const DistributionH h = individual_H(pairs, h_bin_width);

        {
            std::ostringstream s;
            write_distribution_u(s, u);
            write_file(ctx.artifact("u_" + kind + ".csv"), s.str());
        }
        {
            std::ostringstream s;
            write_distribution_h(s, h);
            write_file(ctx.artifact("h_" + kind + ".csv"), s.str());
        }
        {
            std::ostringstream s;
            write_value_rank_table(s, u);
            write_file(ctx.artifact("value_rank_" + kind + ".csv"), s.str());
        }
        {
            std::ostringstream s;
            write_eval_report(s, report);
            write_file(ctx.artifact("report_" + kind + ".txt"), s.str());
        }

        inputs[kind] = {{"path", name}, {"hash", file_hash(ctx.artifact(name))}};
        json concentration = json::object();
        for (const auto& [k, v] : report.concentration)
            concentration["k" + std::to_string(k)] = v;
        results[kind] = {{"pair_count", report.pair_count},
                         {"individual_count", report.individual_count},
                         {"empty", report.empty},
                         {"rho", report.rho},
                         {"rho_degenerate", report.rho_degenerate},
                         {"confusion", report.confusion},
                         {"concentration", concentration},
                         {"mean_rank", report.mean_rank}};
        std::cout << "evaluate[" << kind << "]: pairs " << report.pair_count << ", rho "
                  << format_double(report.rho) << ", confusion " << report.confusion
                  << ", mean rank " << format_double(report.mean_rank) << "\n";
    }

    write_manifest(ctx, "evaluate",
                   {{"inputs", inputs},
                    {"upstream", upstream},
                    {"config",
                     {{"tables", kinds},
                      {"support", support},
                      {"k_list", k_list},
                      {"h_bin_width", h_bin_width},
                      {"rho_support", rho_support == RhoSupport::full ? "full" : "nonzero"}}},
                    {"results", results}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Trip-knowledge-graph pipeline: ingest trip records, build the graph, train the "
        "embedding, rank unobserved zones, and evaluate against future trips."};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    app.add_option("--config", config_path, "Pipeline configuration file (INI)")
        ->required();
    app.add_option("--seed", seed, "Override the invoked stage's seed(s)");
    app.add_option("--threads", threads, "Override the training thread count");

    int (*handler)(const Ctx&) = nullptr;
    app.add_subcommand("synth", "Generate a synthetic population with planted group structure")
        ->callback([&] { handler = cmd_synth; });
    app.add_subcommand("ingest", "Parse, window-split, profile, and select individuals")
        ->callback([&] { handler = cmd_ingest; });
    app.add_subcommand("build-graph", "Assemble the trip knowledge graph")
        ->callback([&] { handler = cmd_build_graph; });
    app.add_subcommand("train", "Train the graph embedding")
        ->callback([&] { handler = cmd_train; });
    app.add_subcommand("rank", "Rank each individual's unobserved zones")
        ->callback([&] { handler = cmd_rank; });
    app.add_subcommand("baseline", "Run the reference ranking methods")
        ->callback([&] { handler = cmd_baseline; });
    app.add_subcommand("evaluate", "Aggregate rankings and compute the metrics")
        ->callback([&] { handler = cmd_evaluate; });

    CLI11_PARSE(app, argc, argv);

    try {
        return handler(make_ctx(config_path, seed, threads));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

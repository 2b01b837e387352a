#include "pdpfkg/embedding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace pdpfkg {

std::string distance_norm_label(DistanceNorm v) {
    return v == DistanceNorm::l1 ? "l1" : "l2";
}

std::string poi_balancing_label(PoiBalancing v) {
    switch (v) {
        case PoiBalancing::augment: return "augment";
        case PoiBalancing::pretrain: return "pretrain";
        case PoiBalancing::off: return "off";
    }
    throw std::logic_error("unreachable poi balancing");
}

std::string negative_sampling_label(NegativeSampling v) {
    switch (v) {
        case NegativeSampling::off: return "off";
        case NegativeSampling::random_replacement: return "random_replacement";
        case NegativeSampling::controlled_replacement: return "controlled_replacement";
    }
    throw std::logic_error("unreachable negative sampling");
}

DistanceNorm distance_norm_from_label(const std::string& s) {
    if (s == "l1") return DistanceNorm::l1;
    if (s == "l2") return DistanceNorm::l2;
    throw ConfigError("unknown distance norm '" + s + "' (expected l1 or l2)");
}

PoiBalancing poi_balancing_from_label(const std::string& s) {
    if (s == "augment") return PoiBalancing::augment;
    if (s == "pretrain") return PoiBalancing::pretrain;
    if (s == "off") return PoiBalancing::off;
    throw ConfigError("unknown poi balancing '" + s + "'");
}

NegativeSampling negative_sampling_from_label(const std::string& s) {
    if (s == "off") return NegativeSampling::off;
    if (s == "random_replacement") return NegativeSampling::random_replacement;
    if (s == "controlled_replacement") return NegativeSampling::controlled_replacement;
    throw ConfigError("unknown negative sampling mode '" + s + "'");
}

void TrainConfig::validate() const {
    if (dim <= 0) throw ConfigError("embedding dim must be positive");
    if (margin <= 0) throw ConfigError("margin must be positive");
    if (learning_rate <= 0) throw ConfigError("learning rate must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (epochs < 0) throw ConfigError("epoch count must be nonnegative");
    if (pretrain_epochs < 0) throw ConfigError("pretrain epoch count must be nonnegative");
    if (threads < 1) throw ConfigError("thread count must be at least 1");
    if (early_stop_patience < 1) throw ConfigError("early stop patience must be at least 1");
}

EmbeddingModel::EmbeddingModel(int dim, std::size_t num_entities, std::size_t num_relations,
                               std::uint64_t graph_hash, DistanceNorm norm)
    : dim_(dim),
      num_entities_(num_entities),
      num_relations_(num_relations),
      graph_hash_(graph_hash),
      norm_(norm),
      entities_(num_entities * static_cast<std::size_t>(dim), 0.0),
      translations_(num_relations * static_cast<std::size_t>(dim), 0.0),
      normals_(num_relations * static_cast<std::size_t>(dim), 0.0) {
    if (dim <= 0) throw ConfigError("embedding dim must be positive");
}

std::span<double> EmbeddingModel::entity_vec(int i) {
    return {entities_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}
std::span<const double> EmbeddingModel::entity_vec(int i) const {
    return {entities_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}
std::span<double> EmbeddingModel::rel_translation(int i) {
    return {translations_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
}
std::span<const double> EmbeddingModel::rel_translation(int i) const {
    return {translations_.data() + static_cast<std::size_t>(i) * dim_,
            static_cast<std::size_t>(dim_)};
}
std::span<double> EmbeddingModel::rel_normal(int i) {
    return {normals_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}
std::span<const double> EmbeddingModel::rel_normal(int i) const {
    return {normals_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
}

bool EmbeddingModel::all_finite() const {
    const auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(entities_) && ok(translations_) && ok(normals_);
}

double EmbeddingModel::max_normal_norm_error() const {
    double worst = 0.0;
    for (std::size_t r = 0; r < num_relations_; ++r) {
        double ss = 0.0;
        for (int k = 0; k < dim_; ++k) {
            const double x = normals_[r * dim_ + k];
            ss += x * x;
        }
        worst = std::max(worst, std::abs(std::sqrt(ss) - 1.0));
    }
    return worst;
}

namespace {

constexpr char kModelMagic[8] = {'T', 'K', 'G', 'E', 'M', '0', '0', '1'};

template <class T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw DataError("model checkpoint is truncated");
    return value;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!in) throw DataError("model checkpoint is truncated");
}

}  // namespace

void EmbeddingModel::save(std::ostream& out) const {
    out.write(kModelMagic, sizeof(kModelMagic));
    write_pod(out, static_cast<std::uint32_t>(dim_));
    write_pod(out, static_cast<std::uint8_t>(norm_ == DistanceNorm::l1 ? 1 : 2));
    write_pod(out, graph_hash_);
    write_pod(out, static_cast<std::uint64_t>(num_entities_));
    write_pod(out, static_cast<std::uint64_t>(num_relations_));
    write_doubles(out, entities_);
    write_doubles(out, translations_);
    write_doubles(out, normals_);
}

EmbeddingModel EmbeddingModel::load(std::istream& in, std::uint64_t expected_graph_hash,
                                    bool check_hash) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
        throw DataError("not a model checkpoint (bad magic)");
    const auto dim = read_pod<std::uint32_t>(in);
    const auto norm_byte = read_pod<std::uint8_t>(in);
    const auto graph_hash = read_pod<std::uint64_t>(in);
    const auto n_entities = read_pod<std::uint64_t>(in);
    const auto n_relations = read_pod<std::uint64_t>(in);
    if (dim == 0 || dim > (1u << 20)) throw DataError("model checkpoint has invalid dim");
    if (norm_byte != 1 && norm_byte != 2)
        throw DataError("model checkpoint has invalid distance norm");
    if (check_hash && graph_hash != expected_graph_hash)
        throw PipelineError("model checkpoint was trained on a different graph (hash " +
                            hash_hex(graph_hash) + ", expected " + hash_hex(expected_graph_hash) +
                            ")");
    EmbeddingModel m(static_cast<int>(dim), n_entities, n_relations, graph_hash,
                     norm_byte == 1 ? DistanceNorm::l1 : DistanceNorm::l2);
    read_doubles(in, m.entities_);
    read_doubles(in, m.translations_);
    read_doubles(in, m.normals_);
    return m;
}

std::uint64_t EmbeddingModel::content_hash() const {
    std::ostringstream out;
    save(out);
    return fnv1a64(out.str());
}

EmbeddingModel init_model(const TripKnowledgeGraph& graph, const TrainConfig& cfg) {
    cfg.validate();
    EmbeddingModel m(cfg.dim, graph.num_entities(), graph.num_relations(), graph.content_hash(),
                     cfg.norm);
    Rng rng(cfg.seed);
    const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
    const auto draw = [&](std::span<double> row) {
        for (auto& x : row) x = (2.0 * uniform01(rng) - 1.0) * bound;
    };
    for (std::size_t i = 0; i < graph.num_entities(); ++i) draw(m.entity_vec(static_cast<int>(i)));
    for (std::size_t i = 0; i < graph.num_relations(); ++i)
        draw(m.rel_translation(static_cast<int>(i)));
    for (std::size_t i = 0; i < graph.num_relations(); ++i) {
        auto row = m.rel_normal(static_cast<int>(i));
        double ss = 0.0;
        do {
            draw(row);
            ss = std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
        } while (ss == 0.0);
        const double inv = 1.0 / std::sqrt(ss);
        for (auto& x : row) x *= inv;
    }
    return m;
}

std::vector<double> project(std::span<const double> v, std::span<const double> w) {
    if (v.size() != w.size()) throw std::invalid_argument("projection dimension mismatch");
    const double ww = std::inner_product(w.begin(), w.end(), w.begin(), 0.0);
    if (std::abs(std::sqrt(ww) - 1.0) > 1e-9)
        throw std::invalid_argument("projection requires a unit normal vector");
    const double wv = std::inner_product(w.begin(), w.end(), v.begin(), 0.0);
    std::vector<double> out(v.begin(), v.end());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] -= wv * w[k];
    return out;
}

namespace {

// distance of head + translation - tail after removing the normal component;
// treats w as a free parameter (no unit check) so the same code backs both
// evaluation and gradient steps.
double raw_distance(std::span<const double> h, std::span<const double> t,
                    std::span<const double> r, std::span<const double> w, DistanceNorm norm,
                    double* gap /* scratch, dim-sized */) {
    const std::size_t dim = h.size();
    double wd = 0.0;  // w . (h - t)
    for (std::size_t k = 0; k < dim; ++k) wd += w[k] * (h[k] - t[k]);
    double dist = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double g = (h[k] - t[k]) - wd * w[k] + r[k];
        gap[k] = g;
        dist += norm == DistanceNorm::l2 ? g * g : std::abs(g);
    }
    return norm == DistanceNorm::l2 ? std::sqrt(dist) : dist;
}

// Gradients of the raw distance with respect to h, t, r, w. `gap` must hold
// the residual vector produced by raw_distance for the same inputs.
void raw_distance_grads(std::span<const double> h, std::span<const double> t,
                        std::span<const double> w, DistanceNorm norm, const double* gap,
                        double dist, double* gh, double* gt, double* gr, double* gw) {
    const std::size_t dim = h.size();
    std::vector<double> u(dim, 0.0);
    if (norm == DistanceNorm::l2) {
        if (dist > 0)
            for (std::size_t k = 0; k < dim; ++k) u[k] = gap[k] / dist;
    } else {
        for (std::size_t k = 0; k < dim; ++k)
            u[k] = gap[k] > 0 ? 1.0 : (gap[k] < 0 ? -1.0 : 0.0);
    }
    double wu = 0.0, wd = 0.0, ud = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        wu += w[k] * u[k];
        wd += w[k] * (h[k] - t[k]);
        ud += u[k] * (h[k] - t[k]);
    }
    (void)ud;
    for (std::size_t k = 0; k < dim; ++k) {
        const double ge = u[k] - wu * w[k];
        gh[k] = ge;
        gt[k] = -ge;
        gr[k] = u[k];
        gw[k] = -(wu * (h[k] - t[k]) + wd * u[k]);
    }
}

enum MatrixId { kEntities = 0, kTranslations = 1, kNormals = 2 };

using GradMap = std::map<std::pair<int, int>, std::vector<double>>;

void add_grad(GradMap& grads, int matrix, int row, const double* g, int dim, double scale) {
    auto [it, inserted] = grads.try_emplace({matrix, row});
    if (inserted) it->second.assign(static_cast<std::size_t>(dim), 0.0);
    for (int k = 0; k < dim; ++k) it->second[static_cast<std::size_t>(k)] += scale * g[k];
}

struct AdamMatrix {
    std::vector<double> m, v;
    std::vector<std::int64_t> step;

    AdamMatrix(std::size_t rows, int dim)
        : m(rows * static_cast<std::size_t>(dim), 0.0),
          v(rows * static_cast<std::size_t>(dim), 0.0),
          step(rows, 0) {}
};

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

void adam_apply_row(AdamMatrix& state, std::span<double> row, int row_index,
                    const std::vector<double>& grad, double lr) {
    auto& t = state.step[static_cast<std::size_t>(row_index)];
    ++t;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t));
    const std::size_t base = static_cast<std::size_t>(row_index) * row.size();
    for (std::size_t k = 0; k < row.size(); ++k) {
        double& m = state.m[base + k];
        double& v = state.v[base + k];
        m = kBeta1 * m + (1.0 - kBeta1) * grad[k];
        v = kBeta2 * v + (1.0 - kBeta2) * grad[k] * grad[k];
        row[k] -= lr * (m / c1) / (std::sqrt(v / c2) + kEps);
    }
}

struct NegativeSampler {
    const TripKnowledgeGraph& graph;
    NegativeSampling mode;
    // entity indices grouped by kind, for controlled replacement
    std::map<EntityKind, std::vector<int>> by_entity_kind;
    std::map<RelationKind, std::vector<int>> by_relation_kind;

    explicit NegativeSampler(const TripKnowledgeGraph& g, NegativeSampling m)
        : graph(g), mode(m) {
        for (std::size_t i = 0; i < g.num_entities(); ++i)
            by_entity_kind[g.entity(static_cast<int>(i)).kind].push_back(static_cast<int>(i));
        for (std::size_t i = 0; i < g.num_relations(); ++i)
            by_relation_kind[g.relation(static_cast<int>(i)).kind].push_back(
                static_cast<int>(i));
    }

    int random_entity(Rng& rng, int exclude) const {
        if (graph.num_entities() < 2) return exclude;
        int pick = exclude;
        while (pick == exclude)
            pick = static_cast<int>(uniform_below(rng, graph.num_entities()));
        return pick;
    }

    int random_relation(Rng& rng, int exclude) const {
        if (graph.num_relations() < 2) return exclude;
        int pick = exclude;
        while (pick == exclude)
            pick = static_cast<int>(uniform_below(rng, graph.num_relations()));
        return pick;
    }

    int entity_of_other_kind(Rng& rng, EntityKind original) const {
        std::size_t candidates = 0;
        for (const auto& [kind, rows] : by_entity_kind)
            if (kind != original) candidates += rows.size();
        if (candidates == 0) return -1;
        std::uint64_t pick = uniform_below(rng, candidates);
        for (const auto& [kind, rows] : by_entity_kind) {
            if (kind == original) continue;
            if (pick < rows.size()) return rows[pick];
            pick -= rows.size();
        }
        return -1;
    }

    int relation_of_other_kind(Rng& rng, RelationKind original) const {
        std::size_t candidates = 0;
        for (const auto& [kind, rows] : by_relation_kind)
            if (kind != original) candidates += rows.size();
        if (candidates == 0) return -1;
        std::uint64_t pick = uniform_below(rng, candidates);
        for (const auto& [kind, rows] : by_relation_kind) {
            if (kind == original) continue;
            if (pick < rows.size()) return rows[pick];
            pick -= rows.size();
        }
        return -1;
    }

    // Corrupt one slot (head, relation or tail) of the positive triple.
    Triple corrupt(Rng& rng, const Triple& pos) const {
        Triple neg = pos;
        const int slot = static_cast<int>(uniform_below(rng, 3));
        if (mode == NegativeSampling::random_replacement) {
            if (slot == 0)
                neg.head = random_entity(rng, pos.head);
            else if (slot == 1)
                neg.relation = random_relation(rng, pos.relation);
            else
                neg.tail = random_entity(rng, pos.tail);
            return neg;
        }
        // controlled replacement: the substitute's kind must differ, so the
        // corrupted triple violates the schema and is guaranteed false.
        for (int attempt = 0; attempt < 3; ++attempt) {
            const int s = (slot + attempt) % 3;
            if (s == 0) {
                const int pick = entity_of_other_kind(rng, graph.entity(pos.head).kind);
                if (pick >= 0) {
                    neg.head = pick;
                    return neg;
                }
            } else if (s == 1) {
                const int pick =
                    relation_of_other_kind(rng, graph.relation(pos.relation).kind);
                if (pick >= 0) {
                    neg.relation = pick;
                    return neg;
                }
            } else {
                const int pick = entity_of_other_kind(rng, graph.entity(pos.tail).kind);
                if (pick >= 0) {
                    neg.tail = pick;
                    return neg;
                }
            }
        }
        return neg;  // single-kind degenerate graph: leave uncorrupted
    }
};

struct BatchResult {
    GradMap grads;
    double loss_sum = 0.0;
};

}  // namespace

double triple_distance(const EmbeddingModel& model, const Triple& t, DistanceNorm norm) {
    std::vector<double> gap(static_cast<std::size_t>(model.dim()));
    return raw_distance(model.entity_vec(t.head), model.entity_vec(t.tail),
                        model.rel_translation(t.relation), model.rel_normal(t.relation), norm,
                        gap.data());
}

double positive_loss(const EmbeddingModel& model, const Triple& t, double margin,
                     DistanceNorm norm) {
    if (margin <= 0) throw ConfigError("margin must be positive");
    return std::max(0.0, triple_distance(model, t, norm) - margin);
}

double negative_sampling_loss(const EmbeddingModel& model, const Triple& pos, const Triple& neg,
                              double margin, DistanceNorm norm) {
    if (margin <= 0) throw ConfigError("margin must be positive");
    return std::max(0.0,
                    triple_distance(model, pos, norm) + margin - triple_distance(model, neg, norm));
}

PositiveLossGradient positive_loss_gradient(const EmbeddingModel& model, const Triple& t,
                                            double margin, DistanceNorm norm) {
    if (margin <= 0) throw ConfigError("margin must be positive");
    const std::size_t dim = static_cast<std::size_t>(model.dim());
    PositiveLossGradient g;
    g.head.assign(dim, 0.0);
    g.tail.assign(dim, 0.0);
    g.translation.assign(dim, 0.0);
    g.normal.assign(dim, 0.0);
    std::vector<double> gap(dim);
    const auto h = model.entity_vec(t.head);
    const auto tl = model.entity_vec(t.tail);
    const auto r = model.rel_translation(t.relation);
    const auto w = model.rel_normal(t.relation);
    const double dist = raw_distance(h, tl, r, w, norm, gap.data());
    if (dist <= margin) return g;
    raw_distance_grads(h, tl, w, norm, gap.data(), dist, g.head.data(), g.tail.data(),
                       g.translation.data(), g.normal.data());
    return g;
}

std::vector<Triple> balance_poi(const TripKnowledgeGraph& graph, PoiBalancing mode,
                                bool* coerced_off) {
    if (coerced_off) *coerced_off = false;
    std::vector<Triple> poi, trip;
    for (const auto& t : graph.triples()) {
        if (graph.relation(t.relation).kind == RelationKind::has_poi)
            poi.push_back(t);
        else
            trip.push_back(t);
    }
    std::vector<Triple> out(graph.triples());
    if (mode != PoiBalancing::augment) return out;
    if (poi.empty()) {
        if (coerced_off) *coerced_off = true;
        return out;
    }
    const std::size_t factor =
        std::max<std::size_t>(1, (trip.size() + 4 * poi.size() - 1) / (4 * poi.size()));
    for (std::size_t copy = 1; copy < factor; ++copy)
        out.insert(out.end(), poi.begin(), poi.end());
    return out;
}

namespace {

class Trainer {
public:
    Trainer(const TripKnowledgeGraph& graph, const TrainConfig& cfg)
        : graph_(graph),
          cfg_(cfg),
          model_(init_model(graph, cfg)),
          adam_entities_(graph.num_entities(), cfg.dim),
          adam_translations_(graph.num_relations(), cfg.dim),
          adam_normals_(graph.num_relations(), cfg.dim),
          rng_(cfg.seed ^ 0xd1b54a32d192ed03ull) {
        if (cfg_.negative_sampling != NegativeSampling::off)
            sampler_.emplace(graph_, cfg_.negative_sampling);
    }

    std::pair<EmbeddingModel, std::vector<LossReport>> run() {
        bool coerced = false;
        const std::vector<Triple> multiset = balance_poi(graph_, cfg_.poi_balancing, &coerced);
        if (cfg_.poi_balancing == PoiBalancing::pretrain && !coerced) {
            std::vector<Triple> poi;
            for (const auto& t : graph_.triples())
                if (graph_.relation(t.relation).kind == RelationKind::has_poi) poi.push_back(t);
            if (!poi.empty())
                run_phase(poi, cfg_.pretrain_epochs, "pretrain", /*early_stop=*/false);
        }
        run_phase(multiset, cfg_.epochs, "main", /*early_stop=*/true);
        return {std::move(model_), std::move(reports_)};
    }

private:
    void run_phase(const std::vector<Triple>& samples, int epochs, const char* phase,
                   bool early_stop) {
        if (samples.empty() || epochs == 0) return;
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        int streak = 0;
        for (int epoch = 1; epoch <= epochs; ++epoch) {
            const auto started = std::chrono::steady_clock::now();
            deterministic_shuffle(order, rng_);
            double loss_sum = 0.0;
            for (std::size_t begin = 0; begin < order.size();
                 begin += static_cast<std::size_t>(cfg_.batch_size)) {
                const std::size_t end =
                    std::min(order.size(), begin + static_cast<std::size_t>(cfg_.batch_size));
                loss_sum += run_batch(samples, order, begin, end);
            }
            LossReport report;
            report.epoch = epoch;
            report.phase = phase;
            report.mean_loss = loss_sum / static_cast<double>(samples.size());
            report.satisfied_fraction = satisfied_fraction();
            report.wall_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
            if (!std::isfinite(report.mean_loss) || !model_.all_finite())
                throw std::runtime_error("training diverged (non-finite parameter) at " +
                                         std::string(phase) + " epoch " + std::to_string(epoch));
            reports_.push_back(report);
            if (early_stop) {
                streak = report.satisfied_fraction >= cfg_.early_stop_fraction ? streak + 1 : 0;
                if (streak >= cfg_.early_stop_patience) break;
            }
        }
    }

    double run_batch(const std::vector<Triple>& samples, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end) {
        // Negatives come from the single sequential stream so parallelism
        // cannot perturb them.
        std::vector<Triple> negatives;
        if (sampler_) {
            negatives.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i)
                negatives.push_back(sampler_->corrupt(rng_, samples[order[i]]));
        }

        const int threads = std::min<int>(cfg_.threads, static_cast<int>(end - begin));
        std::vector<BatchResult> partial(static_cast<std::size_t>(std::max(threads, 1)));
        const auto worker = [&](int tid) {
            BatchResult& res = partial[static_cast<std::size_t>(tid)];
            for (std::size_t i = begin + static_cast<std::size_t>(tid); i < end;
                 i += static_cast<std::size_t>(threads)) {
                const Triple& pos = samples[order[i]];
                if (!sampler_)
                    res.loss_sum += accumulate_positive(pos, res.grads);
                else
                    res.loss_sum += accumulate_margin(pos, negatives[i - begin], res.grads);
            }
        };
        if (threads <= 1) {
            worker(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(static_cast<std::size_t>(threads));
            for (int tid = 0; tid < threads; ++tid) pool.emplace_back(worker, tid);
            for (auto& th : pool) th.join();
        }

        // Merge in thread order, then touch rows in key order: both orders are
        // fixed, so the floating-point reduction shape is reproducible.
        GradMap merged = std::move(partial[0].grads);
        double loss_sum = partial[0].loss_sum;
        for (std::size_t tid = 1; tid < partial.size(); ++tid) {
            loss_sum += partial[tid].loss_sum;
            for (auto& [key, grad] : partial[tid].grads) {
                auto [it, inserted] = merged.try_emplace(key, std::move(grad));
                if (!inserted)
                    for (std::size_t k = 0; k < it->second.size(); ++k)
                        it->second[k] += grad[k];
            }
        }

        if (cfg_.orthogonality_penalty > 0) add_orthogonality_penalty(merged);

        for (const auto& [key, grad] : merged) {
            const auto [matrix, row] = key;
            switch (matrix) {
                case kEntities:
                    adam_apply_row(adam_entities_, model_.entity_vec(row), row, grad,
                                   cfg_.learning_rate);
                    break;
                case kTranslations:
                    adam_apply_row(adam_translations_, model_.rel_translation(row), row, grad,
                                   cfg_.learning_rate);
                    break;
                case kNormals:
                    adam_apply_row(adam_normals_, model_.rel_normal(row), row, grad,
                                   cfg_.learning_rate);
                    break;
                default: throw std::logic_error("unknown parameter matrix");
            }
        }
        renormalize_normals();
        return loss_sum;
    }

    double accumulate_positive(const Triple& t, GradMap& grads) {
        const std::size_t dim = static_cast<std::size_t>(cfg_.dim);
        std::vector<double> gap(dim), gh(dim), gt(dim), gr(dim), gw(dim);
        const auto h = model_.entity_vec(t.head);
        const auto tl = model_.entity_vec(t.tail);
        const auto r = model_.rel_translation(t.relation);
        const auto w = model_.rel_normal(t.relation);
        const double dist = raw_distance(h, tl, r, w, cfg_.norm, gap.data());
        // Subgradient at the hinge point is taken as zero.
        if (dist <= cfg_.margin) return 0.0;
        raw_distance_grads(h, tl, w, cfg_.norm, gap.data(), dist, gh.data(), gt.data(), gr.data(),
                           gw.data());
        add_grad(grads, kEntities, t.head, gh.data(), cfg_.dim, 1.0);
        add_grad(grads, kEntities, t.tail, gt.data(), cfg_.dim, 1.0);
        add_grad(grads, kTranslations, t.relation, gr.data(), cfg_.dim, 1.0);
        add_grad(grads, kNormals, t.relation, gw.data(), cfg_.dim, 1.0);
        return dist - cfg_.margin;
    }

    double accumulate_margin(const Triple& pos, const Triple& neg, GradMap& grads) {
        const std::size_t dim = static_cast<std::size_t>(cfg_.dim);
        std::vector<double> gap(dim), gh(dim), gt(dim), gr(dim), gw(dim);
        const double d_pos =
            raw_distance(model_.entity_vec(pos.head), model_.entity_vec(pos.tail),
                         model_.rel_translation(pos.relation), model_.rel_normal(pos.relation),
                         cfg_.norm, gap.data());
        std::vector<double> gap_neg(dim);
        const double d_neg =
            raw_distance(model_.entity_vec(neg.head), model_.entity_vec(neg.tail),
                         model_.rel_translation(neg.relation), model_.rel_normal(neg.relation),
                         cfg_.norm, gap_neg.data());
        const double loss = d_pos + cfg_.margin - d_neg;
        if (loss <= 0) return 0.0;
        raw_distance_grads(model_.entity_vec(pos.head), model_.entity_vec(pos.tail),
                           model_.rel_normal(pos.relation), cfg_.norm, gap.data(), d_pos,
                           gh.data(), gt.data(), gr.data(), gw.data());
        add_grad(grads, kEntities, pos.head, gh.data(), cfg_.dim, 1.0);
        add_grad(grads, kEntities, pos.tail, gt.data(), cfg_.dim, 1.0);
        add_grad(grads, kTranslations, pos.relation, gr.data(), cfg_.dim, 1.0);
        add_grad(grads, kNormals, pos.relation, gw.data(), cfg_.dim, 1.0);
        raw_distance_grads(model_.entity_vec(neg.head), model_.entity_vec(neg.tail),
                           model_.rel_normal(neg.relation), cfg_.norm, gap_neg.data(), d_neg,
                           gh.data(), gt.data(), gr.data(), gw.data());
        add_grad(grads, kEntities, neg.head, gh.data(), cfg_.dim, -1.0);
        add_grad(grads, kEntities, neg.tail, gt.data(), cfg_.dim, -1.0);
        add_grad(grads, kTranslations, neg.relation, gr.data(), cfg_.dim, -1.0);
        add_grad(grads, kNormals, neg.relation, gw.data(), cfg_.dim, -1.0);
        return loss;
    }

    // Soft penalty keeping each touched relation's translation near its
    // hyperplane: weight * (w . l)^2 / ||l||^2.
    void add_orthogonality_penalty(GradMap& grads) {
        std::vector<int> touched;
        for (const auto& [key, grad] : grads) {
            (void)grad;
            if (key.first == kTranslations || key.first == kNormals)
                if (touched.empty() || touched.back() != key.second)
                    touched.push_back(key.second);
        }
        std::sort(touched.begin(), touched.end());
        touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
        const double weight = cfg_.orthogonality_penalty;
        for (const int rel : touched) {
            const auto l = model_.rel_translation(rel);
            const auto w = model_.rel_normal(rel);
            const double ll = std::inner_product(l.begin(), l.end(), l.begin(), 0.0);
            if (ll == 0.0) continue;
            const double wl = std::inner_product(w.begin(), w.end(), l.begin(), 0.0);
            std::vector<double> gw(l.size()), gl(l.size());
            for (std::size_t k = 0; k < l.size(); ++k) {
                gw[k] = weight * 2.0 * wl * l[k] / ll;
                gl[k] = weight * 2.0 * wl * (w[k] * ll - wl * l[k]) / (ll * ll);
            }
            add_grad(grads, kNormals, rel, gw.data(), cfg_.dim, 1.0);
            add_grad(grads, kTranslations, rel, gl.data(), cfg_.dim, 1.0);
        }
    }

    void renormalize_normals() {
        for (std::size_t rel = 0; rel < model_.num_relations(); ++rel) {
            auto row = model_.rel_normal(static_cast<int>(rel));
            const double ss = std::inner_product(row.begin(), row.end(), row.begin(), 0.0);
            if (ss <= 0.0) continue;
            const double inv = 1.0 / std::sqrt(ss);
            for (auto& x : row) x *= inv;
        }
    }

    double satisfied_fraction() const {
        if (graph_.triples().empty()) return 1.0;
        std::size_t ok = 0;
        std::vector<double> gap(static_cast<std::size_t>(cfg_.dim));
        for (const auto& t : graph_.triples()) {
            const double d = raw_distance(model_.entity_vec(t.head), model_.entity_vec(t.tail),
                                          model_.rel_translation(t.relation),
                                          model_.rel_normal(t.relation), cfg_.norm, gap.data());
            if (d <= cfg_.margin) ++ok;
        }
        return static_cast<double>(ok) / static_cast<double>(graph_.triples().size());
    }

    const TripKnowledgeGraph& graph_;
    TrainConfig cfg_;
    EmbeddingModel model_;
    AdamMatrix adam_entities_, adam_translations_, adam_normals_;
    Rng rng_;
    std::optional<NegativeSampler> sampler_;
    std::vector<LossReport> reports_;
};

}  // namespace

std::pair<EmbeddingModel, std::vector<LossReport>> train(const TripKnowledgeGraph& graph,
                                                         const TrainConfig& cfg) {
    cfg.validate();
    if (graph.triples().empty()) throw DataError("cannot train on an empty graph");
    Trainer trainer(graph, cfg);
    return trainer.run();
}

void write_train_log(std::ostream& out, const std::vector<LossReport>& reports) {
    // Wall times are deliberately left out so re-runs produce identical files.
    out << "phase,epoch,mean_loss,satisfied_fraction\n";
    for (const auto& r : reports)
        out << r.phase << ',' << r.epoch << ',' << format_double(r.mean_loss) << ','
            << format_double(r.satisfied_fraction) << '\n';
}

}  // namespace pdpfkg

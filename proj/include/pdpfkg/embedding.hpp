#pragma once
// Translation-on-hyperplane embedding of the trip knowledge graph.
//
// Each entity carries a vector; each relation carries a translation vector
// and a unit hyperplane normal. A triple's distance is the norm of
// project(head) + translation - project(tail), where project(v) removes the
// component of v along the relation's normal. Training minimises the
// positive-only hinge sum(max(0, distance - margin)) over observed triples;
// margin-ranking against corrupted triples is available as an ablation mode.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdpfkg/tkg.hpp"

namespace pdpfkg {

enum class DistanceNorm { l1, l2 };
enum class PoiBalancing { augment, pretrain, off };
enum class NegativeSampling { off, random_replacement, controlled_replacement };

std::string distance_norm_label(DistanceNorm v);
std::string poi_balancing_label(PoiBalancing v);
std::string negative_sampling_label(NegativeSampling v);
DistanceNorm distance_norm_from_label(const std::string& s);
PoiBalancing poi_balancing_from_label(const std::string& s);
NegativeSampling negative_sampling_from_label(const std::string& s);

struct TrainConfig {
    int dim = 148;
    double margin = 1.0;
    double learning_rate = 0.003;
    int batch_size = 1024;
    int epochs = 500;
    std::uint64_t seed = 42;
    DistanceNorm norm = DistanceNorm::l2;
    PoiBalancing poi_balancing = PoiBalancing::augment;
    NegativeSampling negative_sampling = NegativeSampling::off;
    int pretrain_epochs = 50;          // poi-only warmup length in pretrain mode
    double orthogonality_penalty = 0;  // optional soft penalty on w_r . l_r, off by default
    int threads = 1;
    // Stop once the fraction of triples within the margin stays at or above
    // this level for `early_stop_patience` consecutive epochs.
    double early_stop_fraction = 0.999;
    int early_stop_patience = 5;

    void validate() const;
};

struct LossReport {
    int epoch = 0;                    // 1-based within its phase
    std::string phase = "main";      // "pretrain" for the poi warmup epochs
    double mean_loss = 0.0;           // mean per-triple loss over the epoch
    double satisfied_fraction = 0.0;  // unique triples with distance <= margin
    double wall_seconds = 0.0;
};

class EmbeddingModel {
public:
    EmbeddingModel() = default;
    EmbeddingModel(int dim, std::size_t num_entities, std::size_t num_relations,
                   std::uint64_t graph_hash, DistanceNorm norm);

    int dim() const { return dim_; }
    std::size_t num_entities() const { return num_entities_; }
    std::size_t num_relations() const { return num_relations_; }
    std::uint64_t graph_hash() const { return graph_hash_; }
    DistanceNorm norm() const { return norm_; }

    std::span<double> entity_vec(int i);
    std::span<const double> entity_vec(int i) const;
    std::span<double> rel_translation(int i);
    std::span<const double> rel_translation(int i) const;
    std::span<double> rel_normal(int i);
    std::span<const double> rel_normal(int i) const;

    bool all_finite() const;
    // max over relations of | ||w_r|| - 1 |
    double max_normal_norm_error() const;

    void save(std::ostream& out) const;
    // Throws DataError on malformed input; PipelineError when expected_graph_hash
    // is given and differs from the stored one.
    static EmbeddingModel load(std::istream& in, std::uint64_t expected_graph_hash = 0,
                               bool check_hash = false);

    std::uint64_t content_hash() const;

private:
    int dim_ = 0;
    std::size_t num_entities_ = 0;
    std::size_t num_relations_ = 0;
    std::uint64_t graph_hash_ = 0;
    DistanceNorm norm_ = DistanceNorm::l2;
    std::vector<double> entities_;      // row-major [num_entities x dim]
    std::vector<double> translations_;  // [num_relations x dim]
    std::vector<double> normals_;       // [num_relations x dim]
};

// Vectors drawn uniformly from [-6/sqrt(dim), +6/sqrt(dim)] by the seeded
// generator; normals are then scaled to unit length.
EmbeddingModel init_model(const TripKnowledgeGraph& graph, const TrainConfig& cfg);

// v minus its component along w. Requires ||w|| = 1 within 1e-9.
std::vector<double> project(std::span<const double> v, std::span<const double> w);

double triple_distance(const EmbeddingModel& model, const Triple& t, DistanceNorm norm);
inline double triple_distance(const EmbeddingModel& model, const Triple& t) {
    return triple_distance(model, t, model.norm());
}

// max(0, distance - margin)
double positive_loss(const EmbeddingModel& model, const Triple& t, double margin,
                     DistanceNorm norm);

// max(0, d(pos) + margin - d(neg)); ablation objective only.
double negative_sampling_loss(const EmbeddingModel& model, const Triple& pos, const Triple& neg,
                              double margin, DistanceNorm norm);

// Analytic gradient of positive_loss with respect to the four parameter rows
// the triple touches (head/tail entity vectors, relation translation and
// normal). All rows are zero when the hinge is inactive. The subgradient at
// the hinge point and at L1 kinks is taken as zero, matching the training
// step.
struct PositiveLossGradient {
    std::vector<double> head, tail, translation, normal;
};
PositiveLossGradient positive_loss_gradient(const EmbeddingModel& model, const Triple& t,
                                            double margin, DistanceNorm norm);

// Training multiset under the requested poi balancing. Augment mode
// replicates poi triples ceil(|trip triples| / (4 * |poi triples|)) times;
// pretrain and off return the raw set (the pretrain warmup is scheduled by
// train). With no poi triples the mode degrades to off and *coerced_off is
// set when provided.
std::vector<Triple> balance_poi(const TripKnowledgeGraph& graph, PoiBalancing mode,
                                bool* coerced_off = nullptr);

// Mini-batch training with a row-sparse adaptive-moment optimizer
// (decay 0.9/0.999, epsilon 1e-8). Deterministic for a fixed seed and thread
// count. Throws std::runtime_error naming the epoch if parameters stop being
// finite.
std::pair<EmbeddingModel, std::vector<LossReport>> train(const TripKnowledgeGraph& graph,
                                                         const TrainConfig& cfg);

void write_train_log(std::ostream& out, const std::vector<LossReport>& reports);

}  // namespace pdpfkg

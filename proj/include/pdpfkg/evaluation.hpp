#pragma once
// Result refinement and metrics: the pooled rank distribution U, the
// per-individual mean-rank distribution H, rank correlation, confusion
// degree, and top-k concentration.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pdpfkg/ranking.hpp"
#include "pdpfkg/trip_data.hpp"

namespace pdpfkg {

// One evaluated (individual, potential destination) pair and the rank the
// method assigned to that destination.
struct PairRank {
    std::string vehicle_id;
    int zone = 0;
    int rank = 0;
};

struct DistributionU {
    // counts[i] = number of pairs whose destination was predicted at rank
    // i + 1; the support is fixed to 1..R with zero-mass ranks kept so that
    // position-based metrics stay well-defined.
    std::vector<long long> counts;
    long long sample_count = 0;

    int support() const { return static_cast<int>(counts.size()); }
    double mass(int rank_1based) const {
        return sample_count == 0
                   ? 0.0
                   : static_cast<double>(counts.at(static_cast<std::size_t>(rank_1based - 1))) /
                         static_cast<double>(sample_count);
    }
};

struct DistributionH {
    double bin_width = 2.0;
    // vehicle -> mean predicted rank of its potential destinations; only
    // individuals with at least one potential destination appear.
    std::map<std::string, double> means;
    // floor(mean / bin_width) * bin_width -> individuals in the bin
    std::map<double, std::size_t> histogram;
};

enum class RhoSupport { full, nonzero };

struct EvalReport {
    std::string kind;
    int support = 0;
    long long pair_count = 0;
    std::size_t individual_count = 0;  // individuals contributing pairs
    bool empty = false;                // no pairs anywhere: metrics undefined
    double rho = 0.0;
    bool rho_degenerate = false;  // all masses equal; rho reported as 0
    long long confusion = 0;
    std::vector<std::pair<int, double>> concentration;  // (k, top-k share)
    double mean_rank = 0.0;                             // over all pairs
};

// Joins ranking tables of one kind with each profile's potential destinations
// (future minus observed). Throws DataError when a potential destination has
// no rank in its individual's table.
std::vector<PairRank> potential_pair_ranks(const std::vector<RankingTable>& tables,
                                           const std::vector<IndividualProfile>& profiles);

DistributionU aggregate_U(const std::vector<PairRank>& pairs, int support);

DistributionH individual_H(const std::vector<PairRank>& pairs, double bin_width);

// Rank correlation between the rank positions 1..R and their masses, with
// average ranks on ties. All-equal masses are degenerate: 0 is returned and
// the flag set.
double spearman_rho(const DistributionU& u, RhoSupport support = RhoSupport::full,
                    bool* degenerate = nullptr);

// Positions sorted by descending mass, ties by ascending position: the value
// rank i' of each position i (both 1-based).
std::vector<int> value_rank_table(const DistributionU& u);

// Sum over positions of |i' - i|; zero exactly when mass is non-increasing.
long long confusion_degree(const DistributionU& u);

// Share of pairs predicted within the top k ranks; identical to pooled
// recall at k.
double concentration_degree(const DistributionU& u, int k);

EvalReport evaluate(const std::string& kind, const std::vector<PairRank>& pairs, int support,
                    const std::vector<int>& k_list, RhoSupport rho_support);

void write_distribution_u(std::ostream& out, const DistributionU& u);
void write_distribution_h(std::ostream& out, const DistributionH& h);
void write_value_rank_table(std::ostream& out, const DistributionU& u);
void write_eval_report(std::ostream& out, const EvalReport& report);

}  // namespace pdpfkg

#include "pdpfkg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace pdpfkg {

std::vector<PairRank> potential_pair_ranks(const std::vector<RankingTable>& tables,
                                           const std::vector<IndividualProfile>& profiles) {
    std::map<std::string, const RankingTable*> by_vehicle;
    for (const auto& t : tables) by_vehicle[t.vehicle_id] = &t;

    std::vector<PairRank> pairs;
    for (const auto& p : profiles) {
        const auto potential = p.potential_destinations();
        if (potential.empty()) continue;
        auto it = by_vehicle.find(p.vehicle_id);
        if (it == by_vehicle.end())
            throw DataError("no ranking table for vehicle '" + p.vehicle_id +
                            "' with potential destinations");
        for (const int z : potential) {
            auto rank_it = it->second->ranks.find(z);
            if (rank_it == it->second->ranks.end())
                throw DataError("vehicle '" + p.vehicle_id + "': potential destination " +
                                std::to_string(z) + " has no rank");
            pairs.push_back({p.vehicle_id, z, rank_it->second});
        }
    }
    return pairs;
}

DistributionU aggregate_U(const std::vector<PairRank>& pairs, int support) {
    if (support < 1) throw ConfigError("distribution support must be at least 1");
    DistributionU u;
    u.counts.assign(static_cast<std::size_t>(support), 0);
    for (const auto& p : pairs) {
        if (p.rank < 1 || p.rank > support)
            throw DataError("pair rank " + std::to_string(p.rank) +
                            " outside the distribution support 1.." + std::to_string(support));
        ++u.counts[static_cast<std::size_t>(p.rank - 1)];
        ++u.sample_count;
    }
    return u;
}

DistributionH individual_H(const std::vector<PairRank>& pairs, double bin_width) {
    if (bin_width <= 0) throw ConfigError("histogram bin width must be positive");
    DistributionH h;
    h.bin_width = bin_width;
    std::map<std::string, std::pair<long long, long long>> acc;  // vehicle -> (rank sum, count)
    for (const auto& p : pairs) {
        auto& [sum, count] = acc[p.vehicle_id];
        sum += p.rank;
        ++count;
    }
    for (const auto& [vehicle, sc] : acc) {
        const double mean = static_cast<double>(sc.first) / static_cast<double>(sc.second);
        h.means[vehicle] = mean;
        const double bin = std::floor(mean / bin_width) * bin_width;
        ++h.histogram[bin];
    }
    return h;
}

namespace {

// Average ranks (1-based) of values, standard tie handling.
std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y, bool* degenerate) {
    const std::size_t n = x.size();
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman_rho(const DistributionU& u, RhoSupport support, bool* degenerate) {
    if (degenerate) *degenerate = false;
    std::vector<double> xs, ys;
    for (int i = 1; i <= u.support(); ++i) {
        const long long c = u.counts[static_cast<std::size_t>(i - 1)];
        if (support == RhoSupport::nonzero && c == 0) continue;
        xs.push_back(static_cast<double>(i));
        ys.push_back(static_cast<double>(c));
    }
    if (xs.size() < 2) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return pearson(average_ranks(xs), average_ranks(ys), degenerate);
}

std::vector<int> value_rank_table(const DistributionU& u) {
    const int n = u.support();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (u.counts[static_cast<std::size_t>(a)] != u.counts[static_cast<std::size_t>(b)])
            return u.counts[static_cast<std::size_t>(a)] > u.counts[static_cast<std::size_t>(b)];
        return a < b;  // ties: earlier position gets the better value rank
    });
    std::vector<int> value_rank(static_cast<std::size_t>(n), 0);
    for (int pos = 0; pos < n; ++pos) value_rank[static_cast<std::size_t>(order[pos])] = pos + 1;
    return value_rank;
}

long long confusion_degree(const DistributionU& u) {
    const std::vector<int> value_rank = value_rank_table(u);
    long long total = 0;
    for (int i = 1; i <= u.support(); ++i)
        total += std::llabs(static_cast<long long>(value_rank[static_cast<std::size_t>(i - 1)]) -
                            static_cast<long long>(i));
    return total;
}

double concentration_degree(const DistributionU& u, int k) {
    if (k < 1 || k > u.support())
        throw ConfigError("top-k cutoff " + std::to_string(k) + " outside support 1.." +
                          std::to_string(u.support()));
    if (u.sample_count == 0) throw DataError("concentration undefined for an empty distribution");
    long long hits = 0;
    for (int i = 1; i <= k; ++i) hits += u.counts[static_cast<std::size_t>(i - 1)];
    return static_cast<double>(hits) / static_cast<double>(u.sample_count);
}

EvalReport evaluate(const std::string& kind, const std::vector<PairRank>& pairs, int support,
                    const std::vector<int>& k_list, RhoSupport rho_support) {
    EvalReport report;
    report.kind = kind;
    report.support = support;
    const DistributionU u = aggregate_U(pairs, support);
    report.pair_count = u.sample_count;
    {
        std::map<std::string, bool> seen;
        for (const auto& p : pairs) seen[p.vehicle_id] = true;
        report.individual_count = seen.size();
    }
    if (u.sample_count == 0) {
        report.empty = true;
        return report;
    }
    report.rho = spearman_rho(u, rho_support, &report.rho_degenerate);
    report.confusion = confusion_degree(u);
    for (const int k : k_list) report.concentration.emplace_back(k, concentration_degree(u, k));
    long long rank_sum = 0;
    for (const auto& p : pairs) rank_sum += p.rank;
    report.mean_rank = static_cast<double>(rank_sum) / static_cast<double>(u.sample_count);
    return report;
}

void write_distribution_u(std::ostream& out, const DistributionU& u) {
    out << "rank,mass\n";
    for (int i = 1; i <= u.support(); ++i) out << i << ',' << format_double(u.mass(i)) << '\n';
}

void write_distribution_h(std::ostream& out, const DistributionH& h) {
    out << "bin,count\n";
    for (const auto& [bin, count] : h.histogram)
        out << format_double(bin) << ',' << count << '\n';
}

void write_value_rank_table(std::ostream& out, const DistributionU& u) {
    out << "i,i_prime\n";
    const std::vector<int> table = value_rank_table(u);
    for (int i = 1; i <= u.support(); ++i)
        out << i << ',' << table[static_cast<std::size_t>(i - 1)] << '\n';
}

void write_eval_report(std::ostream& out, const EvalReport& report) {
    out << "kind " << report.kind << '\n';
    out << "support " << report.support << '\n';
    out << "pair_count " << report.pair_count << '\n';
    out << "individual_count " << report.individual_count << '\n';
    out << "empty " << (report.empty ? 1 : 0) << '\n';
    if (report.empty) return;
    out << "spearman_rho " << format_double(report.rho) << '\n';
    out << "rho_degenerate " << (report.rho_degenerate ? 1 : 0) << '\n';
    out << "confusion_degree " << report.confusion << '\n';
    for (const auto& [k, value] : report.concentration)
        out << "concentration_degree_" << k << ' ' << format_double(value) << '\n';
    out << "mean_rank " << format_double(report.mean_rank) << '\n';
}

}  // namespace pdpfkg

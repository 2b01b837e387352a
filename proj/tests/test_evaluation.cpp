#include "doctest.h"

#include "pdpfkg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

using namespace pdpfkg;

namespace {

DistributionU dist_from_counts(const std::vector<long long>& counts) {
    DistributionU u;
    u.counts = counts;
    u.sample_count = 0;
    for (const long long c : counts) u.sample_count += c;
    return u;
}

IndividualProfile profile(const std::string& id, std::set<int> observed, std::set<int> future) {
    IndividualProfile p;
    p.vehicle_id = id;
    p.observed_destinations = std::move(observed);
    p.future_destinations = std::move(future);
    p.trip_count = p.observed_destinations.size();
    for (const int z : p.observed_destinations) p.dest_counts[z] = 1;
    return p;
}

}  // namespace

TEST_CASE("pair extraction joins potential destinations with assigned ranks") {
    RankingTable t1{"v1", "embedding", {{4, 2}, {5, 1}, {6, 3}}, false};
    RankingTable t2{"v2", "embedding", {{1, 1}}, false};
    const std::vector<IndividualProfile> profiles = {
        profile("v1", {1, 2}, {2, 4, 6}),  // potential {4, 6}
        profile("v2", {3}, {3}),           // potential empty: skipped
        profile("v3", {9}, {9}),           // potential empty: no table needed
    };
    const auto pairs = potential_pair_ranks({t1, t2}, profiles);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].vehicle_id == "v1");
    CHECK(pairs[0].zone == 4);
    CHECK(pairs[0].rank == 2);
    CHECK(pairs[1].zone == 6);
    CHECK(pairs[1].rank == 3);
}

TEST_CASE("pair extraction fails loudly on missing tables or ranks") {
    const std::vector<IndividualProfile> profiles = {profile("v1", {1}, {1, 4})};
    CHECK_THROWS_WITH_AS(potential_pair_ranks({}, profiles),
                         "no ranking table for vehicle 'v1' with potential destinations",
                         DataError);
    RankingTable missing_zone{"v1", "embedding", {{5, 1}}, false};
    CHECK_THROWS_WITH_AS(potential_pair_ranks({missing_zone}, profiles),
                         "vehicle 'v1': potential destination 4 has no rank", DataError);
}

TEST_CASE("pooled distribution U places pairs at their rank position") {
    const std::vector<PairRank> pairs = {
        {"a", 1, 1}, {"a", 2, 3}, {"b", 1, 1}, {"b", 9, 5}};
    const auto u = aggregate_U(pairs, 5);
    CHECK(u.support() == 5);
    CHECK(u.sample_count == 4);
    CHECK(u.counts == std::vector<long long>{2, 0, 1, 0, 1});
    CHECK(u.mass(1) == doctest::Approx(0.5));
    CHECK(u.mass(2) == 0.0);
    CHECK(u.mass(5) == doctest::Approx(0.25));

    CHECK_THROWS_AS(aggregate_U(pairs, 0), ConfigError);
    CHECK_THROWS_WITH_AS(aggregate_U(pairs, 4),
                         "pair rank 5 outside the distribution support 1..4", DataError);
    CHECK_THROWS_AS(aggregate_U({{"a", 1, 0}}, 4), DataError);

    const auto empty = aggregate_U({}, 3);
    CHECK(empty.sample_count == 0);
    CHECK(empty.mass(1) == 0.0);
}

TEST_CASE("individual distribution H bins mean ranks by floor") {
    const std::vector<PairRank> pairs = {
        {"v1", 4, 2}, {"v1", 6, 3},                    // mean 2.5 -> bin 2
        {"v2", 1, 7},                                  // mean 7   -> bin 6
        {"v3", 2, 1}, {"v3", 3, 1}, {"v3", 4, 1},      // mean 1   -> bin 0
    };
    const auto h = individual_H(pairs, 2.0);
    CHECK(h.bin_width == 2.0);
    CHECK(h.means == std::map<std::string, double>{{"v1", 2.5}, {"v2", 7.0}, {"v3", 1.0}});
    CHECK(h.histogram == std::map<double, std::size_t>{{0.0, 1}, {2.0, 1}, {6.0, 1}});
    CHECK_THROWS_AS(individual_H(pairs, 0.0), ConfigError);
    CHECK(individual_H({}, 2.0).means.empty());
}

TEST_CASE("rank correlation: exact hand-worked cases") {
    bool degenerate = false;

    // counts (5,2,3): value ranks (3,1,2) against positions (1,2,3)
    CHECK(spearman_rho(dist_from_counts({5, 2, 3}), RhoSupport::full, &degenerate) ==
          doctest::Approx(-0.5).epsilon(1e-12));
    CHECK_FALSE(degenerate);

    // strictly decreasing mass is a perfect negative correlation
    CHECK(spearman_rho(dist_from_counts({9, 7, 4, 2, 1})) == doctest::Approx(-1.0));
    // strictly increasing mass is a perfect positive correlation
    CHECK(spearman_rho(dist_from_counts({1, 2, 4, 7, 9})) == doctest::Approx(1.0));

    // tie case counts (4,3,3): value ranks (3, 1.5, 1.5) -> -1.5/sqrt(3)
    CHECK(spearman_rho(dist_from_counts({4, 3, 3})) ==
          doctest::Approx(-1.5 / std::sqrt(3.0)).epsilon(1e-12));

    // all-equal masses are degenerate and reported as zero
    CHECK(spearman_rho(dist_from_counts({2, 2, 2}), RhoSupport::full, &degenerate) == 0.0);
    CHECK(degenerate);

    // single-position support is degenerate too
    CHECK(spearman_rho(dist_from_counts({5}), RhoSupport::full, &degenerate) == 0.0);
    CHECK(degenerate);
}

TEST_CASE("rank correlation can restrict itself to nonzero-mass positions") {
    // counts (5,0,3,0,1): nonzero positions carry strictly decreasing mass.
    const auto u = dist_from_counts({5, 0, 3, 0, 1});
    CHECK(spearman_rho(u, RhoSupport::nonzero) == doctest::Approx(-1.0));
    // Over the full support the zero bins share an average rank: -4/sqrt(95).
    CHECK(spearman_rho(u, RhoSupport::full) ==
          doctest::Approx(-4.0 / std::sqrt(95.0)).epsilon(1e-12));
}

TEST_CASE("rank correlation matches the classic formula when counts are distinct") {
    std::mt19937_64 rng(23);
    for (int it = 0; it < 100; ++it) {
        const int n = 3 + static_cast<int>(rng() % 20);
        std::vector<long long> counts(n);
        std::vector<long long> pool(50);
        std::iota(pool.begin(), pool.end(), 1);
        std::shuffle(pool.begin(), pool.end(), rng);
        for (int i = 0; i < n; ++i) counts[i] = pool[i];  // distinct counts: no ties

        const auto u = dist_from_counts(counts);
        // With no ties, rho = 1 - 6*sum(d^2)/(n(n^2-1)) where d is the
        // difference between the position rank and the count rank.
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return counts[a] < counts[b]; });
        std::vector<int> count_rank(n);
        for (int pos = 0; pos < n; ++pos) count_rank[order[pos]] = pos + 1;
        double sum_d2 = 0;
        for (int i = 0; i < n; ++i) {
            const double d = (i + 1) - count_rank[i];
            sum_d2 += d * d;
        }
        const double expected =
            1.0 - 6.0 * sum_d2 / (static_cast<double>(n) * (static_cast<double>(n) * n - 1));
        CHECK(spearman_rho(u) == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("value rank table sorts positions by descending mass") {
    CHECK(value_rank_table(dist_from_counts({1, 4, 2, 3})) == std::vector<int>{4, 1, 3, 2});
    // Ties keep the earlier position first.
    CHECK(value_rank_table(dist_from_counts({2, 2, 1})) == std::vector<int>{1, 2, 3});
    CHECK(value_rank_table(dist_from_counts({0, 5, 0})) == std::vector<int>{2, 1, 3});
}

TEST_CASE("confusion degree: exact cases and a brute-force cross-check") {
    CHECK(confusion_degree(dist_from_counts({5, 4, 3, 2})) == 0);  // already sorted
    CHECK(confusion_degree(dist_from_counts({1, 2, 3})) == 4);     // fully reversed
    CHECK(confusion_degree(dist_from_counts({2, 2, 1})) == 0);     // tie keeps order

    std::mt19937_64 rng(31);
    for (int it = 0; it < 200; ++it) {
        const int n = 1 + static_cast<int>(rng() % 30);
        std::vector<long long> counts(n);
        for (auto& c : counts) c = static_cast<long long>(rng() % 10);
        const auto u = dist_from_counts(counts);

        // Independent recomputation: stable sort of (-count, position).
        std::vector<std::pair<long long, int>> keyed;
        for (int i = 0; i < n; ++i) keyed.emplace_back(-counts[i], i + 1);
        std::sort(keyed.begin(), keyed.end());
        long long expected = 0;
        for (int pos = 0; pos < n; ++pos)
            expected += std::llabs(static_cast<long long>(pos) + 1 - keyed[pos].second);
        CHECK(confusion_degree(u) == expected);
    }
}

TEST_CASE("concentration degree is the pooled top-k share") {
    const auto u = dist_from_counts({5, 3, 2});
    CHECK(concentration_degree(u, 1) == doctest::Approx(0.5));
    CHECK(concentration_degree(u, 2) == doctest::Approx(0.8));
    CHECK(concentration_degree(u, 3) == doctest::Approx(1.0));
    CHECK_THROWS_AS(concentration_degree(u, 0), ConfigError);
    CHECK_THROWS_AS(concentration_degree(u, 4), ConfigError);
    CHECK_THROWS_AS(concentration_degree(dist_from_counts({0, 0}), 1), DataError);

    std::mt19937_64 rng(37);
    for (int it = 0; it < 100; ++it) {
        const int n = 2 + static_cast<int>(rng() % 20);
        std::vector<long long> counts(n);
        for (auto& c : counts) c = 1 + static_cast<long long>(rng() % 9);
        const auto v = dist_from_counts(counts);
        const int k = 1 + static_cast<int>(rng() % n);
        long long hits = 0;
        for (int i = 0; i < k; ++i) hits += counts[i];
        CHECK(concentration_degree(v, k) ==
              doctest::Approx(static_cast<double>(hits) /
                              static_cast<double>(v.sample_count)));
    }
}

TEST_CASE("evaluate composes the full report") {
    const std::vector<PairRank> pairs = {
        {"v1", 4, 2}, {"v1", 6, 4}, {"v2", 1, 9}};
    const auto report = evaluate("embedding", pairs, 10, {1, 2, 5}, RhoSupport::full);
    CHECK(report.kind == "embedding");
    CHECK(report.support == 10);
    CHECK(report.pair_count == 3);
    CHECK(report.individual_count == 2);
    CHECK_FALSE(report.empty);
    CHECK(report.mean_rank == doctest::Approx(5.0));
    REQUIRE(report.concentration.size() == 3);
    CHECK(report.concentration[0].first == 1);
    CHECK(report.concentration[0].second == doctest::Approx(0.0));
    CHECK(report.concentration[1].second == doctest::Approx(1.0 / 3.0));
    CHECK(report.concentration[2].second == doctest::Approx(2.0 / 3.0));

    const auto u = aggregate_U(pairs, 10);
    CHECK(report.rho == doctest::Approx(spearman_rho(u)));
    CHECK(report.confusion == confusion_degree(u));
}

TEST_CASE("evaluate flags an empty pair set instead of inventing metrics") {
    const auto report = evaluate("embedding", {}, 5, {1}, RhoSupport::full);
    CHECK(report.empty);
    CHECK(report.pair_count == 0);
    CHECK(report.individual_count == 0);
    CHECK(report.rho == 0.0);
    CHECK(report.concentration.empty());

    std::ostringstream out;
    write_eval_report(out, report);
    CHECK(out.str() ==
          "kind embedding\n"
          "support 5\n"
          "pair_count 0\n"
          "individual_count 0\n"
          "empty 1\n");
}

TEST_CASE("artifact writers emit the documented formats") {
    const auto u = dist_from_counts({2, 0, 1, 1});
    {
        std::ostringstream out;
        write_distribution_u(out, u);
        CHECK(out.str() == "rank,mass\n1,0.5\n2,0\n3,0.25\n4,0.25\n");
    }
    {
        DistributionH h;
        h.bin_width = 2.0;
        h.histogram = {{0.0, 3}, {6.0, 1}};
        std::ostringstream out;
        write_distribution_h(out, h);
        CHECK(out.str() == "bin,count\n0,3\n6,1\n");
    }
    {
        std::ostringstream out;
        write_value_rank_table(out, u);
        CHECK(out.str() == "i,i_prime\n1,1\n2,4\n3,2\n4,3\n");
    }
    {
        EvalReport report;
        report.kind = "hotness";
        report.support = 4;
        report.pair_count = 4;
        report.individual_count = 2;
        report.rho = -0.5;
        report.confusion = 2;
        report.concentration = {{1, 0.5}};
        report.mean_rank = 2.25;
        std::ostringstream out;
        write_eval_report(out, report);
        CHECK(out.str() ==
              "kind hotness\n"
              "support 4\n"
              "pair_count 4\n"
              "individual_count 2\n"
              "empty 0\n"
              "spearman_rho -0.5\n"
              "rho_degenerate 0\n"
              "confusion_degree 2\n"
              "concentration_degree_1 0.5\n"
              "mean_rank 2.25\n");
    }
}

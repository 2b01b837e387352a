#pragma once
// Reference ranking methods sharing the main pipeline's table contract:
// random choice, matrix-decomposition imputation (UV/QR/SVD), neighborhood
// collaborative filtering, and a jump-size mobility heuristic with its
// hotness-combined variant.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pdpfkg/ranking.hpp"
#include "pdpfkg/trip_data.hpp"

namespace pdpfkg {

struct VisitMatrix {
    std::vector<std::string> vehicles;  // rows, sorted by id
    std::vector<int> zones;             // columns, ascending
    std::vector<double> cells;          // row-major trip counts

    double at(std::size_t row, std::size_t col) const { return cells[row * zones.size() + col]; }
    std::size_t rows() const { return vehicles.size(); }
    std::size_t cols() const { return zones.size(); }
};

VisitMatrix build_visit_matrix(const std::vector<IndividualProfile>& profiles,
                               const std::set<int>& zones);

// Uniform random permutation of the unobserved zones; the stream is keyed by
// (seed, vehicle id) so tables are independent across individuals yet
// reproducible.
RankingTable random_ranking(const std::string& vehicle, const std::vector<int>& unobserved_zones,
                            std::uint64_t seed);

enum class MdMethod { uv, qr, svd };

std::string md_method_label(MdMethod m);

// Row-major reconstruction of the visit matrix at the given rank, exposed so
// the decomposition contract (e.g. full-rank reproduction) is directly
// checkable. UV is an alternating-least-squares factorization with a seeded
// start; QR reconstructs through the leading orthogonal columns; SVD
// truncates the singular expansion.
std::vector<double> md_reconstruct(const VisitMatrix& matrix, MdMethod method, int rank_param,
                                   std::uint64_t seed = 1, int als_iterations = 100);

// Factor-and-reconstruct at the given rank; each individual's unobserved
// zones (zero cells) are ranked by descending reconstructed value, ties by
// ascending zone id.
std::vector<RankingTable> md_ranking(const VisitMatrix& matrix, MdMethod method, int rank_param,
                                     std::uint64_t seed = 1, int als_iterations = 100);

enum class CfMode { user, item };

// Cosine-neighborhood scoring over raw counts. Individuals without any
// usable signal fall back to ascending-zone-id order with the table flagged.
std::vector<RankingTable> cf_ranking(const VisitMatrix& matrix, CfMode mode, int k_neighbors);

struct ZoneCoord {
    double lat = 0.0;
    double lon = 0.0;
};

double haversine_meters(const ZoneCoord& a, const ZoneCoord& b);

struct JumpSizeDistribution {
    double bin_width_meters = 1000.0;
    std::vector<double> mass;  // index floor(distance / bin width) -> probability

    double mass_at(double meters) const;
};

// Empirical distribution of origin-to-destination center distances.
JumpSizeDistribution jump_size_distribution(const std::vector<TripRecord>& observed,
                                            const std::map<int, ZoneCoord>& coords,
                                            double bin_width_meters);

// Rank unobserved zones by descending jump-size probability of the distance
// from the present zone; ties by ascending zone id.
RankingTable epr_ranking(const std::string& vehicle, int present_zone,
                         const std::vector<int>& unobserved_zones, const JumpSizeDistribution& j,
                         const std::map<int, ZoneCoord>& coords);

// Jump-size ranks combined with population hotness ranks via the shared
// rank-sum procedure.
RankingTable pepr_ranking(const RankingTable& epr, const HotnessTable& hotness);

// Event-level evaluation tables for the jump-size methods: each potential
// destination is ranked at the moment of its first future visit, using that
// trip's origin as the present zone. The returned tables are sparse (one
// entry per potential destination).
std::vector<RankingTable> epr_event_rankings(const std::vector<IndividualProfile>& profiles,
                                             const std::vector<TripRecord>& future,
                                             const std::set<int>& zones,
                                             const JumpSizeDistribution& j,
                                             const std::map<int, ZoneCoord>& coords,
                                             const HotnessTable* hotness_for_combination);

// Coordinate input: zone_id,lat,lon.
std::map<int, ZoneCoord> read_coords(std::istream& in);
void write_coords(std::ostream& out, const std::map<int, ZoneCoord>& coords);

}  // namespace pdpfkg

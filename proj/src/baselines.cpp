#include "pdpfkg/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>

namespace pdpfkg {

VisitMatrix build_visit_matrix(const std::vector<IndividualProfile>& profiles,
                               const std::set<int>& zones) {
    VisitMatrix m;
    m.vehicles.reserve(profiles.size());
    for (const auto& p : profiles) m.vehicles.push_back(p.vehicle_id);
    std::sort(m.vehicles.begin(), m.vehicles.end());
    m.zones.assign(zones.begin(), zones.end());
    m.cells.assign(m.vehicles.size() * m.zones.size(), 0.0);

    std::map<int, std::size_t> zone_col;
    for (std::size_t c = 0; c < m.zones.size(); ++c) zone_col[m.zones[c]] = c;
    std::map<std::string, std::size_t> vehicle_row;
    for (std::size_t r = 0; r < m.vehicles.size(); ++r) vehicle_row[m.vehicles[r]] = r;

    for (const auto& p : profiles) {
        const std::size_t row = vehicle_row.at(p.vehicle_id);
        for (const auto& [zone, count] : p.dest_counts) {
            auto it = zone_col.find(zone);
            if (it == zone_col.end())
                throw DataError("profile references zone " + std::to_string(zone) +
                                " outside the zone universe");
            m.cells[row * m.zones.size() + it->second] = static_cast<double>(count);
        }
    }
    return m;
}

RankingTable random_ranking(const std::string& vehicle, const std::vector<int>& unobserved_zones,
                            std::uint64_t seed) {
    Rng rng(seed ^ fnv1a64(vehicle));
    std::vector<int> order(unobserved_zones);
    std::sort(order.begin(), order.end());
    deterministic_shuffle(order, rng);
    RankingTable table;
    table.vehicle_id = vehicle;
    table.kind = "rc";
    for (std::size_t i = 0; i < order.size(); ++i)
        table.ranks[order[i]] = static_cast<int>(i) + 1;
    return table;
}

std::string md_method_label(MdMethod m) {
    switch (m) {
        case MdMethod::uv: return "md_uv";
        case MdMethod::qr: return "md_qr";
        case MdMethod::svd: return "md_svd";
    }
    throw std::logic_error("unreachable md method");
}

namespace {

std::vector<RankingTable> rank_by_reconstruction(const VisitMatrix& matrix,
                                                 const Eigen::MatrixXd& reconstructed,
                                                 const std::string& kind) {
    std::vector<RankingTable> tables;
    tables.reserve(matrix.rows());
    for (std::size_t row = 0; row < matrix.rows(); ++row) {
        std::vector<std::pair<double, int>> scored;  // (-score, zone)
        for (std::size_t col = 0; col < matrix.cols(); ++col) {
            if (matrix.at(row, col) != 0.0) continue;  // observed destination
            scored.emplace_back(-reconstructed(static_cast<Eigen::Index>(row),
                                               static_cast<Eigen::Index>(col)),
                                matrix.zones[col]);
        }
        std::sort(scored.begin(), scored.end());
        RankingTable t;
        t.vehicle_id = matrix.vehicles[row];
        t.kind = kind;
        for (std::size_t i = 0; i < scored.size(); ++i)
            t.ranks[scored[i].second] = static_cast<int>(i) + 1;
        tables.push_back(std::move(t));
    }
    return tables;
}

Eigen::MatrixXd to_eigen(const VisitMatrix& matrix) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(matrix.rows()),
                      static_cast<Eigen::Index>(matrix.cols()));
    for (std::size_t r = 0; r < matrix.rows(); ++r)
        for (std::size_t c = 0; c < matrix.cols(); ++c)
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = matrix.at(r, c);
    return a;
}

}  // namespace

std::vector<double> md_reconstruct(const VisitMatrix& matrix, MdMethod method, int rank_param,
                                   std::uint64_t seed, int als_iterations) {
    if (matrix.rows() == 0 || matrix.cols() == 0)
        throw DataError("visit matrix is empty");
    const int max_rank = static_cast<int>(std::min(matrix.rows(), matrix.cols()));
    if (rank_param < 1 || rank_param > max_rank)
        throw ConfigError("decomposition rank must be in 1.." + std::to_string(max_rank));
    const Eigen::MatrixXd a = to_eigen(matrix);
    const Eigen::Index k = rank_param;
    Eigen::MatrixXd reconstructed;

    switch (method) {
        case MdMethod::svd: {
            Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
            reconstructed = svd.matrixU().leftCols(k) *
                            svd.singularValues().head(k).asDiagonal() *
                            svd.matrixV().leftCols(k).transpose();
            break;
        }
        case MdMethod::qr: {
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
            Eigen::MatrixXd thin_q =
                qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), std::min(a.rows(),
                                                                                 a.cols()));
            const Eigen::MatrixXd q_k = thin_q.leftCols(k);
            reconstructed = q_k * (q_k.transpose() * a);
            break;
        }
        case MdMethod::uv: {
            // Alternating least squares with a tiny ridge for conditioning.
            Rng rng(seed);
            Eigen::MatrixXd v(k, a.cols());
            const double scale = 1.0 / std::sqrt(static_cast<double>(k));
            for (Eigen::Index i = 0; i < v.rows(); ++i)
                for (Eigen::Index j = 0; j < v.cols(); ++j)
                    v(i, j) = (uniform01(rng) + 0.1) * scale;
            Eigen::MatrixXd u(a.rows(), k);
            const double ridge = 1e-9;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
            for (int it = 0; it < als_iterations; ++it) {
                u = (v * v.transpose() + ridge * eye).ldlt().solve(v * a.transpose()).transpose();
                v = (u.transpose() * u + ridge * eye).ldlt().solve(u.transpose() * a);
            }
            reconstructed = u * v;
            break;
        }
        default: throw std::logic_error("unknown decomposition method");
    }

    if (!reconstructed.allFinite())
        throw DataError(md_method_label(method) + " decomposition failed (non-finite result)");
    std::vector<double> out(matrix.rows() * matrix.cols());
    for (std::size_t row = 0; row < matrix.rows(); ++row)
        for (std::size_t col = 0; col < matrix.cols(); ++col)
            out[row * matrix.cols() + col] = reconstructed(static_cast<Eigen::Index>(row),
                                                           static_cast<Eigen::Index>(col));
    return out;
}

std::vector<RankingTable> md_ranking(const VisitMatrix& matrix, MdMethod method, int rank_param,
                                     std::uint64_t seed, int als_iterations) {
    const std::vector<double> flat = md_reconstruct(matrix, method, rank_param, seed,
                                                    als_iterations);
    Eigen::MatrixXd reconstructed(static_cast<Eigen::Index>(matrix.rows()),
                                  static_cast<Eigen::Index>(matrix.cols()));
    for (std::size_t row = 0; row < matrix.rows(); ++row)
        for (std::size_t col = 0; col < matrix.cols(); ++col)
            reconstructed(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) =
                flat[row * matrix.cols() + col];
    return rank_by_reconstruction(matrix, reconstructed, md_method_label(method));
}

namespace {

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace

std::vector<RankingTable> cf_ranking(const VisitMatrix& matrix, CfMode mode, int k_neighbors) {
    if (k_neighbors < 1) throw ConfigError("neighborhood size must be at least 1");
    if (matrix.rows() == 0 || matrix.cols() == 0)
        throw DataError("visit matrix is empty");
    const Eigen::MatrixXd a = to_eigen(matrix);
    const std::size_t n = matrix.rows(), m = matrix.cols();

    // Pairwise similarities: user rows or zone columns.
    const std::size_t units = mode == CfMode::user ? n : m;
    Eigen::MatrixXd sim(units, units);
    for (std::size_t i = 0; i < units; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            const double s = mode == CfMode::user
                                 ? cosine(a.row(static_cast<Eigen::Index>(i)).transpose(),
                                          a.row(static_cast<Eigen::Index>(j)).transpose())
                                 : cosine(a.col(static_cast<Eigen::Index>(i)),
                                          a.col(static_cast<Eigen::Index>(j)));
            sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
            sim(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = s;
        }

    // Positive-similarity neighbors per unit, best first, index tie-break.
    std::vector<std::vector<std::size_t>> neighbors(units);
    for (std::size_t i = 0; i < units; ++i) {
        std::vector<std::pair<double, std::size_t>> cand;  // (-sim, index)
        for (std::size_t j = 0; j < units; ++j) {
            if (j == i) continue;
            const double s = sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            if (s > 0.0) cand.emplace_back(-s, j);
        }
        std::sort(cand.begin(), cand.end());
        const std::size_t take = std::min<std::size_t>(cand.size(),
                                                       static_cast<std::size_t>(k_neighbors));
        for (std::size_t t = 0; t < take; ++t) neighbors[i].push_back(cand[t].second);
    }

    std::vector<RankingTable> tables;
    tables.reserve(n);
    for (std::size_t row = 0; row < n; ++row) {
        std::vector<std::pair<double, int>> scored;  // (-score, zone) over unobserved zones
        bool any_signal = false;
        for (std::size_t col = 0; col < m; ++col) {
            if (matrix.at(row, col) != 0.0) continue;
            double score = 0.0;
            if (mode == CfMode::user) {
                for (const std::size_t peer : neighbors[row])
                    score += sim(static_cast<Eigen::Index>(row),
                                 static_cast<Eigen::Index>(peer)) *
                             matrix.at(peer, col);
            } else {
                for (const std::size_t other : neighbors[col])
                    score += sim(static_cast<Eigen::Index>(col),
                                 static_cast<Eigen::Index>(other)) *
                             matrix.at(row, other);
            }
            if (score != 0.0) any_signal = true;
            scored.emplace_back(-score, matrix.zones[col]);
        }
        std::sort(scored.begin(), scored.end());
        RankingTable t;
        t.vehicle_id = matrix.vehicles[row];
        t.kind = mode == CfMode::user ? "cf_user" : "cf_item";
        t.fallback = !any_signal;
        for (std::size_t i = 0; i < scored.size(); ++i)
            t.ranks[scored[i].second] = static_cast<int>(i) + 1;
        tables.push_back(std::move(t));
    }
    return tables;
}

double haversine_meters(const ZoneCoord& a, const ZoneCoord& b) {
    constexpr double kEarthRadius = 6371000.0;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    const double dlat = (b.lat - a.lat) * kDeg;
    const double dlon = (b.lon - a.lon) * kDeg;
    const double s = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(a.lat * kDeg) * std::cos(b.lat * kDeg) * std::sin(dlon / 2) *
                         std::sin(dlon / 2);
    return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(s)));
}

double JumpSizeDistribution::mass_at(double meters) const {
    if (meters < 0) return 0.0;
    const auto bin = static_cast<std::size_t>(meters / bin_width_meters);
    return bin < mass.size() ? mass[bin] : 0.0;
}

namespace {

const ZoneCoord& coord_of(const std::map<int, ZoneCoord>& coords, int zone) {
    auto it = coords.find(zone);
    if (it == coords.end())
        throw DataError("no coordinates for zone " + std::to_string(zone));
    return it->second;
}

}  // namespace

JumpSizeDistribution jump_size_distribution(const std::vector<TripRecord>& observed,
                                            const std::map<int, ZoneCoord>& coords,
                                            double bin_width_meters) {
    if (bin_width_meters <= 0) throw ConfigError("jump-size bin width must be positive");
    if (observed.empty()) throw DataError("no trips to build the jump-size distribution");
    JumpSizeDistribution j;
    j.bin_width_meters = bin_width_meters;
    std::vector<long long> counts;
    for (const auto& r : observed) {
        const double d = haversine_meters(coord_of(coords, r.fzone), coord_of(coords, r.tzone));
        const auto bin = static_cast<std::size_t>(d / bin_width_meters);
        if (bin >= counts.size()) counts.resize(bin + 1, 0);
        ++counts[bin];
    }
    j.mass.resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
        j.mass[i] = static_cast<double>(counts[i]) / static_cast<double>(observed.size());
    return j;
}

RankingTable epr_ranking(const std::string& vehicle, int present_zone,
                         const std::vector<int>& unobserved_zones, const JumpSizeDistribution& j,
                         const std::map<int, ZoneCoord>& coords) {
    const ZoneCoord& origin = coord_of(coords, present_zone);
    std::vector<std::pair<double, int>> scored;  // (-probability, zone)
    scored.reserve(unobserved_zones.size());
    for (const int z : unobserved_zones)
        scored.emplace_back(-j.mass_at(haversine_meters(origin, coord_of(coords, z))), z);
    std::sort(scored.begin(), scored.end());
    RankingTable t;
    t.vehicle_id = vehicle;
    t.kind = "epr";
    for (std::size_t i = 0; i < scored.size(); ++i)
        t.ranks[scored[i].second] = static_cast<int>(i) + 1;
    return t;
}

RankingTable pepr_ranking(const RankingTable& epr, const HotnessTable& hotness) {
    std::map<int, int> hot;
    for (const auto& [zone, rank] : epr.ranks) {
        auto it = hotness.ranks.find(zone);
        if (it == hotness.ranks.end())
            throw DataError("zone " + std::to_string(zone) + " missing from the hotness table");
        hot[zone] = it->second;
    }
    return combine_rank_tables(epr.ranks, hot, epr.vehicle_id, "pepr");
}

std::vector<RankingTable> epr_event_rankings(const std::vector<IndividualProfile>& profiles,
                                             const std::vector<TripRecord>& future,
                                             const std::set<int>& zones,
                                             const JumpSizeDistribution& j,
                                             const std::map<int, ZoneCoord>& coords,
                                             const HotnessTable* hotness_for_combination) {
    // Future trips per vehicle in chronological order (stable on input order).
    std::map<std::string, std::vector<const TripRecord*>> by_vehicle;
    for (const auto& r : future) by_vehicle[r.vehicle_id].push_back(&r);
    for (auto& [vehicle, recs] : by_vehicle) {
        (void)vehicle;
        std::stable_sort(recs.begin(), recs.end(), [](const TripRecord* a, const TripRecord* b) {
            if (day_number(a->date) != day_number(b->date))
                return day_number(a->date) < day_number(b->date);
            return a->ftime < b->ftime;
        });
    }

    std::vector<RankingTable> tables;
    for (const auto& p : profiles) {
        const std::set<int> potential = p.potential_destinations();
        if (potential.empty()) continue;
        auto it = by_vehicle.find(p.vehicle_id);
        if (it == by_vehicle.end()) continue;

        std::vector<int> unobserved;
        for (const int z : zones)
            if (!p.observed_destinations.count(z)) unobserved.push_back(z);

        RankingTable table;
        table.vehicle_id = p.vehicle_id;
        table.kind = hotness_for_combination ? "pepr" : "epr";
        std::set<int> pending(potential);
        for (const TripRecord* rec : it->second) {
            if (pending.empty()) break;
            if (!pending.count(rec->tzone)) continue;
            pending.erase(rec->tzone);
            RankingTable event = epr_ranking(p.vehicle_id, rec->fzone, unobserved, j, coords);
            if (hotness_for_combination)
                event = pepr_ranking(event, *hotness_for_combination);
            table.ranks[rec->tzone] = event.ranks.at(rec->tzone);
        }
        if (!table.ranks.empty()) tables.push_back(std::move(table));
    }
    return tables;
}

std::map<int, ZoneCoord> read_coords(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("coordinate input is empty (missing header)");
    std::map<int, ZoneCoord> coords;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 3)
            throw DataError("coords line " + std::to_string(lineno) + ": expected 3 fields");
        try {
            const int zone = std::stoi(fields[0]);
            coords[zone] = {std::stod(fields[1]), std::stod(fields[2])};
        } catch (const std::exception&) {
            throw DataError("coords line " + std::to_string(lineno) + ": malformed field");
        }
    }
    return coords;
}

void write_coords(std::ostream& out, const std::map<int, ZoneCoord>& coords) {
    out << "zone_id,lat,lon\n";
    for (const auto& [zone, c] : coords)
        out << zone << ',' << format_double(c.lat) << ',' << format_double(c.lon) << '\n';
}

}  // namespace pdpfkg

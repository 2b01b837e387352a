#include "pdpfkg/trip_data.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace pdpfkg {

std::string day_nature_label(DayNature n) {
    return n == DayNature::workday ? "workday" : "holiday";
}

TemporalConfig TemporalConfig::defaults() {
    TemporalConfig cfg;
    const auto hm = [](int h, int m) { return h * 3600 + m * 60; };
    cfg.spans = {
        {"night", hm(0, 0), hm(6, 30)},
        {"early_morning", hm(6, 30), hm(7, 30)},
        {"morning_peak", hm(7, 30), hm(9, 30)},
        {"midday", hm(9, 30), hm(16, 30)},
        {"evening_peak", hm(16, 30), hm(19, 0)},
        {"evening", hm(19, 0), hm(22, 0)},
        {"late_night", hm(22, 0), hm(24, 0)},
    };
    return cfg;
}

void TemporalConfig::validate() const {
    if (spans.empty()) throw ConfigError("temporal config needs at least one time span");
    int cursor = 0;
    for (const auto& s : spans) {
        if (s.label.empty()) throw ConfigError("time span with empty label");
        if (s.start != cursor)
            throw ConfigError("time spans must tile the day: gap or overlap before '" + s.label +
                              "' at " + format_time_of_day(s.start));
        if (s.end <= s.start)
            throw ConfigError("time span '" + s.label + "' has non-positive length");
        cursor = s.end;
    }
    if (cursor != 24 * 3600)
        throw ConfigError("time spans must end at 24:00, got " + format_time_of_day(cursor));
}

void ObservationSplit::validate() const {
    if (day_number(observe_end) < day_number(observe_begin))
        throw ConfigError("observation window ends before it begins");
    if (day_number(future_end) < day_number(future_begin))
        throw ConfigError("future window ends before it begins");
    if (day_number(future_begin) <= day_number(observe_end))
        throw ConfigError("future window must start after the observation window ends");
}

std::set<int> IndividualProfile::potential_destinations() const {
    std::set<int> out;
    std::set_difference(future_destinations.begin(), future_destinations.end(),
                        observed_destinations.begin(), observed_destinations.end(),
                        std::inserter(out, out.end()));
    return out;
}

std::set<int> IndividualProfile::accidental_destinations() const {
    std::set<int> out;
    std::set_difference(observed_destinations.begin(), observed_destinations.end(),
                        future_destinations.begin(), future_destinations.end(),
                        std::inserter(out, out.end()));
    return out;
}

namespace {

int parse_zone_field(const std::string& field, const std::set<int>& zone_universe, int lineno,
                     const char* what) {
    std::size_t used = 0;
    int zone = 0;
    try {
        zone = std::stoi(field, &used);
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(lineno) + ": malformed " + what + " '" + field +
                        "'");
    }
    if (used != field.size())
        throw DataError("line " + std::to_string(lineno) + ": malformed " + what + " '" + field +
                        "'");
    if (!zone_universe.count(zone))
        throw DataError("line " + std::to_string(lineno) + ": zone " + std::to_string(zone) +
                        " is not in the zone universe");
    return zone;
}

}  // namespace

std::vector<TripRecord> parse_trips(std::istream& in, const std::set<int>& zone_universe) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("trip input is empty (missing header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    {
        auto fields = split_fields(line, ',');
        const std::vector<std::string> expected = {"vehicle_id", "date", "ftime", "fzone",
                                                   "tzone"};
        if (fields.size() != expected.size())
            throw DataError("trip header must name exactly 5 fields");
        for (std::size_t i = 0; i < expected.size(); ++i)
            if (trim(fields[i]) != expected[i])
                throw DataError("trip header field " + std::to_string(i + 1) + " must be '" +
                                expected[i] + "', got '" + trim(fields[i]) + "'");
    }

    std::vector<TripRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 5)
            throw DataError("line " + std::to_string(lineno) + ": expected 5 fields, got " +
                            std::to_string(fields.size()));
        TripRecord rec;
        rec.vehicle_id = trim(fields[0]);
        if (rec.vehicle_id.empty())
            throw DataError("line " + std::to_string(lineno) + ": empty vehicle_id");
        try {
            rec.date = parse_date(trim(fields[1]));
            rec.ftime = parse_time_of_day(trim(fields[2]));
        } catch (const DataError& e) {
            throw DataError("line " + std::to_string(lineno) + ": " + e.what());
        }
        rec.fzone = parse_zone_field(trim(fields[3]), zone_universe, lineno, "fzone");
        rec.tzone = parse_zone_field(trim(fields[4]), zone_universe, lineno, "tzone");
        out.push_back(std::move(rec));
    }
    return out;
}

void write_trips(std::ostream& out, const std::vector<TripRecord>& records) {
    out << "vehicle_id,date,ftime,fzone,tzone\n";
    for (const auto& r : records) {
        out << r.vehicle_id << ',' << format_date(r.date) << ',' << format_time_of_day(r.ftime)
            << ',' << r.fzone << ',' << r.tzone << '\n';
    }
}

SplitResult split_periods(const std::vector<TripRecord>& records, const ObservationSplit& split) {
    split.validate();
    SplitResult result;
    const int ob = day_number(split.observe_begin), oe = day_number(split.observe_end);
    const int fb = day_number(split.future_begin), fe = day_number(split.future_end);
    for (const auto& r : records) {
        const int d = day_number(r.date);
        if (d >= ob && d <= oe)
            result.observed.push_back(r);
        else if (d >= fb && d <= fe)
            result.future.push_back(r);
        else
            ++result.discarded;
    }
    return result;
}

const std::string& map_time_span(int ftime, const TemporalConfig& cfg) {
    for (const auto& s : cfg.spans)
        if (ftime >= s.start && ftime < s.end) return s.label;
    throw ConfigError("time spans do not cover " + format_time_of_day(ftime));
}

DayNature map_day_nature(Date date, const TemporalConfig& cfg) {
    if (cfg.holidays.count(day_number(date))) return DayNature::holiday;
    return is_weekend(date) ? DayNature::holiday : DayNature::workday;
}

double compute_entropy(const std::map<int, int>& dest_counts) {
    long long total = 0;
    for (const auto& [zone, count] : dest_counts) {
        (void)zone;
        if (count < 0) throw DataError("negative destination count");
        total += count;
    }
    if (total == 0) throw DataError("entropy undefined for a profile with no trips");
    double e = 0.0;
    for (const auto& [zone, count] : dest_counts) {
        (void)zone;
        if (count == 0) continue;
        const double p = static_cast<double>(count) / static_cast<double>(total);
        e -= p * std::log2(p);
    }
    return std::max(e, 0.0);
}

DestinationRates accidental_potential_rates(const IndividualProfile& profile) {
    DestinationRates rates;
    if (!profile.observed_destinations.empty()) {
        rates.accidental = 100.0 * static_cast<double>(profile.accidental_destinations().size()) /
                           static_cast<double>(profile.observed_destinations.size());
    }
    if (!profile.future_destinations.empty()) {
        rates.potential = 100.0 * static_cast<double>(profile.potential_destinations().size()) /
                          static_cast<double>(profile.future_destinations.size());
    }
    return rates;
}

std::vector<IndividualProfile> build_profiles(const std::vector<TripRecord>& observed,
                                              const std::vector<TripRecord>& future) {
    std::map<std::string, IndividualProfile> by_id;
    for (const auto& r : observed) {
        auto& p = by_id[r.vehicle_id];
        p.vehicle_id = r.vehicle_id;
        ++p.trip_count;
        ++p.dest_counts[r.tzone];
    }
    for (const auto& r : future) {
        auto it = by_id.find(r.vehicle_id);
        if (it == by_id.end()) continue;  // never observed: outside the study population
        it->second.future_destinations.insert(r.tzone);
    }
    std::vector<IndividualProfile> out;
    out.reserve(by_id.size());
    for (auto& [id, p] : by_id) {
        (void)id;
        for (const auto& [zone, count] : p.dest_counts) {
            (void)count;
            p.observed_destinations.insert(zone);
        }
        p.entropy = compute_entropy(p.dest_counts);
        out.push_back(std::move(p));
    }
    return out;
}

FilterResult filter_low_predictability(const std::vector<IndividualProfile>& profiles,
                                       const FilterThresholds& thresholds) {
    FilterResult result;
    for (const auto& p : profiles) {
        bool keep = true;
        if (thresholds.max_trip_count &&
            static_cast<std::int64_t>(p.trip_count) > *thresholds.max_trip_count) {
            ++result.rejected_by["max_trip_count"];
            keep = false;
        }
        if (thresholds.min_trip_count &&
            static_cast<std::int64_t>(p.trip_count) < *thresholds.min_trip_count) {
            ++result.rejected_by["min_trip_count"];
            keep = false;
        }
        if (thresholds.min_entropy_fraction) {
            // Ceiling taken as log2(trip count); profiles with fewer than two
            // trips have a zero ceiling and pass vacuously.
            const double bound = p.trip_count > 1 ? std::log2(static_cast<double>(p.trip_count))
                                                  : 0.0;
            if (p.entropy < *thresholds.min_entropy_fraction * bound) {
                ++result.rejected_by["min_entropy_fraction"];
                keep = false;
            }
        }
        if (keep) result.selected.push_back(p);
    }
    return result;
}

void write_profiles(std::ostream& out, const std::vector<IndividualProfile>& profiles) {
    out << "vehicle_id,trip_count,entropy,dest_counts,future_dests\n";
    for (const auto& p : profiles) {
        out << p.vehicle_id << ',' << p.trip_count << ',' << format_double(p.entropy) << ',';
        bool first = true;
        for (const auto& [zone, count] : p.dest_counts) {
            if (!first) out << ';';
            out << zone << ':' << count;
            first = false;
        }
        out << ',';
        first = true;
        for (const int zone : p.future_destinations) {
            if (!first) out << ';';
            out << zone;
            first = false;
        }
        out << '\n';
    }
}

std::vector<IndividualProfile> read_profiles(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("profile input is empty (missing header)");
    std::vector<IndividualProfile> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto fields = split_fields(line, ',');
        if (fields.size() != 5)
            throw DataError("profiles line " + std::to_string(lineno) + ": expected 5 fields");
        IndividualProfile p;
        p.vehicle_id = trim(fields[0]);
        try {
            p.trip_count = static_cast<std::size_t>(std::stoll(fields[1]));
            p.entropy = std::stod(fields[2]);
            if (!trim(fields[3]).empty()) {
                for (const auto& item : split_fields(fields[3], ';')) {
                    auto kv = split_fields(item, ':');
                    if (kv.size() != 2) throw DataError("bad dest_counts item");
                    const int zone = std::stoi(kv[0]);
                    p.dest_counts[zone] = std::stoi(kv[1]);
                    p.observed_destinations.insert(zone);
                }
            }
            if (!trim(fields[4]).empty())
                for (const auto& item : split_fields(fields[4], ';'))
                    p.future_destinations.insert(std::stoi(item));
        } catch (const DataError&) {
            throw;
        } catch (const std::exception&) {
            throw DataError("profiles line " + std::to_string(lineno) + ": malformed field");
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace pdpfkg

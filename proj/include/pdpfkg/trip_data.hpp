#pragma once
// Trip record parsing, temporal categorisation, observation/future window
// splitting, per-individual statistics, and target-population selection.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pdpfkg/common.hpp"

namespace pdpfkg {

struct TripRecord {
    std::string vehicle_id;
    Date date{};
    int ftime = 0;  // departure time, seconds since midnight
    int fzone = 0;  // origin zone
    int tzone = 0;  // destination zone

    bool operator==(const TripRecord&) const = default;
};

struct TimeSpan {
    std::string label;
    int start = 0;  // inclusive, seconds since midnight
    int end = 0;    // exclusive; 86400 marks midnight
};

enum class DayNature { workday, holiday };

std::string day_nature_label(DayNature n);

struct TemporalConfig {
    std::vector<TimeSpan> spans;
    std::set<int> holidays;  // day numbers (see day_number)

    static TemporalConfig defaults();

    // Throws ConfigError unless spans are non-overlapping and cover the
    // whole day.
    void validate() const;
};

// Both windows are inclusive date intervals; the future window must start
// after the observation window ends.
struct ObservationSplit {
    Date observe_begin{}, observe_end{};
    Date future_begin{}, future_end{};

    void validate() const;
};

struct SplitResult {
    std::vector<TripRecord> observed;
    std::vector<TripRecord> future;
    std::size_t discarded = 0;
};

struct IndividualProfile {
    std::string vehicle_id;
    std::size_t trip_count = 0;            // trips inside the observation window
    std::map<int, int> dest_counts;        // destination zone -> visit count (observation)
    std::set<int> observed_destinations;   // keys of dest_counts
    std::set<int> future_destinations;     // destination zones seen in the future window
    double entropy = 0.0;                  // bits, over dest_counts

    std::set<int> potential_destinations() const;   // future minus observed
    std::set<int> accidental_destinations() const;  // observed minus future
};

struct DestinationRates {
    // Percentages; empty when the corresponding denominator set is empty, so
    // aggregates can skip undefined values instead of biasing toward zero.
    std::optional<double> accidental;  // |observed - future| / |observed| * 100
    std::optional<double> potential;   // |future - observed| / |future| * 100
};

struct FilterThresholds {
    std::optional<std::int64_t> max_trip_count;
    std::optional<std::int64_t> min_trip_count;
    // Fraction of the log2(trip_count) entropy ceiling the individual must
    // reach; selects erratic (hard to predict) travelers.
    std::optional<double> min_entropy_fraction;
};

struct FilterResult {
    std::vector<IndividualProfile> selected;
    // predicate name -> number of profiles it rejected (a profile may fail
    // several predicates and count toward each).
    std::map<std::string, std::size_t> rejected_by;
};

// Reads delimiter-separated trips with header vehicle_id,date,ftime,fzone,tzone.
// Rows are validated against the zone universe; input order is preserved.
// Throws DataError naming the line on any malformed row or unknown zone.
std::vector<TripRecord> parse_trips(std::istream& in, const std::set<int>& zone_universe);

void write_trips(std::ostream& out, const std::vector<TripRecord>& records);

SplitResult split_periods(const std::vector<TripRecord>& records, const ObservationSplit& split);

// Total over the day: every time maps to exactly one span.
const std::string& map_time_span(int ftime, const TemporalConfig& cfg);

// Holiday when listed in the calendar or falling on a weekend.
DayNature map_day_nature(Date date, const TemporalConfig& cfg);

// Shannon entropy in bits of the destination-choice distribution.
// Throws DataError when there are no visits at all.
double compute_entropy(const std::map<int, int>& dest_counts);

DestinationRates accidental_potential_rates(const IndividualProfile& profile);

// One profile per vehicle with at least one observed trip, sorted by id.
std::vector<IndividualProfile> build_profiles(const std::vector<TripRecord>& observed,
                                              const std::vector<TripRecord>& future);

FilterResult filter_low_predictability(const std::vector<IndividualProfile>& profiles,
                                       const FilterThresholds& thresholds);

// Profile round-trip for the pipeline stage artifacts.
void write_profiles(std::ostream& out, const std::vector<IndividualProfile>& profiles);
std::vector<IndividualProfile> read_profiles(std::istream& in);

}  // namespace pdpfkg

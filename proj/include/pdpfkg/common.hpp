#pragma once
// Shared error types, calendar helpers and small utilities used across the
// pipeline modules.

#include <chrono>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pdpfkg {

// Error categories map 1:1 onto CLI exit codes (see tools/).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required upstream stage artifact is missing or inconsistent.
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Date = std::chrono::year_month_day;

// "YYYY-MM-DD" -> Date, throws DataError on malformed or non-existent dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

// Days since the civil epoch; total order for interval checks.
inline int day_number(Date d) {
    return static_cast<int>(std::chrono::sys_days{d}.time_since_epoch().count());
}

inline Date date_from_day_number(int n) {
    return Date{std::chrono::sys_days{std::chrono::days{n}}};
}

inline bool is_weekend(Date d) {
    const std::chrono::weekday wd{std::chrono::sys_days{d}};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
}

// "HH:MM:SS" -> seconds since midnight, throws DataError.
int parse_time_of_day(std::string_view text);
std::string format_time_of_day(int seconds);

// FNV-1a 64-bit, used for stage manifests and checkpoint/graph binding.
constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return h;
}

std::string hash_hex(std::uint64_t h);

// Fixed-precision double formatting so that artifacts are byte-stable.
std::string format_double(double v);

std::vector<std::string> split_fields(std::string_view line, char delim);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Seeded randomness helpers built directly on the (portable) mt19937_64
// engine, avoiding the implementation-defined std distributions so that
// seeded artifacts are stable across standard libraries.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    return n ? rng() % n : 0;
}

template <class T>
void deterministic_shuffle(std::vector<T>& values, Rng& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(values[i - 1], values[j]);
    }
}

}  // namespace pdpfkg

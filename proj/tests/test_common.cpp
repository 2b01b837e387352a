#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "pdpfkg/common.hpp"

using namespace pdpfkg;

TEST_CASE("date parsing and formatting round-trip") {
    const Date d = parse_date("2023-05-01");
    CHECK(format_date(d) == "2023-05-01");
    CHECK(format_date(parse_date("1999-12-31")) == "1999-12-31");
    CHECK(format_date(parse_date("2024-02-29")) == "2024-02-29");  // leap day
}

TEST_CASE("date parsing rejects malformed and impossible dates") {
    CHECK_THROWS_AS(parse_date("not-a-date"), DataError);
    CHECK_THROWS_AS(parse_date("2023-13-01"), DataError);
    CHECK_THROWS_AS(parse_date("2023-02-30"), DataError);
    CHECK_THROWS_AS(parse_date("2023-00-10"), DataError);
    CHECK_THROWS_AS(parse_date(""), DataError);
}

TEST_CASE("day numbers are consecutive and invertible") {
    const Date a = parse_date("2023-05-01");
    const Date b = parse_date("2023-05-02");
    CHECK(day_number(b) == day_number(a) + 1);
    CHECK(date_from_day_number(day_number(a)) == a);
}

TEST_CASE("weekend detection") {
    CHECK_FALSE(is_weekend(parse_date("2023-05-01")));  // Monday
    CHECK_FALSE(is_weekend(parse_date("2023-05-05")));  // Friday
    CHECK(is_weekend(parse_date("2023-05-06")));        // Saturday
    CHECK(is_weekend(parse_date("2023-05-07")));        // Sunday
}

TEST_CASE("time of day parsing and formatting") {
    CHECK(parse_time_of_day("00:00:00") == 0);
    CHECK(parse_time_of_day("07:30:00") == 7 * 3600 + 30 * 60);
    CHECK(parse_time_of_day("23:59:59") == 86399);
    CHECK(format_time_of_day(0) == "00:00:00");
    CHECK(format_time_of_day(27000) == "07:30:00");
    CHECK(format_time_of_day(86399) == "23:59:59");
    CHECK_THROWS_AS(parse_time_of_day("24:00:00"), DataError);
    CHECK_THROWS_AS(parse_time_of_day("7:30"), DataError);
    CHECK_THROWS_AS(parse_time_of_day("aa:bb:cc"), DataError);
    CHECK_THROWS_AS(parse_time_of_day("12:60:00"), DataError);
}

TEST_CASE("fnv1a64 matches the published reference vectors") {
    // Reference values for the 64-bit FNV-1a function.
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("fnv1a64 chains across calls") {
    const std::uint64_t whole = fnv1a64("abcdef");
    const std::uint64_t chained = fnv1a64("def", fnv1a64("abc"));
    CHECK(whole == chained);
}

TEST_CASE("hash_hex is fixed-width lowercase hex") {
    CHECK(hash_hex(0xcbf29ce484222325ull) == "cbf29ce484222325");
    CHECK(hash_hex(0) == "0000000000000000");
    CHECK(hash_hex(1) == "0000000000000001");
}

TEST_CASE("format_double is stable and compact") {
    CHECK(format_double(0.0) == "0");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(-2.0) == "-2");
    CHECK(format_double(1.0 / 3.0) == "0.333333333333");
    CHECK(format_double(1e-20) == "1e-20");
}

TEST_CASE("split_fields keeps empty fields") {
    CHECK(split_fields("a,b,,c", ',') == std::vector<std::string>{"a", "b", "", "c"});
    CHECK(split_fields("a,", ',') == std::vector<std::string>{"a", ""});
    CHECK(split_fields("", ',') == std::vector<std::string>{""});
}

TEST_CASE("trim and to_lower") {
    CHECK(trim("  x \t ") == "x");
    CHECK(trim("") == "");
    CHECK(trim("   ") == "");
    CHECK(to_lower("AbC-12") == "abc-12");
}

TEST_CASE("seeded generator is deterministic") {
    Rng a(99), b(99), c(100);
    bool all_equal = true;
    bool any_diff = false;
    for (int i = 0; i < 16; ++i) {
        const auto va = a();
        all_equal = all_equal && va == b();
        any_diff = any_diff || va != c();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform01 stays in the half-open unit interval") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double v = uniform01(rng);
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("uniform_below respects its bound") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) CHECK(uniform_below(rng, 7) < 7);
    CHECK(uniform_below(rng, 0) == 0);
    CHECK(uniform_below(rng, 1) == 0);
}

TEST_CASE("deterministic_shuffle permutes and reproduces") {
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> v2 = v1;
    const std::vector<int> sorted = v1;
    Rng a(5), b(5);
    deterministic_shuffle(v1, a);
    deterministic_shuffle(v2, b);
    CHECK(v1 == v2);
    std::vector<int> check = v1;
    std::sort(check.begin(), check.end());
    CHECK(check == sorted);
}

#include "evtpool/calendar.hpp"
#include "evtpool/data.hpp"
#include "evtpool/errors.hpp"
#include "evtpool/registry.hpp"
#include "evtpool/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace evtpool;

namespace {

std::string write_temp_csv(const std::string& body) {
    static int counter = 0;
    const std::string path = "test_input_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path);
    out << body;
    return path;
}

SwimRecord rec(const std::string& swimmer, const std::string& event, double time,
               const std::string& date) {
    SwimRecord r;
    r.swimmer_id = swimmer;
    r.event_id = event;
    r.time_s = time;
    r.date = parse_date(date);
    return r;
}

} // namespace

TEST_CASE("calendar: parsing, formatting, decimal years") {
    const Date d = parse_date("2008-06-15");
    CHECK(d.year == 2008);
    CHECK(d.month == 6);
    CHECK(d.day == 15);
    CHECK(format_date(d) == "2008-06-15");

    CHECK(is_leap_year(2008));
    CHECK(!is_leap_year(1900));
    CHECK(is_leap_year(2000));
    CHECK(days_in_year(2008) == 366);

    CHECK(decimal_year(parse_date("2001-01-01")) == doctest::Approx(2001.0));
    CHECK(decimal_year(parse_date("2019-01-01")) == doctest::Approx(2019.0));
    // 2008-07-01 is day 183 of a leap year.
    CHECK(decimal_year(parse_date("2008-07-01")) == doctest::Approx(2008.0 + 182.0 / 366.0));

    CHECK_THROWS_AS(parse_date("2008-13-01"), std::invalid_argument);
    CHECK_THROWS_AS(parse_date("2009-02-29"), std::invalid_argument);
    CHECK_THROWS_AS(parse_date("2008/01/01"), std::invalid_argument);
    CHECK_THROWS_AS(parse_date("08-01-01"), std::invalid_argument);
}

TEST_CASE("ingest_csv keeps the fastest swim per swimmer per event") {
    const auto registry = EventRegistry::standard();
    const auto path = write_temp_csv("swimmer_id,event_id,time_s,date\n"
                                     "A,100_free_M,52.10,2015-01-01\n"
                                     "A,100_free_M,51.90,2016-03-02\n"
                                     "A,100_free_M,52.00,2017-05-10\n"
                                     "B,100_free_M,50.44,2017-06-01\n");
    const auto records = ingest_csv(path, registry);
    REQUIRE(records.size() == 2);
    for (const auto& r : records) {
        if (r.swimmer_id == "A")
            CHECK(r.time_s == doctest::Approx(51.90));
    }
    std::remove(path.c_str());
}

TEST_CASE("ingest_csv edge cases and errors") {
    const auto registry = EventRegistry::standard();

    SUBCASE("empty file with valid header gives empty list") {
        const auto path = write_temp_csv("swimmer_id,event_id,time_s,date\n");
        CHECK(ingest_csv(path, registry).empty());
        std::remove(path.c_str());
    }
    SUBCASE("one row per pair is returned unchanged") {
        const auto path = write_temp_csv("swimmer_id,event_id,time_s,date\n"
                                         "A,50_free_M,21.50,2015-01-01\n"
                                         "B,50_free_M,21.70,2016-01-01\n");
        const auto records = ingest_csv(path, registry);
        CHECK(records.size() == 2);
        std::remove(path.c_str());
    }
    SUBCASE("exact duplicates collapse") {
        const auto path = write_temp_csv("swimmer_id,event_id,time_s,date\n"
                                         "A,50_free_M,21.50,2015-01-01\n"
                                         "A,50_free_M,21.50,2015-01-01\n");
        CHECK(ingest_csv(path, registry).size() == 1);
        std::remove(path.c_str());
    }
    SUBCASE("malformed row reports the line number") {
        const auto path = write_temp_csv("swimmer_id,event_id,time_s,date\n"
                                         "A,50_free_M,21.50,2015-01-01\n"
                                         "B,50_free_M,21.5,2015-01-01\n");
        try {
            ingest_csv(path, registry);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line_number == 3);
        }
        std::remove(path.c_str());
    }
    SUBCASE("unknown event and non-positive time are validation errors") {
        const auto bad_event = write_temp_csv("swimmer_id,event_id,time_s,date\n"
                                              "A,75_free_M,21.50,2015-01-01\n");
        CHECK_THROWS_AS(ingest_csv(bad_event, registry), ValidationError);
        std::remove(bad_event.c_str());
        const auto bad_time = write_temp_csv("swimmer_id,event_id,time_s,date\n"
                                             "A,50_free_M,0.00,2015-01-01\n");
        CHECK_THROWS_AS(ingest_csv(bad_time, registry), ValidationError);
        std::remove(bad_time.c_str());
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(ingest_csv("no_such_file.csv", registry), InputError);
    }
}

TEST_CASE("build_event_dataset thresholds and censor adjustment") {
    std::vector<SwimRecord> records;
    for (int i = 0; i < 200; ++i)
        records.push_back(rec("s" + std::to_string(i), "100_free_M", 46.00 + i * 0.01,
                              "2015-06-01"));
    // slowest retained time is 46.00 + 199*0.01 = 47.99; add slower ones
    records.push_back(rec("slow1", "100_free_M", 48.50, "2015-06-01"));

    const auto ds = build_event_dataset(records, "100_free_M", 200);
    CHECK(ds.points.size() == 200);
    CHECK(ds.raw_threshold_u == doctest::Approx(-47.99).epsilon(1e-12));
    CHECK(ds.threshold_u == doctest::Approx(-47.995).epsilon(1e-12));
    CHECK(ds.u_log == doctest::Approx(std::log(47.995)));
    for (const auto& p : ds.points)
        CHECK(p.x >= ds.raw_threshold_u);
    CHECK(ds.raw_threshold_u > ds.threshold_u);
}

TEST_CASE("build_event_dataset n_exceed=1 and tie-breaking") {
    SUBCASE("single exceedance") {
        std::vector<SwimRecord> records = {rec("a", "50_free_M", 50.00, "2010-01-01"),
                                           rec("b", "50_free_M", 49.00, "2011-01-01")};
        const auto ds = build_event_dataset(records, "50_free_M", 1);
        REQUIRE(ds.points.size() == 1);
        CHECK(ds.points[0].x == doctest::Approx(-49.00));
        CHECK(ds.raw_threshold_u == doctest::Approx(-49.00));
    }
    SUBCASE("ties at the boundary: earlier date, then swimmer id") {
        std::vector<SwimRecord> records = {
            rec("fast", "50_free_M", 21.00, "2010-01-01"),
            rec("z_early", "50_free_M", 21.50, "2009-01-01"),
            rec("a_late", "50_free_M", 21.50, "2012-01-01"),
            rec("b_same", "50_free_M", 21.50, "2009-01-01"),
        };
        const auto ds = build_event_dataset(records, "50_free_M", 2);
        REQUIRE(ds.points.size() == 2);
        CHECK(ds.points[0].swimmer_id == "fast");
        // among the three 21.50s: 2009 beats 2012; "b_same" < "z_early"
        CHECK(ds.points[1].swimmer_id == "b_same");
    }
    SUBCASE("insufficient data") {
        std::vector<SwimRecord> records = {rec("a", "50_free_M", 21.0, "2010-01-01")};
        CHECK_THROWS_AS(build_event_dataset(records, "50_free_M", 5), InsufficientDataError);
    }
    SUBCASE("negation round-trip is bit exact") {
        std::vector<SwimRecord> records = {rec("a", "50_free_M", 21.37, "2010-01-01")};
        const auto ds = build_event_dataset(records, "50_free_M", 1);
        CHECK(-ds.points[0].x == 21.37);
    }
}

TEST_CASE("fit_time_scaler statistics and degenerate input") {
    SUBCASE("two dates: population sd") {
        EventDataset ds;
        ds.event_id = "50_free_M";
        EventPoint p1, p2;
        p1.year = 2001.0;
        p2.year = 2019.0;
        ds.points = {p1, p2};
        const auto scaler = fit_time_scaler({ds});
        CHECK(scaler.mean == doctest::Approx(2010.0));
        CHECK(scaler.sd == doctest::Approx(9.0));
        CHECK(scaler.standardize(2001.0) == doctest::Approx(-1.0));
        CHECK(scaler.standardize(2019.0) == doctest::Approx(1.0));
        CHECK(scaler.year_boundaries.front() == doctest::Approx(2001.0));
        CHECK(scaler.year_boundaries.back() == doctest::Approx(2020.0));
    }
    SUBCASE("constant dates are degenerate") {
        EventDataset ds;
        EventPoint p;
        p.year = 2010.5;
        ds.points = {p, p, p};
        CHECK_THROWS_AS(fit_time_scaler({ds}), ValidationError);
    }
    SUBCASE("standardized values have mean 0 and variance 1") {
        EventDataset ds;
        Rng rng(42);
        for (int i = 0; i < 500; ++i) {
            EventPoint p;
            p.year = 2001.0 + 18.0 * rng.uniform();
            ds.points.push_back(p);
        }
        std::vector<EventDataset> sets = {ds};
        const auto scaler = fit_time_scaler(sets);
        apply_time_scaler(sets, scaler);
        double mean = 0.0, var = 0.0;
        for (const auto& p : sets[0].points)
            mean += p.t_std;
        mean /= 500.0;
        for (const auto& p : sets[0].points)
            var += p.t_std * p.t_std;
        var /= 500.0;
        CHECK(std::abs(mean) < 1e-12);
        CHECK(std::abs(var - 1.0) < 1e-12);
    }
}

TEST_CASE("suit_indicator classifies the epochs") {
    const SuitEpochs epochs;
    const auto f1 = suit_indicator(parse_date("2008-06-15"), epochs);
    CHECK(f1.in_epoch1);
    CHECK(!f1.in_epoch2);
    const auto f2 = suit_indicator(parse_date("2009-07-30"), epochs);
    CHECK(!f2.in_epoch1);
    CHECK(f2.in_epoch2);
    const auto f3 = suit_indicator(parse_date("2010-01-01"), epochs);
    CHECK(!f3.in_epoch1);
    CHECK(!f3.in_epoch2);

    // Partition: every date lands in exactly one of {epoch1, epoch2, neither}.
    for (int y = 2001; y <= 2019; ++y) {
        for (int m : {1, 4, 8, 12}) {
            const auto f = suit_indicator(Date{y, m, 15}, epochs);
            CHECK((static_cast<int>(f.in_epoch1) + static_cast<int>(f.in_epoch2)) <= 1);
            const bool in1 = y == 2008, in2 = y == 2009;
            CHECK(f.in_epoch1 == in1);
            CHECK(f.in_epoch2 == in2);
        }
    }
}

TEST_CASE("event registry covers the 34 canonical events") {
    const auto registry = EventRegistry::standard();
    CHECK(registry.size() == 34);
    CHECK(registry.contains("1500_free_W"));
    CHECK(registry.contains("400_medley_M"));
    CHECK(!registry.contains("300_free_M"));
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "dynrec/events.hpp"
#include "dynrec/rng.hpp"

using namespace dynrec;

namespace {

EventLog from_text(const std::string& text) {
    std::istringstream in(text);
    return ingest_events(in);
}

}  // namespace

TEST_CASE("ingest: three well-formed lines, sorted by time") {
    auto log = from_text(
        "u2\ti1\t20.5\tSecond thing\n"
        "u1\ti1\t10.0\tFirst thing\n"
        "u1\ti2\t30.0\tThird thing\n");
    REQUIRE(log.size() == 3);
    CHECK(log.events[0].timestamp == 10.0);
    CHECK(log.events[1].timestamp == 20.5);
    CHECK(log.events[2].timestamp == 30.0);
    CHECK(log.n_users() == 2);
    CHECK(log.n_items() == 2);
    // reindexing is a bijection assigned in sorted order
    CHECK(log.user_index.at("u1") == 0);
    CHECK(log.user_index.at("u2") == 1);
}

TEST_CASE("ingest: malformed line reports its 1-based number") {
    try {
        from_text("u1,i1,abc,Title\n");
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        CHECK(e.line == 1);
    }

    try {
        from_text("u1\ti1\t1.0\tok\nu2\ti2\tnotanumber\tbad\n");
        FAIL("expected IngestError");
    } catch (const IngestError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("ingest: negative timestamp is a validation error") {
    CHECK_THROWS_AS(from_text("u1\ti1\t-5.0\tTitle\n"), ValidationError);
}

TEST_CASE("ingest: duplicate records are distinct events") {
    auto log = from_text(
        "u1\ti1\t10.0\tSame\n"
        "u1\ti1\t10.0\tSame\n");
    CHECK(log.size() == 2);
}

TEST_CASE("ingest: optional header detected via non-numeric timestamp field") {
    auto log = from_text(
        "user\titem\ttimestamp\ttitle\n"
        "u1\ti1\t10.0\tThing\n");
    CHECK(log.size() == 1);
}

TEST_CASE("ingest: empty ids rejected") {
    CHECK_THROWS_AS(from_text("x\ti1\t1\tt\n\ti1\t2.0\tTitle\n"), IngestError);
    CHECK_THROWS_AS(from_text("u1\t\t2.0\tTitle\n"), IngestError);
}

TEST_CASE("temporal neighbors: worked example and strictness boundary") {
    auto log = from_text(
        "u1\ti1\t10.0\tA\n"
        "u1\ti2\t20.0\tB\n"
        "u1\ti3\t30.0\tC\n");
    TemporalAdjacency adj(log);
    const std::size_t u1 = log.user_index.at("u1");

    auto r = adj.user_neighbors(u1, 25.0, 2);
    REQUIRE(r.size() == 2);
    CHECK(r[0].node == log.item_index.at("i2"));
    CHECK(r[0].timestamp == 20.0);
    CHECK(r[1].node == log.item_index.at("i1"));
    CHECK(r[1].timestamp == 10.0);

    // strictly-before: nothing precedes 10.0
    CHECK(adj.user_neighbors(u1, 10.0, 2).empty());

    auto all = adj.user_neighbors(u1, 35.0, 5);
    REQUIRE(all.size() == 3);
    CHECK(all[0].timestamp == 30.0);
    CHECK(all[2].timestamp == 10.0);
}

TEST_CASE("temporal neighbors: unknown node returns empty, not an error") {
    auto log = from_text("u1\ti1\t10.0\tA\n");
    TemporalAdjacency adj(log);
    CHECK(adj.user_neighbors(999, 50.0, 3).empty());
}

TEST_CASE("temporal neighbors: timestamp ties broken by descending event index") {
    auto log = from_text(
        "u1\tia\t10.0\tA\n"
        "u1\tib\t10.0\tB\n"
        "u1\tic\t10.0\tC\n");
    TemporalAdjacency adj(log);
    auto r = adj.user_neighbors(log.user_index.at("u1"), 11.0, 3);
    REQUIRE(r.size() == 3);
    CHECK(r[0].event_idx > r[1].event_idx);
    CHECK(r[1].event_idx > r[2].event_idx);
}

TEST_CASE("temporal neighbors agree with a brute-force scan on 1000 random queries") {
    Rng rng(424242);
    std::ostringstream data;
    const int n_users = 12, n_items = 17, n_events = 400;
    for (int k = 0; k < n_events; ++k) {
        data << "u" << rng.uniform_int(n_users) << "\ti" << rng.uniform_int(n_items) << "\t"
             << (rng.uniform_int(200) * 0.5) << "\tt" << k << "\n";
    }
    auto log = from_text(data.str());
    TemporalAdjacency adj(log);

    for (int q = 0; q < 1000; ++q) {
        const std::size_t node = rng.uniform_int(log.n_users());
        const double t = rng.uniform(0.0, 110.0);
        const std::size_t n = 1 + rng.uniform_int(6);
        auto got = adj.user_neighbors(node, t, n);

        // oracle: linear scan over the raw sorted event list
        std::vector<NeighborRef> oracle;
        for (std::size_t k = 0; k < log.size(); ++k)
            if (log.event_user[k] == node && log.events[k].timestamp < t)
                oracle.push_back({log.event_item[k], log.events[k].timestamp, k});
        std::sort(oracle.begin(), oracle.end(), [](const NeighborRef& a, const NeighborRef& b) {
            if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
            return a.event_idx > b.event_idx;
        });
        if (oracle.size() > n) oracle.resize(n);

        REQUIRE(got.size() == oracle.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].node == oracle[i].node);
            CHECK(got[i].timestamp == oracle[i].timestamp);
            CHECK(got[i].event_idx == oracle[i].event_idx);
        }
        for (const auto& nb : got) CHECK(nb.timestamp < t);
    }
}

TEST_CASE("chronological split: floor arithmetic and partition") {
    std::ostringstream data;
    for (int k = 0; k < 10; ++k) data << "u" << k % 3 << "\ti" << k % 4 << "\t" << k << ".0\tt\n";
    auto log10 = from_text(data.str());
    auto s10 = chronological_split(log10);
    CHECK(s10.train.size() == 7);
    CHECK(s10.val.size() == 1);
    CHECK(s10.test.size() == 2);

    std::ostringstream data100;
    for (int k = 0; k < 100; ++k) data100 << "u" << k % 9 << "\ti" << k % 11 << "\t" << k << ".0\tt\n";
    auto log100 = from_text(data100.str());
    auto s100 = chronological_split(log100);
    CHECK(s100.train.size() == 70);
    CHECK(s100.val.size() == 15);
    CHECK(s100.test.size() == 15);

    // exact partition, order preserved
    CHECK(s100.train.begin == 0);
    CHECK(s100.val.begin == s100.train.end);
    CHECK(s100.test.begin == s100.val.end);
    CHECK(s100.test.end == log100.size());

    // distinct timestamps: max(train) <= min(val)
    CHECK(s100.train[s100.train.size() - 1].timestamp <= s100.val[0].timestamp);
}

TEST_CASE("chronological split: too few events") {
    auto log = from_text("u1\ti1\t1.0\ta\nu1\ti2\t2.0\tb\n");
    CHECK_THROWS_AS(chronological_split(log), SplitError);
}

TEST_CASE("causality probe counts queries and sees no violations") {
    auto log = from_text(
        "u1\ti1\t10.0\tA\n"
        "u1\ti2\t20.0\tB\n");
    TemporalAdjacency adj(log);
    CausalityProbe probe;
    adj.set_probe(&probe);
    adj.user_neighbors(0, 15.0, 5);
    adj.item_neighbors(0, 25.0, 5);
    CHECK(probe.queries.load() == 2);
    CHECK(probe.violations.load() == 0);
}

TEST_CASE("event log digest is order- and content-sensitive") {
    auto a = from_text("u1\ti1\t1.0\tx\nu1\ti2\t2.0\ty\n");
    auto b = from_text("u1\ti1\t1.0\tx\nu1\ti2\t2.0\tz\n");
    CHECK(a.digest() != b.digest());
    CHECK(a.digest() == from_text("u1\ti2\t2.0\ty\nu1\ti1\t1.0\tx\n").digest());
}

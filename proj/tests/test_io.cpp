#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "amdkd/instancegen.hpp"
#include "amdkd/io.hpp"

using namespace amdkd;

TEST_CASE("instance JSONL round-trip is bit exact, TSP and CVRP") {
    for (auto kind : {ProblemKind::TSP, ProblemKind::CVRP}) {
        DistributionSpec spec;
        spec.kind = DistributionKind::Mixed;
        InstanceRecord rec;
        rec.kind = to_string(spec.kind);
        rec.n = 9;
        rec.seed = 0xdeadbeefULL;
        rec.instance = make_instance(spec, kind, rec.n, rec.seed);
        const std::string line = instance_to_jsonl(rec);
        const auto back = instance_from_jsonl(line);
        CHECK(back.kind == rec.kind);
        CHECK(back.n == rec.n);
        CHECK(back.seed == rec.seed);
        REQUIRE(back.instance.coords.size() == rec.instance.coords.size());
        for (size_t i = 0; i < rec.instance.coords.size(); ++i) {
            CHECK(back.instance.coords[i].x == rec.instance.coords[i].x);
            CHECK(back.instance.coords[i].y == rec.instance.coords[i].y);
        }
        CHECK(back.instance.demands == rec.instance.demands);
        CHECK(back.instance.capacity == rec.instance.capacity);
        CHECK(back.instance.kind == rec.instance.kind);
        // Serializing again yields the identical line.
        CHECK(instance_to_jsonl(back) == line);
    }
}

TEST_CASE("tour JSONL round-trip") {
    TourRecord rec;
    rec.instance_ref = "uniform:8:42";
    rec.sequence = {0, 3, 1, 2};
    rec.length = 2.718281828459045;
    const auto back = tour_from_jsonl(tour_to_jsonl(rec));
    CHECK(back.instance_ref == rec.instance_ref);
    CHECK(back.sequence == rec.sequence);
    CHECK(back.length == rec.length);
}

TEST_CASE("instance_hash distinguishes instances and is stable") {
    DistributionSpec spec;
    const auto a = make_instance(spec, ProblemKind::TSP, 8, 1);
    const auto b = make_instance(spec, ProblemKind::TSP, 8, 2);
    CHECK(instance_hash(a) == instance_hash(a));
    CHECK(instance_hash(a) != instance_hash(b));
}

TEST_CASE("reference cache round-trip") {
    namespace fs = std::filesystem;
    ReferenceCache cache;
    cache.entries[123] = {4.5, true};
    cache.entries[456] = {9.25, false};
    const auto path = (fs::temp_directory_path() / "amdkd_cache_test.jsonl").string();
    cache.save(path);
    const auto back = ReferenceCache::load(path);
    CHECK(back.entries == cache.entries);
    fs::remove(path);
    CHECK_THROWS(ReferenceCache::load(path));
}

TEST_CASE("key-value config: parsing, comments, trimming") {
    const auto cfg = KeyValueConfig::parse("a = 1\n# comment\n  b=hello world \n\nc = 2.5 # tail\n");
    CHECK(cfg.get("a") == "1");
    CHECK(cfg.get("b") == "hello world");
    CHECK(cfg.get_int("a", 0) == 1);
    CHECK(cfg.get_double("c", 0.0) == 2.5);
    CHECK(cfg.get_or("missing", "dflt") == "dflt");
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK(cfg.has("a"));
    CHECK(!cfg.has("z"));
    CHECK_THROWS(cfg.get("z"));
}

TEST_CASE("key-value config: rejects malformed lines, duplicates and unknown keys") {
    CHECK_THROWS(KeyValueConfig::parse("just a line without equals\n"));
    CHECK_THROWS(KeyValueConfig::parse("a = 1\na = 2\n"));
    CHECK_THROWS(KeyValueConfig::parse("= 1\n"));
    const auto cfg = KeyValueConfig::parse("a = 1\nb = 2\n");
    CHECK_NOTHROW(cfg.reject_unknown({"a", "b", "c"}));
    CHECK_THROWS(cfg.reject_unknown({"a"}));
}

TEST_CASE("config echo re-serializes canonically") {
    const auto cfg = KeyValueConfig::parse("b = 2\na = 1\n");
    const auto echoed = KeyValueConfig::parse(cfg.echo());
    CHECK(echoed.get("a") == "1");
    CHECK(echoed.get("b") == "2");
    CHECK(echoed.echo() == cfg.echo());
}

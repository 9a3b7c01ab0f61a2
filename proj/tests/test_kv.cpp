#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mecsim/kv.hpp"

using namespace mecsim;

TEST_CASE("round trip preserves values and order") {
    KvFile kv;
    kv.set("name", "test");
    kv.set_int("count", -42);
    kv.set_double("pi", 3.141592653589793);
    kv.set_doubles("xs", {1.0, 0.1, 1e-300, -2.5e17});
    kv.set_ints("ids", {3, 1, 2});

    const std::string text = kv.serialize();
    KvFile back = KvFile::parse(text);
    CHECK(back.get("name") == "test");
    CHECK(back.get_int("count") == -42);
    CHECK(back.get_double("pi") == 3.141592653589793);
    auto xs = back.get_doubles("xs");
    REQUIRE(xs.size() == 4);
    CHECK(xs[0] == 1.0);
    CHECK(xs[1] == 0.1);
    CHECK(xs[2] == 1e-300);
    CHECK(xs[3] == -2.5e17);
    auto ids = back.get_ints("ids");
    CHECK(ids == std::vector<int>{3, 1, 2});
    // byte-identical second pass
    CHECK(back.serialize() == text);
}

TEST_CASE("comments and blank lines are skipped") {
    KvFile kv = KvFile::parse("# header\n\na=1\n# trailing\nb=two\n");
    CHECK(kv.get_int("a") == 1);
    CHECK(kv.get("b") == "two");
}

TEST_CASE("malformed and missing keys throw") {
    CHECK_THROWS(KvFile::parse("no equals sign"));
    KvFile kv;
    CHECK_THROWS(kv.get("absent"));
}

TEST_CASE("double formatting survives extremes") {
    for (double v : {0.1, 1.0 / 3.0, 6.62607015e-34, 1.7976931348623157e308}) {
        KvFile kv;
        kv.set_double("v", v);
        CHECK(KvFile::parse(kv.serialize()).get_double("v") == v);
    }
}

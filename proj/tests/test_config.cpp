#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swpdmod/config.hpp"
#include "swpdmod/errors.hpp"

using namespace swpdmod;

TEST_CASE("parsing: comments, blank lines, whitespace") {
  auto kv = KeyValueConfig::from_text(
      "# header comment\n"
      "\n"
      "  width = 64   # trailing comment\n"
      "glyph=X\n"
      "ratio = 2.5e-3\n",
      "test.cfg");
  CHECK(kv.get_int("width", 0) == 64);
  CHECK(kv.get_string("glyph", "") == "X");
  CHECK(kv.get_double("ratio", 0.0) == 2.5e-3);
  CHECK_NOTHROW(kv.finish());
}

TEST_CASE("malformed lines carry origin and line number") {
  CHECK_THROWS_WITH_AS(KeyValueConfig::from_text("a=1\nnot a pair\n", "bad.cfg"),
                       doctest::Contains("bad.cfg:2"), ConfigError);
  CHECK_THROWS_WITH_AS(KeyValueConfig::from_text("=5\n", "bad.cfg"),
                       doctest::Contains("empty key"), ConfigError);
}

TEST_CASE("duplicate keys name both lines") {
  CHECK_THROWS_WITH_AS(KeyValueConfig::from_text("k=1\nj=2\nk=3\n", "dup.cfg"),
                       doctest::Contains("dup.cfg:3"), ConfigError);
  CHECK_THROWS_WITH_AS(KeyValueConfig::from_text("k=1\nj=2\nk=3\n", "dup.cfg"),
                       doctest::Contains("line 1"), ConfigError);
}

TEST_CASE("typed getters reject unparsable values with locations") {
  auto kv = KeyValueConfig::from_text("n=4x\nf=hello\nb=maybe\nl=1,two\n", "types.cfg");
  CHECK_THROWS_WITH_AS(kv.get_int("n", 0), doctest::Contains("types.cfg:1"), ConfigError);
  CHECK_THROWS_AS(kv.get_double("f", 0.0), ConfigError);
  CHECK_THROWS_AS(kv.get_bool("b", false), ConfigError);
  CHECK_THROWS_AS(kv.get_int_list("l", {}), ConfigError);
}

TEST_CASE("boolean spellings") {
  auto kv = KeyValueConfig::from_text("a=1\nb=true\nc=yes\nd=on\ne=0\nf=false\ng=no\nh=off\n");
  for (const char* key : {"a", "b", "c", "d"}) CHECK(kv.get_bool(key, false));
  for (const char* key : {"e", "f", "g", "h"}) CHECK_FALSE(kv.get_bool(key, true));
}

TEST_CASE("lists split on commas") {
  auto kv = KeyValueConfig::from_text("ints = 5, 7, 10 , 15,20\ndoubles=0.5,1e-2\n");
  CHECK(kv.get_int_list("ints", {}) == std::vector<int>{5, 7, 10, 15, 20});
  CHECK(kv.get_double_list("doubles", {}) == std::vector<double>{0.5, 1e-2});
  CHECK(kv.get_int_list("absent", {1, 2}) == std::vector<int>{1, 2});
}

TEST_CASE("finish rejects unconsumed keys") {
  auto kv = KeyValueConfig::from_text("width=4\ntypo_key=9\n", "strict.cfg");
  CHECK(kv.get_int("width", 0) == 4);
  CHECK_THROWS_WITH_AS(kv.finish(), doctest::Contains("unknown key 'typo_key'"), ConfigError);
}

TEST_CASE("several parsers can share one file") {
  auto kv = KeyValueConfig::from_text("width=4\nmax_iters=9\n");
  CHECK(kv.get_int("width", 0) == 4);      // consumer one
  CHECK(kv.get_int("max_iters", 0) == 9);  // consumer two
  CHECK_NOTHROW(kv.finish());
}

TEST_CASE("command-line overrides beat file values") {
  auto kv = KeyValueConfig::from_text("width=4\n", "file.cfg");
  kv.set_override("width", "8");
  kv.set_override("extra", "oops");
  CHECK(kv.get_int("width", 0) == 8);
  CHECK_THROWS_WITH_AS(kv.finish(), doctest::Contains("command line"), ConfigError);
}

TEST_CASE("required keys") {
  auto kv = KeyValueConfig::from_text("present=3\n");
  CHECK(kv.require_int("present") == 3);
  CHECK_THROWS_WITH_AS(kv.require_double("absent"), doctest::Contains("missing required"),
                       ConfigError);
}

TEST_CASE("raw_entries exposes everything for metadata use") {
  auto kv = KeyValueConfig::from_text("a=1\nb=two\n");
  const auto raw = kv.raw_entries();
  CHECK(raw.at("a") == "1");
  CHECK(raw.at("b") == "two");
}

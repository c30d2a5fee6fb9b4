#include <doctest.h>

#include "support.hpp"
#include "vstylist/error.hpp"
#include "vstylist/util.hpp"

using namespace vstylist;

TEST_CASE("sha256 matches published test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const std::vector<std::uint8_t> bytes = {'a', 'b', 'c'};
  CHECK(sha256_hex(std::span<const std::uint8_t>(bytes)) == sha256_hex("abc"));
}

TEST_CASE("base64 round trip and known encodings") {
  const std::string text = "foobar";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  CHECK(base64_encode(bytes) == "Zm9vYmFy");
  const std::vector<std::uint8_t> fo = {'f', 'o'};
  CHECK(base64_encode(fo) == "Zm8=");
  CHECK(base64_decode("Zm8=") == fo);
  std::mt19937_64 rng(5);
  for (int n = 0; n < 40; ++n) {
    std::vector<std::uint8_t> v(static_cast<std::size_t>(n));
    for (auto& b : v) b = static_cast<std::uint8_t>(rng());
    CHECK(base64_decode(base64_encode(v)) == v);
  }
}

TEST_CASE("fill_template replaces only supplied keys") {
  CHECK(fill_template("a {x} b {y} {\"k\": 1}", {{"x", "1"}}) == "a 1 b {y} {\"k\": 1}");
  CHECK(fill_template("{x}{x}", {{"x", "ab"}}) == "abab");
}

TEST_CASE("first_json_object extracts embedded objects") {
  auto j = first_json_object("Score: 120 ... {\"score\":120, \"reasons\": \"a } b\"} trailing");
  REQUIRE(j);
  CHECK((*j)["score"] == 120);
  CHECK(!first_json_object("no json here"));
  CHECK(!first_json_object("[1, 2]"));
  auto nested = first_json_object("x {\"a\": {\"b\": 2}} y");
  REQUIRE(nested);
  CHECK((*nested)["a"]["b"] == 2);
  auto second = first_json_object("{not json} then {\"ok\": true}");
  REQUIRE(second);
  CHECK((*second)["ok"] == true);
}

TEST_CASE("canonical JSON is sorted with a trailing newline") {
  json j = {{"b", 1}, {"a", 2}};
  CHECK(dump_canonical(j) == "{\n  \"a\": 2,\n  \"b\": 1\n}\n");
}

TEST_CASE("atomic writes leave no temp files behind") {
  testing::TempDir dir;
  write_text_file_atomic(dir / "x.txt", "hello");
  write_text_file_atomic(dir / "x.txt", "world");
  CHECK(read_text_file(dir / "x.txt") == "world");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) entries += e.is_regular_file();
  CHECK(entries == 1);
  CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), Error);
}

TEST_CASE("trim and to_lower") {
  CHECK(trim("  a b \n") == "a b");
  CHECK(trim("") == "");
  CHECK(to_lower("Pixel ART") == "pixel art");
}

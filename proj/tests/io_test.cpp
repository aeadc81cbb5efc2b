#include "retrack/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "retrack/raster.hpp"

using retrack::Box;
using retrack::DataError;
namespace io = retrack::io;

namespace {

std::string tmp_path(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::current_path() / "io_test_tmp";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace

TEST_CASE("split and trim handle separators and padding") {
  const auto parts = io::split("a, b ,,c", ',');
  REQUIRE(parts.size() == 4);
  CHECK(parts[0] == "a");
  CHECK(io::trim(parts[1]) == "b");
  CHECK(io::trim(parts[2]).empty());
  CHECK(parts[3] == "c");
  CHECK(io::trim("  x\t ") == "x");
  CHECK(io::split("", ',').size() == 1);
}

TEST_CASE("format_double renders round numbers without noise") {
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(-3.25) == "-3.25");
  // Shortest representation that round-trips.
  const std::string text = io::format_double(0.1);
  CHECK(io::parse_double(text, "mem", 1) == 0.1);
}

TEST_CASE("parse errors carry file and line") {
  CHECK_THROWS_WITH_AS(io::parse_double("abc", "data.txt", 7),
                       "data.txt:7: expected a number, got 'abc'", DataError);
  CHECK_THROWS_AS(io::parse_int("1.5", "data.txt", 3), DataError);
  CHECK(io::parse_int(" 42 ", "data.txt", 1) == 42);
  CHECK(io::parse_double(" 2.5 ", "data.txt", 1) == 2.5);
}

TEST_CASE("for_each_data_line skips blanks and comments with true line numbers") {
  const std::string path = tmp_path("lines.txt");
  io::write_text_file(path, "# header\n\none\n  \ntwo\n");
  std::vector<std::pair<std::size_t, std::string>> seen;
  io::for_each_data_line(path, [&](std::size_t line_no, std::string_view line) {
    seen.emplace_back(line_no, std::string(line));
  });
  REQUIRE(seen.size() == 2);
  CHECK(seen[0] == std::pair<std::size_t, std::string>{3, "one"});
  CHECK(seen[1] == std::pair<std::size_t, std::string>{5, "two"});
}

TEST_CASE("missing files raise DataError") {
  CHECK_THROWS_AS(io::read_text_file(tmp_path("absent.txt")), DataError);
  CHECK_THROWS_AS(io::read_mot_gt(tmp_path("absent.txt")), DataError);
}

TEST_CASE("hashing is stable") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(io::hex64(0xdeadbeefull) == "00000000deadbeef");
}

TEST_CASE("ground-truth rows round-trip through the 9-field format") {
  std::vector<io::GtRow> rows;
  rows.push_back({1, 1, Box(10.5, 20.25, 30, 40), 1.0, 1, 1.0});
  rows.push_back({2, 7, Box(0.125, 5, 8, 9), 1.0, 1, 0.0});
  const std::string path = tmp_path("gt.txt");
  io::write_mot_gt(path, rows);

  const auto back = io::read_mot_gt(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].frame == 1);
  CHECK(back[0].id == 1);
  CHECK(back[0].box.x == 10.5);
  CHECK(back[0].box.h == 40.0);
  CHECK(back[1].visibility == 0.0);
  CHECK(back[1].cls == 1);
}

TEST_CASE("ground-truth parsing rejects malformed rows") {
  const std::string path = tmp_path("bad_gt.txt");
  io::write_text_file(path, "1,1,0,0,10,10,1,1\n");
  CHECK_THROWS_AS(io::read_mot_gt(path), DataError);
  io::write_text_file(path, "1,1,0,0,0,10,1,1,1\n");
  CHECK_THROWS_AS(io::read_mot_gt(path), DataError);
  io::write_text_file(path, "1,1,x,0,10,10,1,1,1\n");
  try {
    io::read_mot_gt(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
}

TEST_CASE("result rows round-trip with the fixed trailer") {
  std::vector<io::ResultRow> rows;
  rows.push_back({1, 3, Box(1, 2, 3, 4), 0.75});
  const std::string text = io::format_mot_results(rows);
  CHECK(text == "# frame,id,x,y,w,h,conf,-1,-1,-1\n1,3,1,2,3,4,0.75,-1,-1,-1\n");

  const std::string path = tmp_path("results.txt");
  io::write_mot_results(path, rows);
  const auto back = io::read_mot_results(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].frame == 1);
  CHECK(back[0].id == 3);
  CHECK(back[0].conf == 0.75);
  CHECK(back[0].box.w == 3.0);
}

TEST_CASE("empty results files keep the header comment") {
  const std::string path = tmp_path("empty_results.txt");
  io::write_mot_results(path, {});
  CHECK(io::read_text_file(path) == "# frame,id,x,y,w,h,conf,-1,-1,-1\n");
  CHECK(io::read_mot_results(path).empty());
}

TEST_CASE("replay rows round-trip through their line formats") {
  const std::string path = tmp_path("replay.txt");
  std::string text = "# comment\n";
  text += io::format_replay_query(4, 123, 0.875, Box(1, 2, 3, 4));
  text += io::format_replay_detect(5, 0.5, Box(9, 8, 7, 6));
  io::write_text_file(path, text);

  const io::ReplayData data = io::read_replay(path);
  REQUIRE(data.queries.size() == 1);
  REQUIRE(data.detects.size() == 1);
  CHECK(data.queries[0].frame == 4);
  CHECK(data.queries[0].anchor_id == 123);
  CHECK(data.queries[0].conf == 0.875);
  CHECK(data.queries[0].box.w == 3.0);
  CHECK(data.detects[0].frame == 5);
  CHECK(data.detects[0].conf == 0.5);
  CHECK(data.detects[0].box.x == 9.0);
}

TEST_CASE("replay parsing rejects unknown row kinds and bad arity") {
  const std::string path = tmp_path("bad_replay.txt");
  io::write_text_file(path, "X,1,2,3\n");
  CHECK_THROWS_AS(io::read_replay(path), DataError);
  io::write_text_file(path, "Q,1,2,0.5,1,2,3\n");
  CHECK_THROWS_AS(io::read_replay(path), DataError);
  io::write_text_file(path, "D,1,0.5,1,2,3\n");
  CHECK_THROWS_AS(io::read_replay(path), DataError);
}

TEST_CASE("embedding sidecars round-trip") {
  std::vector<io::EmbeddingRow> rows;
  rows.push_back({1, 2, {0.6, 0.8}});
  rows.push_back({3, 4, {1.0, 0.0}});
  const std::string path = tmp_path("embeddings.txt");
  io::write_embeddings(path, rows);
  const auto back = io::read_embeddings(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].frame == 1);
  CHECK(back[0].id == 2);
  CHECK(back[0].values == retrack::Embedding{0.6, 0.8});
  CHECK(back[1].values == retrack::Embedding{1.0, 0.0});
}

TEST_CASE("pgm images round-trip byte for byte") {
  retrack::Raster img(7, 5, 0);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) img.at(x, y) = static_cast<std::uint8_t>(x * 40 + y);
  const std::string path = tmp_path("img.pgm");
  io::write_pgm(path, img);
  const retrack::Raster back = io::read_pgm(path);
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("pgm reader rejects foreign or truncated input") {
  const std::string path = tmp_path("not_pgm.txt");
  io::write_text_file(path, "P2\n2 2\n255\n0 0 0 0\n");
  CHECK_THROWS_AS(io::read_pgm(path), DataError);
  io::write_text_file(path, "P5\n4 4\n255\nxx");
  CHECK_THROWS_AS(io::read_pgm(path), DataError);
}

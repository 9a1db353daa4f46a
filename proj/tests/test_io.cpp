#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "actdist/error.hpp"
#include "actdist/io.hpp"
#include "test_support.hpp"

using namespace actdist;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("actdist_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name, std::ios::binary) << text;
    return path / name;
  }
};

std::string error_of(auto&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("parse_csv") {
  std::istringstream in("\xEF\xBB\xBF" "a,b,c\r\n1,\"x,y\",3\r\n\r\n4,\"say \"\"hi\"\"\",6\n");
  const auto t = io::parse_csv(in, "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "x,y");
  CHECK(t.rows[1][1] == "say \"hi\"");
  CHECK(t.line == std::vector<std::size_t>{2, 4});
  CHECK(t.column("c") == 2);
  CHECK_FALSE(t.has_column("d"));
  CHECK_THROWS_WITH_AS(t.column("d"), "missing column 'd'", Error);

  std::istringstream ragged("a,b\n1,2\n3\n");
  CHECK(error_of([&] { io::parse_csv(ragged, "r.csv"); }) == "r.csv:3: expected 2 fields, found 1");
  std::istringstream dup("a,a\n");
  CHECK_THROWS_AS(io::parse_csv(dup, "d.csv"), Error);
  std::istringstream empty("");
  CHECK_THROWS_AS(io::parse_csv(empty, "e.csv"), Error);
  CHECK_THROWS_AS(io::read_csv("/nonexistent/file.csv"), IoError);
}

TEST_CASE("format_number round-trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) / (1 + i);
    CHECK(std::stod(io::format_number(v)) == v);
  }
  CHECK(io::format_number(2.0) == "2");
  CHECK(io::format_number(0.5) == "0.5");
}

TEST_CASE("load_cohort") {
  TempDir dir;
  const auto subjects = dir.write("subjects.csv",
                                  "subject_id,survey_weight,age,sex\n"
                                  "a,2.5,70,F\n"
                                  "b,1,81,M\n");
  const auto readings = dir.write("readings.csv",
                                  "subject_id,timestamp_min,count\n"
                                  "a,1,5\n"
                                  "b,0,0\n"
                                  "a,0,3\n"
                                  "b,1,0\n");
  const auto cohort = io::load_cohort(readings, subjects);
  REQUIRE(cohort.size() == 2);
  CHECK(cohort[0].subject_id == "a");
  CHECK(cohort[0].readings == std::vector<double>{3, 5});
  CHECK(cohort[0].timestamps == std::vector<double>{0, 1});
  CHECK(cohort[0].survey_weight == 2.5);
  CHECK(cohort[0].covariates.at("age") == 70);
  CHECK(cohort[0].labels.at("sex") == "F");
  CHECK(cohort[1].readings == std::vector<double>{0, 0});

  SUBCASE("round trip through the writers") {
    std::ostringstream r;
    std::ostringstream s;
    io::write_readings(r, cohort);
    io::write_subjects(s, cohort);
    const auto r2 = dir.write("r2.csv", r.str());
    const auto s2 = dir.write("s2.csv", s.str());
    const auto back = io::load_cohort(r2, s2);
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].readings == cohort[i].readings);
      CHECK(back[i].timestamps == cohort[i].timestamps);
      CHECK(back[i].covariates == cohort[i].covariates);
      CHECK(back[i].labels == cohort[i].labels);
      CHECK(back[i].survey_weight == cohort[i].survey_weight);
    }
  }
  SUBCASE("malformed rows name the line") {
    const auto neg = dir.write("neg.csv", "subject_id,timestamp_min,count\na,0,1\na,1,-4\n");
    CHECK(error_of([&] { io::load_cohort(neg, subjects); }) == neg.string() + ":3: negative count");
    const auto text = dir.write("txt.csv", "subject_id,timestamp_min,count\na,0,abc\n");
    CHECK(error_of([&] { io::load_cohort(text, subjects); }).find(":2:") != std::string::npos);
    const auto twice = dir.write("twice.csv", "subject_id,timestamp_min,count\na,0,1\na,0,2\nb,0,1\n");
    CHECK_THROWS_AS(io::load_cohort(twice, subjects), Error);
    const auto stranger = dir.write("stranger.csv", "subject_id,timestamp_min,count\nz,0,1\n");
    CHECK_THROWS_AS(io::load_cohort(stranger, subjects), Error);
    const auto zero_w = dir.write("zw.csv", "subject_id,survey_weight\na,0\nb,1\n");
    CHECK_THROWS_AS(io::load_cohort(readings, zero_w), Error);
    const auto missing = dir.write("missing.csv", "subject_id,timestamp_min,count\na,0,1\n");
    CHECK_THROWS_AS(io::load_cohort(missing, subjects), Error);
  }
  CHECK_THROWS_AS(io::load_cohort(dir.path / "nope.csv", subjects), IoError);
}

TEST_CASE("quantile tables") {
  TempDir dir;
  std::mt19937_64 rng(2);
  io::QuantileTable t;
  for (int i = 0; i < 4; ++i) {
    t.subject_ids.push_back("s" + std::to_string(i));
    t.grids.push_back(actdist::testing::random_grid(rng, 7));
  }
  std::ostringstream out;
  io::write_quantiles(out, t);
  CHECK(out.str().rfind("subject_id,t_1,t_2,", 0) == 0);
  const auto back = io::read_quantiles(dir.write("q.csv", out.str()));
  CHECK(back.subject_ids == t.subject_ids);
  for (std::size_t i = 0; i < 4; ++i) CHECK(back.grids[i] == t.grids[i]);

  const auto bad = dir.write("bad.csv", "subject_id,t_1,t_2\na,2,1\n");
  CHECK(error_of([&] { io::read_quantiles(bad); }).find(":2:") != std::string::npos);
}

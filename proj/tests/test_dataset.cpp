#include "ixfdr/dataset.hpp"
#include "ixfdr/error.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <fstream>

using namespace ixfdr;
using namespace ixfdr::testing;

namespace {

std::filesystem::path write_file(const std::string& name, const std::string& body) {
  const auto path = temp_dir("dataset_" + name) / "data.csv";
  std::ofstream(path) << body;
  return path;
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("ingest a three-column regression file") {
  const auto path = write_file("abc", "a,b,y\n1,2,3\n4,5,6\n7,8,9.5\n0.1,0.2,0.3\n");
  const Dataset d = ingest_csv(path, "y", Task::kRegression);
  CHECK(d.p() == 2);
  CHECK(d.n() == 4);
  CHECK(d.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(d.y(2) == 9.5);
  CHECK(d.n_train == 2);
  // Response column need not be last.
  const Dataset first = ingest_csv(path, "a", Task::kRegression);
  CHECK(first.feature_names == std::vector<std::string>{"b", "y"});
}

TEST_CASE("missing response column lists what is available") {
  const auto path = write_file("missing", "a,b,y\n1,2,3\n4,5,6\n");
  const std::string msg = message_of([&] { ingest_csv(path, "target", Task::kRegression); });
  CHECK(msg.find("target") != std::string::npos);
  CHECK(msg.find("a, b, y") != std::string::npos);
  CHECK_THROWS_AS(ingest_csv(path, "target", Task::kRegression), DataError);
}

TEST_CASE("binary response must be 0/1, with the row reported") {
  const auto path = write_file("binary", "a,y\n0.5,1\n0.2,0\n0.9,2\n");
  const std::string msg = message_of([&] { ingest_csv(path, "y", Task::kBinary); });
  // Row numbers are file line numbers, header included.
  CHECK(msg.find("row 4") != std::string::npos);
  const auto ok = write_file("binary_ok", "a,y\n0.5,1\n0.2,0\n");
  CHECK(ingest_csv(ok, "y", Task::kBinary).task == Task::kBinary);
}

TEST_CASE("malformed cells are rejected with row numbers") {
  CHECK(message_of([&] { read_csv(write_file("na", "a,b\n1,2\nNA,3\n")); }).find("rows 3") != std::string::npos);
  CHECK_THROWS_AS(read_csv(write_file("empty", "a,b\n1,\n")), DataError);
  CHECK_THROWS_AS(read_csv(write_file("ragged", "a,b\n1,2,3\n")), DataError);
  CHECK_THROWS_AS(read_csv(write_file("text", "a,b\n1,x2\n")), DataError);
  CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("CSV round trip is exact") {
  Matrix m(3, 2);
  m << 0.1, 1.0 / 3.0, -2.5e-300, 7.0, 1e17, -0.0;
  const auto path = temp_dir("dataset_roundtrip") / "m.csv";
  write_csv(path, {"u", "v"}, m);
  const Table t = read_csv(path);
  CHECK(t.columns == std::vector<std::string>{"u", "v"});
  CHECK(t.values == m);
}

TEST_CASE("name helpers and task parsing") {
  CHECK(default_feature_names(3) == std::vector<std::string>{"x1", "x2", "x3"});
  CHECK(augmented_names({"a", "b"}) == std::vector<std::string>{"a", "b", "a_ko", "b_ko"});
  CHECK(parse_task("binary") == Task::kBinary);
  CHECK(parse_task(to_string(Task::kRegression)) == Task::kRegression);
  CHECK_THROWS_AS(parse_task("poisson"), ConfigError);
}

TEST_CASE("pair classification") {
  CHECK(classify_pair(0, 1, 3) == PairClass::kOO);
  CHECK(classify_pair(0, 4, 3) == PairClass::kD);
  CHECK(classify_pair(3, 5, 3) == PairClass::kDD);
  CHECK(Pair::of(5, 2) == Pair{2, 5});
}

#include <chrono>
#include <filesystem>

#include "aomcal/error.hpp"
#include "aomcal/io.hpp"
#include "aomcal/rng.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace aomcal;
using aomcal::testing::max_abs_diff;
using aomcal::testing::random_matrix;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("aomcal_test_" + name)).string();
}

std::string error_of(const std::string& text) {
  try {
    parse_csv(text, "f.csv");
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("small CSV round trip") {
  const CsvTable t = parse_csv("id,1100,1102.5,1105\na,1,2,3\nb,-4.5,5e-3,+6\n");
  CHECK(t.header == std::vector<std::string>{"1100", "1102.5", "1105"});
  CHECK(t.ids == std::vector<std::string>{"a", "b"});
  REQUIRE(t.values.rows() == 2);
  CHECK(t.values(1, 0) == -4.5);
  CHECK(t.values(1, 1) == 5e-3);
  CHECK(t.values(1, 2) == 6.0);
  const CsvTable back = parse_csv(to_csv(t.header, t.values, t.ids));
  CHECK(back.header == t.header);
  CHECK(back.ids == t.ids);
  CHECK(max_abs_diff(back.values, t.values) == 0.0);

  const CsvTable plain = parse_csv("w1,w2\r\n0.1,0.2\r\n\r\n");
  CHECK(plain.ids.empty());
  CHECK(plain.values.rows() == 1);
}

TEST_CASE("shortest-form output round-trips every bit") {
  const Matrix m = random_matrix(20, 7, 3) * 1e-3;
  std::vector<std::string> header;
  for (int j = 0; j < 7; ++j) header.push_back("c" + std::to_string(j));
  CHECK(max_abs_diff(parse_csv(to_csv(header, m)).values, m) == 0.0);
}

TEST_CASE("CSV errors carry coordinates") {
  CHECK(error_of("a,b\n1,2\n3,NaN\n") == "f.csv: line 3, column 2: non-finite value");
  CHECK(error_of("a,b\n1,x\n") == "f.csv: line 2, column 2: non-numeric value 'x'");
  CHECK(error_of("a,b\n1,2,3\n").find("line 2") != std::string::npos);
  CHECK(error_of("a,b\n1\n").find("expected 2 fields, found 1") != std::string::npos);
  CHECK(error_of("a,b\n1,\n") == "f.csv: line 2, column 2: empty cell");
  CHECK(error_of("") == "f.csv: empty file");
  CHECK(error_of("a,b\n1,inf\n").find("non-finite") != std::string::npos);
  CHECK_THROWS_AS(load_csv("/nonexistent/aomcal.csv"), DataError);
}

TEST_CASE("1000 x 500 file loads within a second") {
  const Matrix m = random_matrix(1000, 500, 9);
  std::vector<std::string> header;
  for (int j = 0; j < 500; ++j) header.push_back(std::to_string(1000 + 2 * j));
  std::vector<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.push_back("s" + std::to_string(i));
  const std::string path = temp_path("large.csv");
  write_file_atomic(path, to_csv(header, m, ids));
  const auto t0 = std::chrono::steady_clock::now();
  const CsvTable t = load_csv(path);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::filesystem::remove(path);
  CHECK(t.values.rows() == 1000);
  CHECK(t.values.cols() == 500);
  CHECK(secs <= 1.0);
}

TEST_CASE("responses align by id or by position") {
  const CsvTable x = parse_csv("id,w1\na,1\nb,2\nc,3\n");
  const CsvTable y = parse_csv("id,y\nc,30\na,10\nb,20\n");
  const Matrix ya = align_responses(x, y);
  CHECK(ya(0, 0) == 10);
  CHECK(ya(2, 0) == 30);
  const CsvTable yp = parse_csv("y\n1\n2\n3\n");
  CHECK(align_responses(x, yp)(1, 0) == 2);
  CHECK_THROWS_AS(align_responses(x, parse_csv("y\n1\n")), DimensionError);
  CHECK_THROWS_AS(align_responses(x, parse_csv("id,y\na,1\nb,2\n")), DataError);
  CHECK(labels_from(ya) == std::vector<int>{10, 20, 30});
  CHECK_THROWS_AS(labels_from(Matrix::Constant(2, 1, 0.5)), DataError);
}

TEST_CASE("base64 against known vectors") {
  const auto enc = [](const std::string& s) {
    return base64_encode(std::vector<unsigned char>(s.begin(), s.end()));
  };
  CHECK(enc("") == "");
  CHECK(enc("f") == "Zg==");
  CHECK(enc("fo") == "Zm8=");
  CHECK(enc("foo") == "Zm9v");
  CHECK(enc("foobar") == "Zm9vYmFy");
  const auto dec = base64_decode("Zm9vYg==");
  CHECK(std::string(dec.begin(), dec.end()) == "foob");
  CHECK_THROWS_AS(base64_decode("Zm9"), DataError);
  CHECK_THROWS_AS(base64_decode("Zm=v"), DataError);
}

TEST_CASE("model file round trip is bit-exact") {
  ModelFile m;
  m.task = "classification";
  m.method = "aom_pls";
  m.operator_log = {"operator=detrend(degree=1)", "components=3"};
  m.x_mean = random_matrix(1, 6, 1).row(0);
  m.y_mean = random_matrix(1, 2, 2).row(0);
  m.coefficients = random_matrix(6, 2, 3);
  m.coefficients(0, 0) = 1.0 / 3.0;
  m.wavelengths = {"1", "2", "3", "4", "5", "6"};
  m.classes = {3, 8};
  const std::string path = temp_path("model.json");
  save_model(m, path);
  const ModelFile back = load_model(path);
  std::filesystem::remove(path);
  CHECK(back.method == m.method);
  CHECK(back.operator_log == m.operator_log);
  CHECK(back.classes == m.classes);
  CHECK(max_abs_diff(back.coefficients, m.coefficients) == 0.0);
  CHECK(max_abs_diff(back.x_mean, m.x_mean) == 0.0);
  CHECK(max_abs_diff(back.y_mean, m.y_mean) == 0.0);
  const Matrix xn = random_matrix(5, 6, 4);
  CHECK(max_abs_diff(back.predict(xn), m.predict(xn)) == 0.0);
  CHECK(back.predict_classes(xn) == m.predict_classes(xn));
  CHECK(to_json(back) == to_json(m));
}

TEST_CASE("malformed model files are data errors") {
  ModelFile m;
  m.method = "aom_ridge";
  m.x_mean = RowVector::Zero(2);
  m.y_mean = RowVector::Zero(1);
  m.coefficients = Matrix::Zero(2, 1);
  std::string j = to_json(m);
  CHECK_NOTHROW(model_from_json(j));
  CHECK_THROWS_AS(model_from_json("{"), DataError);
  CHECK_THROWS_AS(model_from_json("{}"), DataError);
  std::string bad = j;
  bad.replace(bad.find("\"format_version\": 1"), 19, "\"format_version\": 7");
  CHECK_THROWS_AS(model_from_json(bad), DataError);
  m.coefficients = Matrix::Zero(3, 1);
  CHECK_THROWS_AS(model_from_json(to_json(m)), DataError);
  CHECK_THROWS_AS(m.predict_classes(Matrix::Zero(1, 2)), ConfigError);
}

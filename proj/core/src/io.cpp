#include "aomcal/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "aomcal/aom_pls.hpp"
#include "aomcal/error.hpp"
#include "aomcal/pls.hpp"
#include "json.hpp"

namespace aomcal {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

// Splits one line on commas; quoted fields may not contain commas.
void split_fields(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void fail(const std::string& source, std::size_t line, std::size_t column,
                       const std::string& what) {
  throw DataError(source + ": line " + std::to_string(line) + ", column " + std::to_string(column) +
                  ": " + what);
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

CsvTable parse_csv(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  while (!lines.empty() && is_blank(lines.back())) lines.pop_back();
  if (lines.empty()) throw DataError(source + ": empty file");

  std::vector<std::string_view> fields;
  split_fields(lines[0], fields);
  CsvTable t;
  const bool has_id = unquote(fields[0]) == "id";
  const std::size_t first = has_id ? 1 : 0;
  for (std::size_t c = first; c < fields.size(); ++c) {
    const auto name = unquote(fields[c]);
    if (name.empty()) fail(source, 1, c + 1, "empty header cell");
    t.header.emplace_back(name);
  }
  if (t.header.empty()) fail(source, 1, 1, "no value columns");
  const std::size_t width = fields.size();

  std::size_t rows = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) rows += !is_blank(lines[l]);
  t.values.resize(static_cast<Index>(rows), static_cast<Index>(t.header.size()));
  if (has_id) t.ids.reserve(rows);

  Index r = 0;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (is_blank(lines[l])) continue;
    split_fields(lines[l], fields);
    if (fields.size() != width)
      fail(source, l + 1, std::min(fields.size(), width) + 1,
           "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    if (has_id) t.ids.emplace_back(unquote(fields[0]));
    for (std::size_t c = first; c < width; ++c) {
      std::string_view cell = trim(fields[c]);
      if (cell.empty()) fail(source, l + 1, c + 1, "empty cell");
      if (cell.front() == '+') cell.remove_prefix(1);
      double v = 0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        fail(source, l + 1, c + 1, "non-numeric value '" + std::string(trim(fields[c])) + "'");
      if (!std::isfinite(v)) fail(source, l + 1, c + 1, "non-finite value");
      t.values(r, static_cast<Index>(c - first)) = v;
    }
    ++r;
  }
  return t;
}

CsvTable load_csv(const std::string& path) { return parse_csv(read_file(path), path); }

Matrix align_responses(const CsvTable& spectra, const CsvTable& responses) {
  const Index n = spectra.values.rows();
  if (spectra.ids.empty() || responses.ids.empty()) {
    if (responses.values.rows() != n)
      throw DimensionError("responses: " + std::to_string(responses.values.rows()) +
                           " rows for " + std::to_string(n) + " spectra");
    return responses.values;
  }
  std::unordered_map<std::string, Index> index;
  for (Index i = 0; i < responses.values.rows(); ++i)
    if (!index.emplace(responses.ids[static_cast<std::size_t>(i)], i).second)
      throw DataError("responses: duplicate id '" + responses.ids[static_cast<std::size_t>(i)] + "'");
  Matrix y(n, responses.values.cols());
  for (Index i = 0; i < n; ++i) {
    const auto& id = spectra.ids[static_cast<std::size_t>(i)];
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("responses: no row for id '" + id + "'");
    y.row(i) = responses.values.row(it->second);
  }
  return y;
}

std::vector<int> labels_from(const Matrix& y) {
  if (y.cols() != 1) throw DataError("labels: expected one column, got " + std::to_string(y.cols()));
  std::vector<int> out(static_cast<std::size_t>(y.rows()));
  for (Index i = 0; i < y.rows(); ++i) {
    const double v = y(i, 0);
    if (v != std::round(v) || std::abs(v) > 1e9)
      throw DataError("labels: row " + std::to_string(i + 1) + " is not an integer class id");
    out[static_cast<std::size_t>(i)] = static_cast<int>(v);
  }
  return out;
}

std::string to_csv(const std::vector<std::string>& header, const Matrix& values,
                   const std::vector<std::string>& ids) {
  std::string out;
  out.reserve(static_cast<std::size_t>(values.size()) * 24 + 64);
  if (!ids.empty()) out += "id,";
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c) out += ',';
    out += header[c];
  }
  out += '\n';
  char buf[32];
  for (Index i = 0; i < values.rows(); ++i) {
    if (!ids.empty()) {
      out += ids[static_cast<std::size_t>(i)];
      out += ',';
    }
    for (Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      // Shortest round-trip form.
      const auto res = std::to_chars(buf, buf + sizeof buf, values(i, j));
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw DataError(path + ": write failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError(path + ": rename failed: " + ec.message());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string base64_encode(const std::vector<unsigned char>& bytes) {
  namespace it = boost::archive::iterators;
  using Enc = it::base64_from_binary<it::transform_width<const unsigned char*, 6, 8>>;
  std::string out(Enc(bytes.data()), Enc(bytes.data() + bytes.size()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  namespace it = boost::archive::iterators;
  using Dec = it::transform_width<it::binary_from_base64<const char*>, 8, 6>;
  if (text.size() % 4 != 0) throw DataError("base64: length is not a multiple of 4");
  std::string s(text);
  std::size_t pad = 0;
  while (!s.empty() && s.back() == '=' && pad < 2) {
    s.pop_back();
    ++pad;
  }
  if (s.find('=') != std::string::npos) throw DataError("base64: misplaced padding");
  try {
    std::vector<unsigned char> out(Dec(s.data()), Dec(s.data() + s.size()));
    return out;
  } catch (const std::exception&) {
    throw DataError("base64: invalid character");
  }
}

Matrix ModelFile::predict(const Matrix& xnew) const {
  return predict_linear(coefficients, x_mean, y_mean, xnew);
}

std::vector<int> ModelFile::predict_classes(const Matrix& xnew) const {
  if (task != "classification") throw ConfigError("model: predict_classes on a " + task + " model");
  return argmax_classes(predict(xnew), classes);
}

namespace {

std::vector<unsigned char> pack_doubles(const Matrix& m) {
  std::vector<unsigned char> bytes(static_cast<std::size_t>(m.size()) * 8);
  std::size_t k = 0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      auto bits = std::bit_cast<std::uint64_t>(m(i, j));
      for (int b = 0; b < 8; ++b) bytes[k++] = static_cast<unsigned char>(bits >> (8 * b));
    }
  return bytes;
}

Matrix unpack_doubles(const std::vector<unsigned char>& bytes, Index rows, Index cols) {
  if (bytes.size() != static_cast<std::size_t>(rows * cols) * 8)
    throw DataError("model: coefficient block holds " + std::to_string(bytes.size()) +
                    " bytes, expected " + std::to_string(rows * cols * 8));
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[k++]) << (8 * b);
      m(i, j) = std::bit_cast<double>(bits);
    }
  return m;
}

nlohmann::json row_json(const RowVector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

RowVector row_from(const nlohmann::json& j, const char* field) {
  if (!j.is_array()) throw DataError(std::string("model: field '") + field + "' must be an array");
  RowVector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

}  // namespace

std::string to_json(const ModelFile& m) {
  nlohmann::json j;
  j["format_version"] = m.format_version;
  j["task"] = m.task;
  j["method"] = m.method;
  j["operator_log"] = m.operator_log;
  j["x_mean"] = row_json(m.x_mean);
  j["y_mean"] = row_json(m.y_mean);
  j["coefficients"] = {{"rows", m.coefficients.rows()},
                       {"cols", m.coefficients.cols()},
                       {"encoding", "base64-f64le-rowmajor"},
                       {"data", base64_encode(pack_doubles(m.coefficients))}};
  j["wavelengths"] = m.wavelengths;
  if (m.task == "classification") j["classes"] = m.classes;
  return j.dump(2) + "\n";
}

ModelFile model_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("model: ") + e.what());
  }
  ModelFile m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != ModelFile::kFormatVersion)
      throw DataError("model: unsupported format_version " + std::to_string(m.format_version));
    m.task = j.at("task").get<std::string>();
    if (m.task != "regression" && m.task != "classification")
      throw DataError("model: unknown task '" + m.task + "'");
    m.method = j.at("method").get<std::string>();
    m.operator_log = j.at("operator_log").get<std::vector<std::string>>();
    m.x_mean = row_from(j.at("x_mean"), "x_mean");
    m.y_mean = row_from(j.at("y_mean"), "y_mean");
    const auto& c = j.at("coefficients");
    if (c.at("encoding").get<std::string>() != "base64-f64le-rowmajor")
      throw DataError("model: unknown coefficient encoding");
    const auto rows = c.at("rows").get<Index>(), cols = c.at("cols").get<Index>();
    m.coefficients = unpack_doubles(base64_decode(c.at("data").get<std::string>()), rows, cols);
    m.wavelengths = j.at("wavelengths").get<std::vector<std::string>>();
    if (m.task == "classification") m.classes = j.at("classes").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: ") + e.what());
  }
  if (m.coefficients.rows() != m.x_mean.size() || m.coefficients.cols() != m.y_mean.size())
    throw DataError("model: coefficient shape does not match the stored means");
  if (m.task == "classification" && m.classes.size() != static_cast<std::size_t>(m.y_mean.size()))
    throw DataError("model: class list does not match the output count");
  return m;
}

void save_model(const ModelFile& m, const std::string& path) { write_file_atomic(path, to_json(m)); }

ModelFile load_model(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return model_from_json(text);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace aomcal

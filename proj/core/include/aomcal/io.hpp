#pragma once

// CSV ingestion and the portable model file.

#include <string>
#include <string_view>
#include <vector>

#include "aomcal/types.hpp"

namespace aomcal {

struct CsvTable {
  Matrix values;                    // rows x columns, every cell finite
  std::vector<std::string> header;  // value column names (wavelengths for spectra)
  std::vector<std::string> ids;     // empty when the file has no `id` column
};

/// Rectangular numeric CSV whose first row is the header. A first column named
/// `id` is kept as strings. Errors are DataErrors naming the 1-based line and column.
CsvTable parse_csv(std::string_view text, const std::string& source = "<memory>");
CsvTable load_csv(const std::string& path);

/// Responses in spectra row order. Rows are matched by id when both tables
/// carry ids, by position otherwise.
Matrix align_responses(const CsvTable& spectra, const CsvTable& responses);

/// Integer class ids from a single response column.
std::vector<int> labels_from(const Matrix& y);

std::string to_csv(const std::vector<std::string>& header, const Matrix& values,
                   const std::vector<std::string>& ids = {});

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string base64_encode(const std::vector<unsigned char>& bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

struct ModelFile {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::string task = "regression";  // regression | classification
  std::string method;               // aom_pls | aom_ridge | fastaom
  std::vector<std::string> operator_log;
  RowVector x_mean;
  RowVector y_mean;
  Matrix coefficients;  // p x q on the original grid
  std::vector<std::string> wavelengths;
  std::vector<int> classes;  // output column j predicts classes[j]

  Matrix predict(const Matrix& xnew) const;
  /// Argmax over the outputs; classification models only.
  std::vector<int> predict_classes(const Matrix& xnew) const;
};

/// JSON with the coefficient block as base64 of little-endian row-major doubles.
std::string to_json(const ModelFile& m);
ModelFile model_from_json(std::string_view text);

void save_model(const ModelFile& m, const std::string& path);
ModelFile load_model(const std::string& path);

}  // namespace aomcal

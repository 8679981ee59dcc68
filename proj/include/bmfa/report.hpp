#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bmfa {

/// Shortest text that parses back to exactly `v`; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

/// Strict decimal parse of a whole field. Throws ValidationError otherwise.
double parse_double(const std::string& text);

/// Row-oriented CSV table with a header. Fields containing commas, quotes
/// or newlines are quoted.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& row(std::vector<std::string> fields);
  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& data() const { return rows_; }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

  /// Parses CSV text without quoted newlines. Throws ValidationError on ragged rows.
  static CsvTable parse(const std::string& text);
  static CsvTable read(const std::filesystem::path& path);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes `text` to `path`, creating parent directories. Throws std::runtime_error on I/O failure.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Draw table: columns "chain", "draw", then one column per variable.
struct DrawTable {
  std::vector<std::string> names;
  std::vector<int> chain;
  Eigen::MatrixXd values;  // one row per draw
};

DrawTable read_draws(const std::filesystem::path& path);

}  // namespace bmfa

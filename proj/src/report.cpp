#include "bmfa/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "bmfa/error.hpp"

namespace bmfa {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of negative zero
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) throw ValidationError("not a number: '" + text + "'");
  return v;
}

namespace {

std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw ValidationError("CSV table needs at least one column");
}

CsvTable& CsvTable::row(std::vector<std::string> fields) {
  if (fields.size() != header_.size())
    throw ValidationError("CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                          std::to_string(header_.size()));
  rows_.push_back(std::move(fields));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += quote(fields[i]);
    }
    out += '\n';
  };
  emit(header_);
  for (const auto& r : rows_) emit(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

CsvTable CsvTable::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<std::string>> lines;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(split_line(line));
  }
  if (lines.empty()) throw ValidationError("CSV file has no header");
  CsvTable table(lines.front());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != table.header_.size())
      throw ValidationError("CSV line " + std::to_string(i + 1) + " has the wrong number of fields");
    table.rows_.push_back(std::move(lines[i]));
  }
  return table;
}

CsvTable CsvTable::read(const std::filesystem::path& path) { return parse(read_text(path)); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DrawTable read_draws(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ValidationError("missing draws file " + path.string() + "; run sample first");
  CsvTable table = CsvTable::read(path);
  const auto& header = table.header();
  if (header.size() < 3 || header[0] != "chain" || header[1] != "draw")
    throw ValidationError(path.string() + " is not a draws file");
  DrawTable out;
  out.names.assign(header.begin() + 2, header.end());
  out.values.resize(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(out.names.size()));
  for (std::size_t r = 0; r < table.rows(); ++r) {
    const auto& fields = table.data()[r];
    out.chain.push_back(static_cast<int>(parse_double(fields[0])));
    for (std::size_t j = 0; j < out.names.size(); ++j)
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = parse_double(fields[j + 2]);
  }
  return out;
}

}  // namespace bmfa

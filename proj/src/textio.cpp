#include "qab/textio.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace qab {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

CsvWriter::CsvWriter(const std::string& path) : file_(open_output(path)), os_(&file_) {}

CsvWriter::CsvWriter(std::ostream& os) : os_(&os) {}

void CsvWriter::header(std::initializer_list<std::string_view> cols) {
  bool first = true;
  for (auto c : cols) {
    if (!first) *os_ << ',';
    *os_ << c;
    first = false;
  }
  *os_ << '\n';
}

void CsvWriter::header(const std::vector<std::string>& cols) {
  for (std::size_t i = 0; i < cols.size(); ++i) *os_ << (i ? "," : "") << cols[i];
  *os_ << '\n';
}

void CsvWriter::row(std::initializer_list<double> values) {
  row(std::vector<double>(values));
}

void CsvWriter::row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) *os_ << ',';
    *os_ << format_double(values[i]);
  }
  *os_ << '\n';
}

void CsvWriter::row(const Eigen::Ref<const Eigen::VectorXd>& values) {
  row(std::vector<double>(values.data(), values.data() + values.size()));
}

int CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) return t;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) r.push_back(std::stod(cell));
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace qab

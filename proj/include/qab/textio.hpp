#pragma once

#include <Eigen/Core>

#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace qab {

/// Shortest round-trip decimal representation, independent of locale.
std::string format_double(double x);

/// Minimal CSV writer; every number goes through format_double.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);
  explicit CsvWriter(std::ostream& os);

  void header(std::initializer_list<std::string_view> cols);
  void header(const std::vector<std::string>& cols);
  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);
  void row(const Eigen::Ref<const Eigen::VectorXd>& values);

 private:
  std::ofstream file_;
  std::ostream* os_;
};

/// Parses a CSV with a header row into named numeric columns.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(std::string_view name) const;  // -1 when missing
};

CsvTable read_csv(const std::string& path);

/// Throws std::runtime_error with the path on failure.
std::ofstream open_output(const std::string& path);

}  // namespace qab

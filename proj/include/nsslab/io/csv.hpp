#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace nsslab::io {

/// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
std::string format_double(double value);

/// Minimal CSV emitter: a header line, then rows of numbers.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  void row(const std::vector<double>& values);
  void row(const Eigen::Ref<const Eigen::VectorXd>& values);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

/// Columns of `series` become CSV rows: row k is (index k, series(:, k)).
void write_series_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                      const Eigen::MatrixXd& columns);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace nsslab::io

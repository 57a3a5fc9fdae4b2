#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcma/model.hpp"

namespace pcma {

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

/// Headered numeric CSV. Parse errors name the source, the 1-based data row
/// (the header is not counted) and the 1-based column.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);

/// Values are written with 17 significant digits so a round trip is exact.
void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const Matrix& values);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& values);

struct LoadedData {
  DataSet data;
  std::vector<std::string> x_names, m_names, w_names;
  std::string y_name;
};

/// One file per block. Without a covariate file W is the intercept column;
/// a covariate file whose first column is not all ones gets one prepended.
LoadedData load_dataset(const std::string& x_path, const std::string& m_path,
                        const std::optional<std::string>& w_path,
                        const std::string& y_path);

/// Writes X.csv, M.csv, W.csv and Y.csv into `dir`.
void save_dataset(const std::string& dir, const DataSet& data);

}  // namespace pcma

#include "pcma/csv_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pcma {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(std::string s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(
        start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t row, std::size_t col,
                             const std::string& what) {
  std::ostringstream msg;
  msg << source << ": row " << row << ", column " << col << ": " << what;
  throw Error(ErrorCode::kParseError, msg.str());
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    for (auto& h : split(line)) t.header.push_back(unquote(h));
    have_header = true;
    break;
  }
  if (!have_header) throw Error(ErrorCode::kParseError, source + ": missing header line");
  const std::size_t cols = t.header.size();

  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++rows;
    const auto cells = split(line);
    if (cells.size() != cols) {
      std::ostringstream what;
      what << "expected " << cols << " fields, found " << cells.size();
      parse_fail(source, rows, std::min(cells.size(), cols) + 1, what.str());
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string& cell = cells[c];
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      if (!cell.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (cell.empty() || ec != std::errc() || ptr != last)
        parse_fail(source, rows, c + 1, "non-numeric value '" + cell + "'");
      flat.push_back(v);
    }
  }
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      t.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          flat[r * cols + c];
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_csv(in, path);
}

void write_csv(std::ostream& out, const std::vector<std::string>& header,
               const Matrix& values) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols())
    throw Error(ErrorCode::kDimensionMismatch, "CSV header and value columns differ");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  char buf[64];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, values(r, c),
                                     std::chars_format::general, 17);
      if (c) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& values) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  write_csv(out, header, values);
}

LoadedData load_dataset(const std::string& x_path, const std::string& m_path,
                        const std::optional<std::string>& w_path,
                        const std::string& y_path) {
  LoadedData ld;
  CsvTable x = read_csv(x_path);
  CsvTable m = read_csv(m_path);
  CsvTable y = read_csv(y_path);
  if (y.values.cols() != 1)
    throw Error(ErrorCode::kDimensionMismatch,
                y_path + ": outcome file must have exactly one column");
  ld.data.X = std::move(x.values);
  ld.data.M = std::move(m.values);
  ld.data.Y = y.values.col(0);
  ld.x_names = std::move(x.header);
  ld.m_names = std::move(m.header);
  ld.y_name = y.header.front();
  const Eigen::Index n = ld.data.Y.size();
  if (w_path) {
    CsvTable w = read_csv(*w_path);
    const bool has_intercept =
        w.values.cols() > 0 && w.values.rows() == n && (w.values.col(0).array() == 1.0).all();
    if (has_intercept) {
      ld.data.W = std::move(w.values);
      ld.w_names = std::move(w.header);
    } else {
      ld.data.W.resize(w.values.rows(), w.values.cols() + 1);
      ld.data.W << Matrix::Ones(w.values.rows(), 1), w.values;
      ld.w_names.push_back("(intercept)");
      for (auto& h : w.header) ld.w_names.push_back(std::move(h));
    }
  } else {
    ld.data.W = Matrix::Ones(n, 1);
    ld.w_names = {"(intercept)"};
  }
  validate(ld.data);
  return ld;
}

namespace {

std::vector<std::string> names(const char* prefix, Eigen::Index count) {
  std::vector<std::string> v;
  for (Eigen::Index i = 0; i < count; ++i) v.push_back(prefix + std::to_string(i + 1));
  return v;
}

}  // namespace

void save_dataset(const std::string& dir, const DataSet& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_csv((fs::path(dir) / "X.csv").string(), names("x", data.p()), data.X);
  write_csv((fs::path(dir) / "M.csv").string(), names("m", data.q()), data.M);
  write_csv((fs::path(dir) / "W.csv").string(), names("w", data.s()), data.W);
  write_csv((fs::path(dir) / "Y.csv").string(), {"y"}, data.Y);
}

}  // namespace pcma

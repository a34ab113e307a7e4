#include "lotus/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "lotus/errors.hpp"
#include "lotus/rng.hpp"

namespace lotus {

namespace {

bool is_missing_cell(const std::string& s) { return s.empty() || s == "NA"; }

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (errno == ERANGE || end != s.c_str() + s.size()) return false;
  out = v;
  return true;
}

// One logical CSV record, honoring quoted fields that may span lines.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in.get()) != EOF) {
    any = true;
    const char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c == '\r') {
      if (in.peek() == '\n') in.get();
      break;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

LoadResult load_csv(const std::string& path, bool has_header,
                    const std::optional<std::string>& label_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CSV file: " + path);

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  while (read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    records.push_back(fields);
  }
  if (records.empty()) throw ParseError("empty CSV file: " + path);

  std::vector<std::string> names;
  std::size_t first_data = 0;
  const std::size_t arity = records[0].size();
  if (has_header) {
    names = records[0];
    first_data = 1;
  } else {
    for (std::size_t j = 0; j < arity; ++j) names.push_back("c" + std::to_string(j));
  }

  for (std::size_t i = first_data; i < records.size(); ++i) {
    if (records[i].size() != arity) {
      throw ParseError("ragged CSV row " + std::to_string(i + 1) + " in " + path +
                       ": expected " + std::to_string(arity) + " fields, got " +
                       std::to_string(records[i].size()));
    }
  }
  if (records.size() == first_data) throw ParseError("CSV has no data rows: " + path);

  std::optional<std::size_t> label_idx;
  if (label_column) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == *label_column) label_idx = j;
    }
    if (!label_idx) {
      throw ConfigError("label column '" + *label_column + "' not found in " + path);
    }
  }

  LoadResult out;
  out.table.source_id = path;
  for (std::size_t j = 0; j < arity; ++j) {
    if (label_idx && j == *label_idx) continue;
    out.table.columns.push_back({names[j], ColumnKind::Numeric});
  }

  std::vector<double> labels;
  std::map<std::string, double> label_codes;
  for (std::size_t i = first_data; i < records.size(); ++i) {
    std::vector<std::string> row;
    std::vector<bool> miss;
    row.reserve(out.table.n_cols());
    for (std::size_t j = 0; j < arity; ++j) {
      if (label_idx && j == *label_idx) {
        double v;
        if (parse_number(records[i][j], v)) {
          labels.push_back(v);
        } else {
          auto [it, _] = label_codes.try_emplace(records[i][j],
                                                 static_cast<double>(label_codes.size()));
          labels.push_back(it->second);
        }
        continue;
      }
      row.push_back(records[i][j]);
      miss.push_back(is_missing_cell(records[i][j]));
    }
    out.table.cells.push_back(std::move(row));
    out.table.missing.push_back(std::move(miss));
  }

  // column kind: numeric iff every non-missing cell parses as a number
  for (std::size_t j = 0; j < out.table.n_cols(); ++j) {
    ColumnKind kind = ColumnKind::Numeric;
    for (std::size_t i = 0; i < out.table.n_rows(); ++i) {
      double v;
      if (!out.table.missing[i][j] && !parse_number(out.table.cells[i][j], v)) {
        kind = ColumnKind::Categorical;
        break;
      }
    }
    out.table.columns[j].kind = kind;
  }

  if (label_idx) out.labels = std::move(labels);
  return out;
}

NumericMatrix encode(const RawTable& table) {
  const std::size_t n = table.n_rows();
  if (n == 0 || table.n_cols() == 0) throw DegenerateInputError("encode: empty table");

  // expand to numeric columns: raw numerics (median-imputed) and one-hot
  // indicators in first-appearance order (missing is its own category)
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < table.n_cols(); ++j) {
    if (table.columns[j].kind == ColumnKind::Numeric) {
      std::vector<double> col(n, 0.0);
      std::vector<double> present;
      for (std::size_t i = 0; i < n; ++i) {
        if (!table.missing[i][j]) {
          parse_number(table.cells[i][j], col[i]);
          present.push_back(col[i]);
        }
      }
      if (present.empty()) continue;  // all-missing column carries nothing
      const double med = median(present);
      for (std::size_t i = 0; i < n; ++i) {
        if (table.missing[i][j]) col[i] = med;
      }
      cols.push_back(std::move(col));
    } else {
      std::vector<std::string> categories;
      std::vector<std::size_t> code(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::string key = table.missing[i][j] ? std::string() : table.cells[i][j];
        auto it = std::find(categories.begin(), categories.end(), key);
        if (it == categories.end()) {
          code[i] = categories.size();
          categories.push_back(key);
        } else {
          code[i] = static_cast<std::size_t>(it - categories.begin());
        }
      }
      for (std::size_t c = 0; c < categories.size(); ++c) {
        std::vector<double> col(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) col[i] = code[i] == c ? 1.0 : 0.0;
        cols.push_back(std::move(col));
      }
    }
  }

  Matrix data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cols[j][i];
  }
  return standardize(data, table.source_id);
}

NumericMatrix standardize(const Matrix& data, const std::string& source_id) {
  const Eigen::Index n = data.rows();
  if (n < 2) throw DegenerateInputError("standardize: need at least 2 rows");

  std::vector<Eigen::Index> keep;
  Vector mean = data.colwise().mean();
  Vector sd(data.cols());
  for (Eigen::Index j = 0; j < data.cols(); ++j) {
    sd[j] = std::sqrt((data.col(j).array() - mean[j]).square().sum() / static_cast<double>(n));
    if (sd[j] > 1e-12 * std::max(1.0, std::abs(mean[j]))) keep.push_back(j);
  }
  if (keep.empty()) {
    throw DegenerateInputError("encode: all columns constant in " + source_id);
  }

  NumericMatrix out;
  out.source_id = source_id;
  out.data.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    const Eigen::Index j = keep[k];
    out.data.col(static_cast<Eigen::Index>(k)) = (data.col(j).array() - mean[j]) / sd[j];
  }
  check_numeric_matrix(out);
  return out;
}

void check_numeric_matrix(const NumericMatrix& m) {
  if (m.n() < 2) throw DegenerateInputError("numeric matrix needs n >= 2");
  if (m.d() < 1) throw DegenerateInputError("numeric matrix needs d >= 1");
  if (!m.data.allFinite()) {
    throw DegenerateInputError("numeric matrix has non-finite entries: " + m.source_id);
  }
}

NumericMatrix subsample(const NumericMatrix& m, long cap, std::uint64_t seed) {
  if (cap < 2) throw ConfigError("subsample cap must be >= 2");
  if (m.n() <= cap) return m;
  Rng rng(derive_seed(seed, "subsample"));
  const auto idx = rng.sample_indices(static_cast<std::size_t>(m.n()),
                                      static_cast<std::size_t>(cap));
  NumericMatrix out;
  out.source_id = m.source_id;
  out.data.resize(cap, m.d());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.data.row(static_cast<Eigen::Index>(i)) = m.data.row(static_cast<Eigen::Index>(idx[i]));
  }
  return out;
}

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open matrix file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v;
      if (!parse_number(cell, v)) {
        throw ParseError("bad number at " + path + ":" + std::to_string(lineno));
      }
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      throw ParseError("ragged matrix row at " + path + ":" + std::to_string(lineno));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty matrix file: " + path);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write matrix file: " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out << buf;
      if (j + 1 < m.cols()) out << ',';
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace lotus

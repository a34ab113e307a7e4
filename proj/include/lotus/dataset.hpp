#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace lotus {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ColumnKind { Numeric, Categorical };

struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
};

// Pre-encoding table: cells kept as text, missing cells flagged. All rows
// have the arity of `columns`; kinds are inferred over the whole column.
struct RawTable {
  std::vector<RawColumn> columns;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::vector<bool>> missing;
  std::string source_id;

  std::size_t n_rows() const { return cells.size(); }
  std::size_t n_cols() const { return columns.size(); }
};

// Encoded dataset: finite n x d real matrix ready for ICA and estimators.
struct NumericMatrix {
  Matrix data;
  std::string source_id;

  Eigen::Index n() const { return data.rows(); }
  Eigen::Index d() const { return data.cols(); }
};

struct LoadResult {
  RawTable table;
  std::optional<std::vector<double>> labels;
};

// RFC-4180-style CSV: comma delimiter, double-quote escaping, optional
// header. Missing cells are "" or the literal NA. A named label column is
// split out; category labels are mapped to first-appearance integer codes.
LoadResult load_csv(const std::string& path, bool has_header,
                    const std::optional<std::string>& label_column = {});

// One-hot categoricals (first-appearance order), median-impute missing
// numerics, drop constant columns, then standardize each column to zero
// mean / unit population variance.
NumericMatrix encode(const RawTable& table);

// Checks the encode-output invariants on an arbitrary matrix: finite
// entries, n >= 2, d >= 1. Throws on violation.
void check_numeric_matrix(const NumericMatrix& m);

// Uniform row sample without replacement when n exceeds cap; identity
// otherwise. Row order of the sample follows the original matrix.
NumericMatrix subsample(const NumericMatrix& m, long cap, std::uint64_t seed);

// Column-standardize an already numeric matrix (drops constant columns).
// encode() for data that is numeric to begin with.
NumericMatrix standardize(const Matrix& data, const std::string& source_id);

Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Matrix& m);

}  // namespace lotus

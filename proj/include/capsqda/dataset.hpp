/**
 * @brief Error types and the labeled two-class dataset.
 */
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace capsqda {

using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data (bad labels, non-finite values, bad files).
class DataError : public Error {
public:
  using Error::Error;
};

/// Singular systems and other numerical breakdowns.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Invalid parameters or resource limits.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Class codes: simulation class 1 is +1, class 2 is -1.
inline constexpr int kPositive = 1;
inline constexpr int kNegative = -1;

struct Dataset {
  Eigen::MatrixXd X;   // n x p
  Eigen::VectorXd y;   // +1 / -1
  std::vector<std::string> names;

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }

  Index count(int code) const {
    Index c = 0;
    for (Index i = 0; i < y.size(); ++i) c += (y[i] == code);
    return c;
  }

  /// Checks shape, labels and finiteness. `for_fit` additionally requires
  /// n >= 2 and both classes present.
  void validate(bool for_fit = true) const {
    if (y.size() != X.rows())
      throw DataError("dataset: label count " + std::to_string(y.size()) +
                      " does not match row count " + std::to_string(X.rows()));
    if (X.cols() < 1) throw DataError("dataset: no predictor columns");
    if (!names.empty() && static_cast<Index>(names.size()) != X.cols())
      throw DataError("dataset: column name count does not match p");
    for (Index i = 0; i < y.size(); ++i)
      if (y[i] != kPositive && y[i] != kNegative)
        throw DataError("dataset: label at row " + std::to_string(i) + " is not +1/-1");
    for (Index j = 0; j < X.cols(); ++j)
      for (Index i = 0; i < X.rows(); ++i)
        if (!std::isfinite(X(i, j)))
          throw DataError("dataset: non-finite value at row " + std::to_string(i) +
                          ", column " + std::to_string(j));
    if (for_fit) {
      if (X.rows() < 2) throw DataError("dataset: need at least 2 observations");
      if (count(kPositive) == 0 || count(kNegative) == 0)
        throw DataError("dataset: both classes must be present");
    }
  }

  Dataset rows(std::span<const Index> idx) const {
    Dataset out;
    out.X.resize(static_cast<Index>(idx.size()), X.cols());
    out.y.resize(static_cast<Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.X.row(static_cast<Index>(r)) = X.row(idx[r]);
      out.y[static_cast<Index>(r)] = y[idx[r]];
    }
    out.names = names;
    return out;
  }

  Dataset columns(std::span<const Index> cols) const {
    Dataset out;
    out.X.resize(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) out.X.col(static_cast<Index>(c)) = X.col(cols[c]);
    out.y = y;
    if (!names.empty())
      for (Index c : cols) out.names.push_back(names[static_cast<std::size_t>(c)]);
    return out;
  }
};

}  // namespace capsqda

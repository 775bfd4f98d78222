#include "dpc/transition_matrix.hpp"

#include <algorithm>

#include "dpc/errors.hpp"

namespace dpc {

TransitionMatrix TransitionMatrix::identity(std::size_t n) {
  TransitionMatrix t(n);
  std::fill(t.diag_.begin(), t.diag_.end(), 1.0);
  return t;
}

double TransitionMatrix::get(std::size_t row, std::size_t col) const {
  if (row >= size() || col >= size()) throw InvalidArgument("matrix index out of range");
  if (row == col) return diag_[col];
  const auto& column = off_[col];
  auto it = std::lower_bound(column.begin(), column.end(), row,
                             [](const Entry& e, std::size_t r) { return e.row < r; });
  return (it != column.end() && it->row == row) ? it->value : 0.0;
}

void TransitionMatrix::set(std::size_t row, std::size_t col, double value) {
  if (row >= size() || col >= size()) throw InvalidArgument("matrix index out of range");
  if (row == col) {
    diag_[col] = value;
    return;
  }
  auto& column = off_[col];
  auto it = std::lower_bound(column.begin(), column.end(), row,
                             [](const Entry& e, std::size_t r) { return e.row < r; });
  const bool present = it != column.end() && it->row == row;
  if (value == 0.0) {
    if (present) column.erase(it);
  } else if (present) {
    it->value = value;
  } else {
    column.insert(it, Entry{row, value});
  }
}

std::vector<double> TransitionMatrix::multiply(std::span<const double> x) const {
  if (x.size() != size()) throw InvalidArgument("vector length must equal the matrix size");
  std::vector<double> y(size(), 0.0);
  for (std::size_t col = 0; col < size(); ++col) {
    const double xc = x[col];
    if (xc == 0.0) continue;
    y[col] += diag_[col] * xc;
    for (const auto& e : off_[col]) y[e.row] += e.value * xc;
  }
  return y;
}

double TransitionMatrix::column_sum(std::size_t col) const {
  double s = diag_[col];
  for (const auto& e : off_[col]) s += e.value;
  return s;
}

std::size_t TransitionMatrix::nonzeros() const {
  std::size_t n = off_diagonal_nonzeros();
  for (double d : diag_) n += d != 0.0;
  return n;
}

std::size_t TransitionMatrix::off_diagonal_nonzeros() const {
  std::size_t n = 0;
  for (const auto& column : off_) n += column.size();
  return n;
}

std::vector<TransitionMatrix::Triplet> TransitionMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nonzeros());
  for (std::size_t col = 0; col < size(); ++col) {
    bool diag_done = diag_[col] == 0.0;
    for (const auto& e : off_[col]) {
      if (!diag_done && e.row > col) {
        out.push_back({col, col, diag_[col]});
        diag_done = true;
      }
      out.push_back({e.row, col, e.value});
    }
    if (!diag_done) out.push_back({col, col, diag_[col]});
  }
  return out;
}

Eigen::MatrixXd TransitionMatrix::dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t col = 0; col < size(); ++col) {
    const auto c = static_cast<Eigen::Index>(col);
    m(c, c) = diag_[col];
    for (const auto& e : off_[col]) m(static_cast<Eigen::Index>(e.row), c) = e.value;
  }
  return m;
}

}  // namespace dpc

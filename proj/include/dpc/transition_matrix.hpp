#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dpc {

/// Sparse column-stochastic matrix over chain states.
///
/// Entry (to, from) is Pr{from -> to}; column `from` holds the outgoing
/// distribution of state `from`. The diagonal is stored densely, the
/// off-diagonal entries per column sorted by row.
class TransitionMatrix {
 public:
  struct Entry {
    std::size_t row;
    double value;
  };
  struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
  };

  TransitionMatrix() = default;
  explicit TransitionMatrix(std::size_t n) : diag_(n, 0.0), off_(n) {}
  static TransitionMatrix identity(std::size_t n);

  std::size_t size() const { return diag_.size(); }

  double get(std::size_t row, std::size_t col) const;
  /// Setting an off-diagonal entry to 0 removes it.
  void set(std::size_t row, std::size_t col, double value);
  double diagonal(std::size_t i) const { return diag_[i]; }
  std::span<const Entry> off_diagonal(std::size_t col) const { return off_[col]; }

  /// y = Theta x.
  std::vector<double> multiply(std::span<const double> x) const;
  double column_sum(std::size_t col) const;
  /// Stored nonzeros, diagonal included when nonzero.
  std::size_t nonzeros() const;
  std::size_t off_diagonal_nonzeros() const;

  /// Column-major list of nonzeros.
  std::vector<Triplet> triplets() const;
  Eigen::MatrixXd dense() const;

 private:
  std::vector<double> diag_;
  std::vector<std::vector<Entry>> off_;
};

}  // namespace dpc

// Moment indexing for the Lasserre hierarchy: pseudo-moment variables w_a,
// the moment matrix M^r(w) and localizing matrices M^s(p w).
#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "momenta/poly.hpp"

namespace momenta {

/// Sparse linear form sum_k coef_k * w_{id_k} over moment variables.
/// Terms are kept sorted by id with no duplicates.
class LinearForm {
 public:
  LinearForm() = default;

  void add(int id, double coef);
  LinearForm& operator+=(const LinearForm& other);
  LinearForm& operator*=(double s);

  const std::vector<std::pair<int, double>>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  double eval(const Eigen::VectorXd& w) const;

  bool operator==(const LinearForm&) const = default;

 private:
  std::vector<std::pair<int, double>> terms_;
};

class MomentIndex {
 public:
  MomentIndex() = default;
  MomentIndex(int nvars, int order);

  int nvars() const { return nvars_; }
  int order() const { return order_; }
  /// Basis z_r(x) indexing the rows of M^r(w).
  const MonomialBasis& basis() const { return basis_; }
  /// All monomials of degree <= 2r; position = moment variable id.
  const MonomialBasis& momvars() const { return momvars_; }
  int num_momvars() const { return momvars_.size(); }

  /// Moment variable for the product basis[i] * basis[j].
  int pair(int i, int j) const { return pairmap_[i * basis_.size() + j]; }
  /// Moment variable of a monomial; throws DegreeError if deg > 2r.
  int momvar(const Monomial& m) const;

  /// Riesz functional L(p) = sum c_a w_a as a linear form.
  LinearForm riesz(const Polynomial& p) const;

  /// M^r(w) for numeric moments.
  Eigen::MatrixXd moment_matrix(const Eigen::VectorXd& w) const;
  /// Leading principal block over a degree-d sub-basis (d <= r).
  Eigen::MatrixXd moment_matrix(const Eigen::VectorXd& w, int degree) const;
  /// Moments of the point mass at x: w_a = x^a.
  Eigen::VectorXd point_moments(const Eigen::VectorXd& x) const;

 private:
  int nvars_ = 0;
  int order_ = 0;
  MonomialBasis basis_;
  MonomialBasis momvars_;
  std::vector<int> pairmap_;
};

MomentIndex moment_index(int n, int r);

/// Symmetric matrix of linear forms over moment variables.
struct LocalizingMap {
  int s = 0;
  int rows = 0;
  std::vector<LinearForm> entries;  // row-major, rows x rows

  const LinearForm& at(int a, int b) const { return entries[a * rows + b]; }
  Eigen::MatrixXd evaluate(const Eigen::VectorXd& w) const;
};

/// Localizing map of p at order s: cell (a,b) = L(p * z_a * z_b).
/// Throws DegreeError when deg(p) + 2s exceeds 2r.
LocalizingMap localizing_map(const Polynomial& p, const MomentIndex& idx, int s);

/// Localizing map of a symmetric polynomial matrix P (k x k) at order s:
/// block (i,j) is the localizing map of P_ij; row index = i * |z_s| + a.
LocalizingMap localizing_map(const std::vector<std::vector<Polynomial>>& P, const MomentIndex& idx,
                             int s);

/// Relaxation order making every localizing map of order s well defined for
/// polynomials of degree <= maxdeg: ceil(maxdeg / 2) + s (at least 1).
int relaxation_order(int maxdeg, int s);

}  // namespace momenta

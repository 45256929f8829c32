// Sparse multivariate polynomials over the reals, graded-lex monomial bases
// and canonical Gram matrices.
#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "momenta/error.hpp"

namespace momenta {

/// Exponent vector of a monomial x^e = prod_j x_j^{e_j}.
class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::vector<int> exponents);
  static Monomial constant(int nvars) { return Monomial(std::vector<int>(nvars, 0)); }
  static Monomial variable(int nvars, int index);

  int nvars() const { return static_cast<int>(exps_.size()); }
  int degree() const;
  int operator[](int j) const { return exps_[j]; }
  const std::vector<int>& exponents() const { return exps_; }

  Monomial operator*(const Monomial& other) const;
  /// True if every exponent of `other` is <= the matching exponent here.
  bool divisible_by(const Monomial& other) const;
  Monomial operator/(const Monomial& other) const;

  double eval(std::span<const double> x) const;

  bool operator==(const Monomial&) const = default;

 private:
  std::vector<int> exps_;
};

/// Graded lexicographic order: lower total degree first; within a degree,
/// larger powers of earlier variables first (1, x1, x2, x1^2, x1x2, x2^2).
struct GradedLex {
  bool operator()(const Monomial& a, const Monomial& b) const;
};

struct MonomialHash {
  std::size_t operator()(const Monomial& m) const;
};

std::string to_string(const Monomial& m);

class Polynomial {
 public:
  using TermMap = std::map<Monomial, double, GradedLex>;

  explicit Polynomial(int nvars = 1);
  static Polynomial constant(int nvars, double c);
  static Polynomial variable(int nvars, int index);
  static Polynomial from_terms(int nvars, const std::vector<std::pair<Monomial, double>>& terms);

  int nvars() const { return nvars_; }
  /// Maximum term degree; 0 for the zero polynomial.
  int degree() const;
  bool is_zero() const { return terms_.empty(); }
  std::size_t num_terms() const { return terms_.size(); }
  const TermMap& terms() const { return terms_; }
  double coefficient(const Monomial& m) const;

  /// Adds c to the coefficient of m, pruning the term if it cancels.
  void add_term(const Monomial& m, double c);

  double eval(std::span<const double> x) const;
  double eval(const Eigen::VectorXd& x) const;

  /// Partial derivative with respect to variable j.
  Polynomial derivative(int j) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;

  /// 2-norm of the coefficient vector.
  double coefficient_norm() const;

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial operator+(double c) const { return *this + constant(nvars_, c); }
  Polynomial operator-(double c) const { return *this - constant(nvars_, c); }

  bool operator==(const Polynomial& other) const {
    return nvars_ == other.nvars_ && terms_ == other.terms_;
  }

 private:
  void check_nvars(const Monomial& m) const;

  int nvars_;
  TermMap terms_;
};

std::string to_string(const Polynomial& p);

/// Returns p scaled to unit coefficient 2-norm.
/// Throws InvalidArgument for the zero polynomial.
Polynomial normalize(const Polynomial& p);

double eval(const Polynomial& p, std::span<const double> x);

class MonomialBasis {
 public:
  MonomialBasis() = default;
  /// All monomials in n variables of degree <= d, in graded-lex order.
  MonomialBasis(int nvars, int maxdeg);

  int nvars() const { return nvars_; }
  int maxdeg() const { return maxdeg_; }
  int size() const { return static_cast<int>(monomials_.size()); }
  const Monomial& operator[](int i) const { return monomials_[i]; }
  const std::vector<Monomial>& monomials() const { return monomials_; }

  /// Position of m, or -1 if m is not in the basis.
  int index_of(const Monomial& m) const;
  bool contains(const Monomial& m) const { return index_of(m) >= 0; }

  /// Evaluates z_d(x).
  Eigen::VectorXd eval(const Eigen::VectorXd& x) const;

 private:
  int nvars_ = 0;
  int maxdeg_ = 0;
  std::vector<Monomial> monomials_;
  std::unordered_map<Monomial, int, MonomialHash> index_;
};

inline MonomialBasis monomial_basis(int n, int d) { return MonomialBasis(n, d); }

/// Number of monomials of degree <= d in n variables, C(n+d, d).
long long basis_size(int n, int d);

struct GramMatrix {
  MonomialBasis basis;
  Eigen::MatrixXd G;

  /// Symbolic expansion of z^T G z.
  Polynomial expand() const;
};

/// Canonical symmetric Gram matrix: each coefficient is split evenly over the
/// basis pairs (i <= j) whose product is the monomial.
GramMatrix gram_matrix(const Polynomial& p, const MonomialBasis& basis);

}  // namespace momenta

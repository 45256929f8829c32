#include "momenta/poly.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace momenta {

namespace {

constexpr double kPruneThreshold = 1e-300;

}  // namespace

Monomial::Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
  for (int e : exps_) {
    if (e < 0) throw InvalidArgument("negative exponent in monomial");
  }
}

Monomial Monomial::variable(int nvars, int index) {
  if (index < 0 || index >= nvars) throw DimensionMismatch("variable index out of range");
  std::vector<int> e(nvars, 0);
  e[index] = 1;
  return Monomial(std::move(e));
}

int Monomial::degree() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }

Monomial Monomial::operator*(const Monomial& other) const {
  if (other.nvars() != nvars()) throw DimensionMismatch("monomial variable counts differ");
  std::vector<int> e(exps_);
  for (int j = 0; j < nvars(); ++j) e[j] += other.exps_[j];
  return Monomial(std::move(e));
}

bool Monomial::divisible_by(const Monomial& other) const {
  if (other.nvars() != nvars()) return false;
  for (int j = 0; j < nvars(); ++j) {
    if (other.exps_[j] > exps_[j]) return false;
  }
  return true;
}

Monomial Monomial::operator/(const Monomial& other) const {
  if (!divisible_by(other)) throw InvalidArgument("monomial is not divisible");
  std::vector<int> e(exps_);
  for (int j = 0; j < nvars(); ++j) e[j] -= other.exps_[j];
  return Monomial(std::move(e));
}

double Monomial::eval(std::span<const double> x) const {
  double v = 1.0;
  for (int j = 0; j < nvars(); ++j) {
    for (int k = 0; k < exps_[j]; ++k) v *= x[j];
  }
  return v;
}

bool GradedLex::operator()(const Monomial& a, const Monomial& b) const {
  const int da = a.degree();
  const int db = b.degree();
  if (da != db) return da < db;
  return a.exponents() > b.exponents();
}

std::size_t MonomialHash::operator()(const Monomial& m) const {
  std::size_t h = 1469598103934665603ull;
  for (int e : m.exponents()) {
    h ^= static_cast<std::size_t>(e) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::string to_string(const Monomial& m) {
  std::ostringstream os;
  bool first = true;
  for (int j = 0; j < m.nvars(); ++j) {
    if (m[j] == 0) continue;
    if (!first) os << '*';
    os << 'x' << (j + 1);
    if (m[j] > 1) os << '^' << m[j];
    first = false;
  }
  if (first) os << '1';
  return os.str();
}

Polynomial::Polynomial(int nvars) : nvars_(nvars) {
  if (nvars < 1) throw InvalidArgument("polynomial needs at least one variable");
}

Polynomial Polynomial::constant(int nvars, double c) {
  Polynomial p(nvars);
  p.add_term(Monomial::constant(nvars), c);
  return p;
}

Polynomial Polynomial::variable(int nvars, int index) {
  Polynomial p(nvars);
  p.add_term(Monomial::variable(nvars, index), 1.0);
  return p;
}

Polynomial Polynomial::from_terms(int nvars,
                                  const std::vector<std::pair<Monomial, double>>& terms) {
  Polynomial p(nvars);
  for (const auto& [m, c] : terms) p.add_term(m, c);
  return p;
}

void Polynomial::check_nvars(const Monomial& m) const {
  if (m.nvars() != nvars_) {
    throw DimensionMismatch("monomial has " + std::to_string(m.nvars()) +
                            " exponents, polynomial has " + std::to_string(nvars_) +
                            " variables");
  }
}

int Polynomial::degree() const {
  // Terms are ordered by degree, so the last term has the maximum degree.
  return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
}

double Polynomial::coefficient(const Monomial& m) const {
  auto it = terms_.find(m);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::add_term(const Monomial& m, double c) {
  check_nvars(m);
  if (!std::isfinite(c)) throw InvalidArgument("non-finite polynomial coefficient");
  auto [it, inserted] = terms_.try_emplace(m, 0.0);
  it->second += c;
  if (std::abs(it->second) < kPruneThreshold) terms_.erase(it);
}

double Polynomial::eval(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != nvars_) {
    throw DimensionMismatch("evaluation point has " + std::to_string(x.size()) +
                            " entries, polynomial has " + std::to_string(nvars_) +
                            " variables");
  }
  double v = 0.0;
  for (const auto& [m, c] : terms_) v += c * m.eval(x);
  return v;
}

double Polynomial::eval(const Eigen::VectorXd& x) const {
  return eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

Polynomial Polynomial::derivative(int j) const {
  if (j < 0 || j >= nvars_) throw DimensionMismatch("derivative variable out of range");
  Polynomial d(nvars_);
  for (const auto& [m, c] : terms_) {
    if (m[j] == 0) continue;
    std::vector<int> e = m.exponents();
    const int power = e[j]--;
    d.add_term(Monomial(std::move(e)), c * power);
  }
  return d;
}

Eigen::VectorXd Polynomial::gradient(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(nvars_);
  for (int j = 0; j < nvars_; ++j) g[j] = derivative(j).eval(x);
  return g;
}

double Polynomial::coefficient_norm() const {
  double s = 0.0;
  for (const auto& [m, c] : terms_) s += c * c;
  return std::sqrt(s);
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  if (other.nvars_ != nvars_) throw DimensionMismatch("polynomial variable counts differ");
  for (const auto& [m, c] : other.terms_) add_term(m, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  if (other.nvars_ != nvars_) throw DimensionMismatch("polynomial variable counts differ");
  for (const auto& [m, c] : other.terms_) add_term(m, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (!std::isfinite(s)) throw InvalidArgument("non-finite scale factor");
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (std::abs(it->second) < kPruneThreshold) {
      it = terms_.erase(it);
    } else {
      ++it;
    }
  }
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.nvars() != b.nvars()) throw DimensionMismatch("polynomial variable counts differ");
  Polynomial p(a.nvars());
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) p.add_term(ma * mb, ca * cb);
  }
  return p;
}

std::string to_string(const Polynomial& p) {
  if (p.is_zero()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [m, c] : p.terms()) {
    if (!first) os << (c < 0 ? " - " : " + ");
    else if (c < 0) os << '-';
    os << std::abs(c);
    if (m.degree() > 0) os << '*' << to_string(m);
    first = false;
  }
  return os.str();
}

Polynomial normalize(const Polynomial& p) {
  const double n = p.coefficient_norm();
  if (n == 0.0) throw InvalidArgument("cannot normalize the zero polynomial");
  return p * (1.0 / n);
}

double eval(const Polynomial& p, std::span<const double> x) { return p.eval(x); }

// ---------------------------------------------------------------------------

namespace {

// Appends all exponent vectors of exactly `degree` in lex-descending order.
void enumerate_degree(int nvars, int degree, std::vector<Monomial>& out) {
  std::vector<int> e(nvars, 0);
  std::function<void(int, int)> rec = [&](int j, int remaining) {
    if (j == nvars - 1) {
      e[j] = remaining;
      out.emplace_back(e);
      return;
    }
    for (int k = remaining; k >= 0; --k) {
      e[j] = k;
      rec(j + 1, remaining - k);
    }
  };
  rec(0, degree);
}

}  // namespace

MonomialBasis::MonomialBasis(int nvars, int maxdeg) : nvars_(nvars), maxdeg_(maxdeg) {
  if (nvars < 1) throw InvalidArgument("monomial basis needs n >= 1");
  if (maxdeg < 0) throw InvalidArgument("monomial basis needs d >= 0");
  for (int d = 0; d <= maxdeg; ++d) enumerate_degree(nvars, d, monomials_);
  index_.reserve(monomials_.size());
  for (int i = 0; i < size(); ++i) index_.emplace(monomials_[i], i);
}

int MonomialBasis::index_of(const Monomial& m) const {
  auto it = index_.find(m);
  return it == index_.end() ? -1 : it->second;
}

Eigen::VectorXd MonomialBasis::eval(const Eigen::VectorXd& x) const {
  if (x.size() != nvars_) throw DimensionMismatch("basis evaluation point has wrong size");
  Eigen::VectorXd z(size());
  std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  for (int i = 0; i < size(); ++i) z[i] = monomials_[i].eval(xs);
  return z;
}

long long basis_size(int n, int d) {
  // C(n+d, d) computed incrementally; exact for the sizes used here.
  long long r = 1;
  for (int k = 1; k <= d; ++k) r = r * (n + k) / k;
  return r;
}

Polynomial GramMatrix::expand() const {
  Polynomial p(basis.nvars());
  for (int i = 0; i < basis.size(); ++i) {
    for (int j = 0; j < basis.size(); ++j) {
      if (G(i, j) != 0.0) p.add_term(basis[i] * basis[j], G(i, j));
    }
  }
  return p;
}

GramMatrix gram_matrix(const Polynomial& p, const MonomialBasis& basis) {
  if (p.nvars() != basis.nvars()) throw DimensionMismatch("polynomial and basis disagree on n");
  if (p.degree() > 2 * basis.maxdeg()) {
    throw DegreeError("polynomial of degree " + std::to_string(p.degree()) +
                      " has no Gram matrix on a degree-" + std::to_string(basis.maxdeg()) +
                      " basis");
  }
  GramMatrix g{basis, Eigen::MatrixXd::Zero(basis.size(), basis.size())};
  std::vector<std::pair<int, int>> pairs;
  for (const auto& [m, c] : p.terms()) {
    pairs.clear();
    for (int i = 0; i < basis.size(); ++i) {
      if (!m.divisible_by(basis[i])) continue;
      const int j = basis.index_of(m / basis[i]);
      if (j >= i) pairs.emplace_back(i, j);
    }
    const double share = c / static_cast<double>(pairs.size());
    for (auto [i, j] : pairs) {
      if (i == j) {
        g.G(i, i) += share;
      } else {
        g.G(i, j) += 0.5 * share;
        g.G(j, i) += 0.5 * share;
      }
    }
  }
  return g;
}

}  // namespace momenta

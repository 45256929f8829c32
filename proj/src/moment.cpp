#include "momenta/moment.hpp"

#include <algorithm>
#include <cmath>

namespace momenta {

void LinearForm::add(int id, double coef) {
  auto it = std::lower_bound(terms_.begin(), terms_.end(), id,
                             [](const auto& t, int key) { return t.first < key; });
  if (it != terms_.end() && it->first == id) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  } else if (coef != 0.0) {
    terms_.insert(it, {id, coef});
  }
}

LinearForm& LinearForm::operator+=(const LinearForm& other) {
  for (const auto& [id, c] : other.terms_) add(id, c);
  return *this;
}

LinearForm& LinearForm::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& t : terms_) t.second *= s;
  return *this;
}

double LinearForm::eval(const Eigen::VectorXd& w) const {
  double v = 0.0;
  for (const auto& [id, c] : terms_) v += c * w[id];
  return v;
}

MomentIndex::MomentIndex(int nvars, int order)
    : nvars_(nvars), order_(order), basis_(nvars, order), momvars_(nvars, 2 * order) {
  if (order < 0) throw InvalidArgument("moment order must be nonnegative");
  const int N = basis_.size();
  pairmap_.resize(static_cast<std::size_t>(N) * N);
  for (int i = 0; i < N; ++i) {
    for (int j = i; j < N; ++j) {
      const int id = momvars_.index_of(basis_[i] * basis_[j]);
      pairmap_[i * N + j] = id;
      pairmap_[j * N + i] = id;
    }
  }
}

MomentIndex moment_index(int n, int r) {
  if (r < 1) throw InvalidArgument("moment_index needs r >= 1");
  return MomentIndex(n, r);
}

int MomentIndex::momvar(const Monomial& m) const {
  const int id = momvars_.index_of(m);
  if (id < 0) {
    throw DegreeError("moment " + to_string(m) + " exceeds relaxation order " +
                      std::to_string(order_));
  }
  return id;
}

LinearForm MomentIndex::riesz(const Polynomial& p) const {
  if (p.nvars() != nvars_) throw DimensionMismatch("polynomial and moment index disagree on n");
  LinearForm f;
  for (const auto& [m, c] : p.terms()) f.add(momvar(m), c);
  return f;
}

Eigen::MatrixXd MomentIndex::moment_matrix(const Eigen::VectorXd& w) const {
  return moment_matrix(w, order_);
}

Eigen::MatrixXd MomentIndex::moment_matrix(const Eigen::VectorXd& w, int degree) const {
  if (w.size() != num_momvars()) throw DimensionMismatch("moment vector has wrong size");
  if (degree < 0 || degree > order_) throw InvalidArgument("sub-moment degree out of range");
  const int N = static_cast<int>(basis_size(nvars_, degree));
  Eigen::MatrixXd M(N, N);
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) M(i, j) = w[pair(i, j)];
  }
  return M;
}

Eigen::VectorXd MomentIndex::point_moments(const Eigen::VectorXd& x) const {
  return momvars_.eval(x);
}

Eigen::MatrixXd LocalizingMap::evaluate(const Eigen::VectorXd& w) const {
  Eigen::MatrixXd M(rows, rows);
  for (int a = 0; a < rows; ++a) {
    for (int b = 0; b < rows; ++b) M(a, b) = at(a, b).eval(w);
  }
  return M;
}

namespace {

LinearForm shifted_riesz(const Polynomial& p, const Monomial& shift, const MomentIndex& idx) {
  LinearForm f;
  for (const auto& [m, c] : p.terms()) {
    const Monomial prod = m * shift;
    const int id = idx.momvars().index_of(prod);
    if (id < 0) {
      throw DegreeError("localizing map needs moment " + to_string(prod) +
                        " beyond relaxation order " + std::to_string(idx.order()));
    }
    f.add(id, c);
  }
  return f;
}

}  // namespace

LocalizingMap localizing_map(const Polynomial& p, const MomentIndex& idx, int s) {
  if (s < 0) throw InvalidArgument("localizing order must be nonnegative");
  if (p.nvars() != idx.nvars()) throw DimensionMismatch("polynomial and moment index disagree on n");
  if (p.degree() + 2 * s > 2 * idx.order()) {
    throw DegreeError("localizing map of degree-" + std::to_string(p.degree()) +
                      " polynomial at order " + std::to_string(s) +
                      " needs relaxation order >= " + std::to_string((p.degree() + 1) / 2 + s));
  }
  const MonomialBasis zs(idx.nvars(), s);
  LocalizingMap L;
  L.s = s;
  L.rows = zs.size();
  L.entries.resize(static_cast<std::size_t>(L.rows) * L.rows);
  for (int a = 0; a < L.rows; ++a) {
    for (int b = a; b < L.rows; ++b) {
      LinearForm f = shifted_riesz(p, zs[a] * zs[b], idx);
      L.entries[b * L.rows + a] = f;
      L.entries[a * L.rows + b] = std::move(f);
    }
  }
  return L;
}

LocalizingMap localizing_map(const std::vector<std::vector<Polynomial>>& P, const MomentIndex& idx,
                             int s) {
  const int k = static_cast<int>(P.size());
  if (k == 0) throw InvalidArgument("empty polynomial matrix");
  for (const auto& row : P) {
    if (static_cast<int>(row.size()) != k) throw DimensionMismatch("polynomial matrix is not square");
  }
  const MonomialBasis zs(idx.nvars(), s);
  const int N = zs.size();
  LocalizingMap L;
  L.s = s;
  L.rows = k * N;
  L.entries.resize(static_cast<std::size_t>(L.rows) * L.rows);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) {
      if (!(P[i][j] == P[j][i])) throw InvalidArgument("polynomial matrix is not symmetric");
      const LocalizingMap block = localizing_map(P[i][j], idx, s);
      for (int a = 0; a < N; ++a) {
        for (int b = 0; b < N; ++b) {
          const int r = i * N + a;
          const int c = j * N + b;
          L.entries[r * L.rows + c] = block.at(a, b);
          L.entries[c * L.rows + r] = block.at(a, b);
        }
      }
    }
  }
  return L;
}

int relaxation_order(int maxdeg, int s) {
  if (s < 0) throw InvalidArgument("relaxation order s must be nonnegative");
  return std::max(1, (maxdeg + 1) / 2 + s);
}

}  // namespace momenta

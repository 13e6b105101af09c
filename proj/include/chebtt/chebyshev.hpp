#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chebtt/errors.hpp"
#include "chebtt/layout.hpp"

namespace chebtt {

template <typename Scalar = double>
struct Interval {
  Scalar lo;
  Scalar hi;

  Interval(Scalar lo_, Scalar hi_) : lo(lo_), hi(hi_) {
    if (!(std::isfinite(lo) && std::isfinite(hi)) || !(lo < hi)) {
      std::ostringstream os;
      os << "Interval requires finite lo < hi, got [" << lo_ << ", " << hi_ << "]";
      throw ConfigError(os.str());
    }
  }

  [[nodiscard]] Scalar width() const { return hi - lo; }
  [[nodiscard]] Scalar midpoint() const { return (lo + hi) / Scalar(2); }
  [[nodiscard]] bool contains(Scalar x) const { return x >= lo && x <= hi; }

  // Affine map to the reference interval [-1, 1] and back.
  [[nodiscard]] Scalar to_unit(Scalar x) const { return (Scalar(2) * x - lo - hi) / width(); }
  [[nodiscard]] Scalar from_unit(Scalar u) const { return midpoint() + u * width() / Scalar(2); }
};

// Chebyshev points of the second kind (interval extrema included), returned in
// ascending order. The sin form keeps the set exactly symmetric about the
// midpoint; the endpoints are pinned to lo/hi so they are reproduced exactly.
template <typename Scalar = double>
[[nodiscard]] Eigen::VectorX<Scalar> chebyshev_points(Index count, Interval<Scalar> iv) {
  if (count < 2) throw ConfigError("chebyshev_points requires count >= 2");
  const Scalar mid = iv.midpoint();
  const Scalar hw = iv.width() / Scalar(2);
  const Scalar n1 = static_cast<Scalar>(count - 1);
  Eigen::VectorX<Scalar> x(count);
  for (Index j = 0; j < count; ++j) {
    const Scalar k = static_cast<Scalar>(2 * j - (count - 1));
    x[j] = mid + hw * std::sin(std::numbers::pi_v<Scalar> * k / (Scalar(2) * n1));
  }
  x[0] = iv.lo;
  x[count - 1] = iv.hi;
  return x;
}

namespace detail {

// Values of T_0..T_{n-1} at u (reference coordinates) by the three-term
// recurrence.
template <typename Scalar>
void chebyshev_t_basis(Scalar u, Eigen::VectorX<Scalar>& t) {
  const Index n = t.size();
  if (n > 0) t[0] = Scalar(1);
  if (n > 1) t[1] = u;
  for (Index k = 2; k < n; ++k) t[k] = Scalar(2) * u * t[k - 1] - t[k - 2];
}

// d/du of T_m is m * U_{m-1}; fills d[m] = m * U_{m-1}(u), d[0] = 0.
template <typename Scalar>
void chebyshev_t_derivative_basis(Scalar u, Eigen::VectorX<Scalar>& d) {
  const Index n = d.size();
  Scalar um2 = Scalar(1);       // U_0
  Scalar um1 = Scalar(2) * u;   // U_1
  if (n > 0) d[0] = Scalar(0);
  if (n > 1) d[1] = um2;
  if (n > 2) d[2] = Scalar(2) * um1;
  for (Index k = 3; k < n; ++k) {
    const Scalar uk = Scalar(2) * u * um1 - um2;  // U_{k-1}
    d[k] = static_cast<Scalar>(k) * uk;
    um2 = um1;
    um1 = uk;
  }
}

}  // namespace detail

// Cartesian product of per-dimension Chebyshev point sets. Immutable after
// construction; all evaluation helpers are const and safe to share across
// threads. Nodes are stored ascending; the nodal-to-coefficient matrices are
// built for that stored order.
template <typename Scalar = double>
class ChebyshevGrid {
 public:
  ChebyshevGrid(std::vector<Interval<Scalar>> domain, std::vector<Index> counts)
      : domain_(std::move(domain)), counts_(std::move(counts)) {
    if (domain_.empty() || domain_.size() != counts_.size())
      throw ConfigError("ChebyshevGrid requires one (interval, count) pair per dimension");
    nodes_.reserve(domain_.size());
    coef_.reserve(domain_.size());
    for (std::size_t k = 0; k < domain_.size(); ++k) {
      if (counts_[k] < 2) throw ConfigError("ChebyshevGrid requires count >= 2 in every dimension");
      nodes_.push_back(chebyshev_points(counts_[k], domain_[k]));
      coef_.push_back(coefficient_matrix(counts_[k]));
    }
  }

  [[nodiscard]] int dim() const { return static_cast<int>(domain_.size()); }
  [[nodiscard]] const Interval<Scalar>& interval(int k) const { return domain_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] Index count(int k) const { return counts_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] std::span<const Index> counts() const { return counts_; }
  [[nodiscard]] const Eigen::VectorX<Scalar>& nodes(int k) const { return nodes_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] std::size_t total_points() const { return total_size(counts()); }

  // Nodal values -> Chebyshev coefficients along dimension k, in stored
  // (ascending) node order.
  [[nodiscard]] const Eigen::MatrixX<Scalar>& coefficient_transform(int k) const {
    return coef_[static_cast<std::size_t>(k)];
  }

  [[nodiscard]] bool contains(std::span<const Scalar> x) const {
    if (static_cast<int>(x.size()) != dim()) return false;
    for (int k = 0; k < dim(); ++k)
      if (!interval(k).contains(x[static_cast<std::size_t>(k)])) return false;
    return true;
  }

  void require_inside(std::span<const Scalar> x) const {
    if (static_cast<int>(x.size()) != dim()) {
      std::ostringstream os;
      os << "evaluation point has " << x.size() << " coordinates, grid has " << dim();
      throw OutOfDomainError(os.str());
    }
    for (int k = 0; k < dim(); ++k) {
      if (!interval(k).contains(x[static_cast<std::size_t>(k)])) {
        std::ostringstream os;
        os << "coordinate " << k << " = " << x[static_cast<std::size_t>(k)] << " outside ["
           << interval(k).lo << ", " << interval(k).hi << "]";
        throw OutOfDomainError(os.str());
      }
    }
  }

  // Second-form barycentric weights for the value functional at x:
  // p(x) = w . values_along_dim. A point within 1e-14 * width of a node is
  // treated as the node itself, which reproduces stored values exactly.
  void value_weights(int k, Scalar x, Eigen::VectorX<Scalar>& w) const {
    const auto& xs = nodes(k);
    const Index n = xs.size();
    const Scalar tol = Scalar(1e-14) * interval(k).width();
    w.resize(n);
    for (Index j = 0; j < n; ++j) {
      if (std::abs(x - xs[j]) <= tol) {
        w.setZero();
        w[j] = Scalar(1);
        return;
      }
    }
    Scalar sum = Scalar(0);
    for (Index j = 0; j < n; ++j) {
      Scalar lam = (j % 2 == 0) ? Scalar(1) : Scalar(-1);
      if (j == 0 || j == n - 1) lam /= Scalar(2);
      const Scalar wj = lam / (x - xs[j]);
      w[j] = wj;
      sum += wj;
    }
    w /= sum;
  }

  // Weights of the derivative functional at x: p'(x) = w . values_along_dim.
  // Obtained by pushing nodal values through the coefficient transform and
  // differentiating the Chebyshev series term-by-term.
  void derivative_weights(int k, Scalar x, Eigen::VectorX<Scalar>& w) const {
    const Index n = count(k);
    const Interval<Scalar>& iv = interval(k);
    Eigen::VectorX<Scalar> d(n);
    detail::chebyshev_t_derivative_basis(iv.to_unit(x), d);
    d *= Scalar(2) / iv.width();
    w.noalias() = coefficient_transform(k).transpose() * d;
  }

 private:
  // A(m, j): contribution of the value at stored node j to coefficient m.
  // Standard cosine-transform relation for second-kind points, with end
  // values and the first/last coefficients halved.
  [[nodiscard]] static Eigen::MatrixX<Scalar> coefficient_matrix(Index n) {
    const Index N = n - 1;
    Eigen::MatrixX<Scalar> A(n, n);
    for (Index m = 0; m < n; ++m) {
      const Scalar cm = (m == 0 || m == N) ? Scalar(1) / static_cast<Scalar>(N)
                                           : Scalar(2) / static_cast<Scalar>(N);
      for (Index j = 0; j < n; ++j) {
        const Scalar wj = (j == 0 || j == N) ? Scalar(0.5) : Scalar(1);
        A(m, j) = cm * wj *
                  std::cos(static_cast<Scalar>(m) * static_cast<Scalar>(N - j) *
                           std::numbers::pi_v<Scalar> / static_cast<Scalar>(N));
      }
    }
    return A;
  }

  std::vector<Interval<Scalar>> domain_;
  std::vector<Index> counts_;
  std::vector<Eigen::VectorX<Scalar>> nodes_;
  std::vector<Eigen::MatrixX<Scalar>> coef_;
};

namespace detail {

// out <- M * fibers of `in` along dimension k (row-major layout, last
// dimension fastest). M may be rectangular (rows_out x n_k).
template <typename Scalar>
void apply_matrix_along_dim(const Eigen::VectorX<Scalar>& in, std::span<const Index> dims, int k,
                            const Eigen::MatrixX<Scalar>& M, Eigen::VectorX<Scalar>& out) {
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto uk = static_cast<std::size_t>(k);
  const Index n = dims[uk];
  std::size_t outer = 1, stride = 1;
  for (std::size_t i = 0; i < uk; ++i) outer *= static_cast<std::size_t>(dims[i]);
  for (std::size_t i = uk + 1; i < dims.size(); ++i) stride *= static_cast<std::size_t>(dims[i]);
  out.resize(static_cast<Index>(outer * static_cast<std::size_t>(M.rows()) * stride));
  for (std::size_t o = 0; o < outer; ++o) {
    Eigen::Map<const RowMat> src(in.data() + o * static_cast<std::size_t>(n) * stride, n,
                                 static_cast<Index>(stride));
    Eigen::Map<RowMat> dst(out.data() + o * static_cast<std::size_t>(M.rows()) * stride, M.rows(),
                           static_cast<Index>(stride));
    dst.noalias() = M * src;
  }
}

// Contract the trailing dimension with a weight vector; `cur` shrinks in place
// (ping-pong through `next`).
template <typename Scalar>
void contract_last_dim(Eigen::VectorX<Scalar>& cur, Index n, const Eigen::VectorX<Scalar>& w,
                       Eigen::VectorX<Scalar>& next) {
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index rows = cur.size() / n;
  Eigen::Map<const RowMat> m(cur.data(), rows, n);
  next.resize(rows);
  next.noalias() = m * w;
  cur.swap(next);
}

// Clenshaw recurrence over the trailing dimension of a coefficient tensor,
// vectorized across the leading block.
template <typename Scalar>
void clenshaw_last_dim(Eigen::VectorX<Scalar>& cur, Index n, Scalar u, Eigen::VectorX<Scalar>& b1,
                       Eigen::VectorX<Scalar>& b2, Eigen::VectorX<Scalar>& tmp) {
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Index rows = cur.size() / n;
  Eigen::Map<const RowMat> a(cur.data(), rows, n);
  b1.setZero(rows);
  b2.setZero(rows);
  for (Index k = n - 1; k >= 1; --k) {
    tmp = Scalar(2) * u * b1 - b2 + a.col(k);
    b2.swap(b1);
    b1.swap(tmp);
  }
  tmp = u * b1 - b2 + a.col(0);
  cur = tmp;
}

}  // namespace detail

// Dense tensor of values on a Chebyshev grid, row-major with the last
// dimension fastest. The Chebyshev-coefficient tensor is computed once at
// construction so all evaluation paths are const and thread-safe.
template <typename Scalar = double>
class ChebyshevTensor {
 public:
  ChebyshevTensor(ChebyshevGrid<Scalar> grid, Eigen::VectorX<Scalar> values)
      : grid_(std::move(grid)), values_(std::move(values)) {
    if (static_cast<std::size_t>(values_.size()) != grid_.total_points())
      throw ConfigError("ChebyshevTensor: value count does not match grid size");
    for (Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        std::vector<Index> multi(static_cast<std::size_t>(grid_.dim()));
        unflatten_index(grid_.counts(), static_cast<std::size_t>(i), multi);
        std::ostringstream os;
        os << "non-finite value at grid index (";
        for (std::size_t k = 0; k < multi.size(); ++k) os << (k ? "," : "") << multi[k];
        os << ")";
        throw BuildError(os.str());
      }
    }
    coefficients_ = values_;
    Eigen::VectorX<Scalar> buf;
    for (int k = 0; k < grid_.dim(); ++k) {
      detail::apply_matrix_along_dim(coefficients_, grid_.counts(), k,
                                     grid_.coefficient_transform(k), buf);
      coefficients_.swap(buf);
    }
  }

  [[nodiscard]] const ChebyshevGrid<Scalar>& grid() const { return grid_; }
  [[nodiscard]] const Eigen::VectorX<Scalar>& values() const { return values_; }
  [[nodiscard]] const Eigen::VectorX<Scalar>& coefficients() const { return coefficients_; }

 private:
  ChebyshevGrid<Scalar> grid_;
  Eigen::VectorX<Scalar> values_;
  Eigen::VectorX<Scalar> coefficients_;
};

// Evaluates f on every grid point. f receives the point coordinates; any
// non-finite result aborts the build with the offending multi-index.
template <typename Scalar = double, typename F>
[[nodiscard]] ChebyshevTensor<Scalar> build_full_tensor(ChebyshevGrid<Scalar> grid, F&& f) {
  const std::size_t total = grid.total_points();
  const int d = grid.dim();
  Eigen::VectorX<Scalar> values(static_cast<Index>(total));
  std::vector<Index> multi(static_cast<std::size_t>(d), 0);
  std::vector<Scalar> point(static_cast<std::size_t>(d));
  for (std::size_t flat = 0; flat < total; ++flat) {
    for (int k = 0; k < d; ++k)
      point[static_cast<std::size_t>(k)] = grid.nodes(k)[multi[static_cast<std::size_t>(k)]];
    const Scalar v = f(std::span<const Scalar>(point));
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "grid evaluation returned non-finite value at index (";
      for (std::size_t k = 0; k < multi.size(); ++k) os << (k ? "," : "") << multi[k];
      os << ")";
      throw BuildError(os.str());
    }
    values[static_cast<Index>(flat)] = v;
    // row-major increment, last dimension fastest
    for (int k = d - 1; k >= 0; --k) {
      auto& mk = multi[static_cast<std::size_t>(k)];
      if (++mk < grid.count(k)) break;
      mk = 0;
    }
  }
  return ChebyshevTensor<Scalar>(std::move(grid), std::move(values));
}

// Tensor-product barycentric evaluation: per-dimension second-form weights
// contracted against the value tensor. Out-of-domain points are a hard error.
template <typename Scalar>
[[nodiscard]] Scalar eval_barycentric(const ChebyshevTensor<Scalar>& t, std::span<const Scalar> x) {
  const auto& g = t.grid();
  g.require_inside(x);
  Eigen::VectorX<Scalar> cur = t.values(), next, w;
  for (int k = g.dim() - 1; k >= 0; --k) {
    g.value_weights(k, x[static_cast<std::size_t>(k)], w);
    detail::contract_last_dim(cur, g.count(k), w, next);
  }
  return cur[0];
}

// Clenshaw evaluation on the cached coefficient tensor; agrees with
// eval_barycentric to rounding.
template <typename Scalar>
[[nodiscard]] Scalar eval_clenshaw(const ChebyshevTensor<Scalar>& t, std::span<const Scalar> x) {
  const auto& g = t.grid();
  g.require_inside(x);
  Eigen::VectorX<Scalar> cur = t.coefficients(), b1, b2, tmp;
  for (int k = g.dim() - 1; k >= 0; --k) {
    const Scalar u = g.interval(k).to_unit(x[static_cast<std::size_t>(k)]);
    detail::clenshaw_last_dim(cur, g.count(k), u, b1, b2, tmp);
  }
  return cur[0];
}

// Gradient of the interpolant: one contraction per axis, swapping in the
// derivative functional for that axis.
template <typename Scalar>
[[nodiscard]] Eigen::VectorX<Scalar> eval_gradient(const ChebyshevTensor<Scalar>& t,
                                                   std::span<const Scalar> x) {
  const auto& g = t.grid();
  g.require_inside(x);
  const int d = g.dim();
  Eigen::VectorX<Scalar> grad(d), cur, next, w;
  for (int axis = 0; axis < d; ++axis) {
    cur = t.values();
    for (int k = d - 1; k >= 0; --k) {
      if (k == axis)
        g.derivative_weights(k, x[static_cast<std::size_t>(k)], w);
      else
        g.value_weights(k, x[static_cast<std::size_t>(k)], w);
      detail::contract_last_dim(cur, g.count(k), w, next);
    }
    grad[axis] = cur[0];
  }
  return grad;
}

}  // namespace chebtt

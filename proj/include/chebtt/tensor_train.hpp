#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "chebtt/chebyshev.hpp"
#include "chebtt/errors.hpp"
#include "chebtt/layout.hpp"

namespace chebtt {

// One tensor-train core, stored contiguously as its left unfolding:
// an (r_left * n) x r_right matrix whose row (a + r_left * j) holds the
// (a, j, .) fiber. slice(j) is the r_left x r_right matrix view of mode
// index j, matching the matrix-product definition of a TT entry.
template <typename Scalar = double>
struct TTCore {
  Eigen::MatrixX<Scalar> m;  // left unfolding
  Index n = 0;               // mode size

  TTCore() = default;
  TTCore(Eigen::MatrixX<Scalar> data, Index mode) : m(std::move(data)), n(mode) {
    if (n < 1 || m.rows() % n != 0) throw ConfigError("TTCore: rows must be rank_left * mode");
  }

  [[nodiscard]] Index rank_left() const { return m.rows() / n; }
  [[nodiscard]] Index rank_right() const { return m.cols(); }
  [[nodiscard]] auto slice(Index j) const { return m.middleRows(j * rank_left(), rank_left()); }
  [[nodiscard]] auto slice(Index j) { return m.middleRows(j * rank_left(), rank_left()); }
};

namespace detail {

// r_left x (n * r_right) unfolding with slices side by side.
template <typename Scalar>
[[nodiscard]] Eigen::MatrixX<Scalar> right_unfolding(const TTCore<Scalar>& c) {
  Eigen::MatrixX<Scalar> r(c.rank_left(), c.n * c.rank_right());
  for (Index j = 0; j < c.n; ++j) r.middleCols(j * c.rank_right(), c.rank_right()) = c.slice(j);
  return r;
}

template <typename Scalar>
[[nodiscard]] TTCore<Scalar> core_from_right(const Eigen::MatrixX<Scalar>& r, Index n) {
  const Index rl = r.rows(), rr = r.cols() / n;
  Eigen::MatrixX<Scalar> m(rl * n, rr);
  for (Index j = 0; j < n; ++j) m.middleRows(j * rl, rl) = r.middleCols(j * rr, rr);
  return TTCore<Scalar>(std::move(m), n);
}

// slices -> L * slice(j)
template <typename Scalar>
[[nodiscard]] TTCore<Scalar> multiply_left(const Eigen::MatrixX<Scalar>& L, const TTCore<Scalar>& c) {
  Eigen::MatrixX<Scalar> m(L.rows() * c.n, c.rank_right());
  for (Index j = 0; j < c.n; ++j) m.middleRows(j * L.rows(), L.rows()).noalias() = L * c.slice(j);
  return TTCore<Scalar>(std::move(m), c.n);
}

// slices -> slice(j) * R
template <typename Scalar>
[[nodiscard]] TTCore<Scalar> multiply_right(const TTCore<Scalar>& c, const Eigen::MatrixX<Scalar>& R) {
  return TTCore<Scalar>(c.m * R, c.n);
}

}  // namespace detail

// Tensor in TT format: entry(j_1..j_d) = C_1(j_1) * ... * C_d(j_d) with
// boundary ranks 1. Storage is O(d * n * r^2). An optional Chebyshev grid
// attaches interpolation semantics for tt_cheb_eval / tt_cheb_gradient.
template <typename Scalar = double>
class TensorTrain {
 public:
  explicit TensorTrain(std::vector<TTCore<Scalar>> cores) : cores_(std::move(cores)) {
    if (cores_.empty()) throw ConfigError("TensorTrain: needs at least one core");
    if (cores_.front().rank_left() != 1 || cores_.back().rank_right() != 1)
      throw ConfigError("TensorTrain: boundary ranks must be 1");
    for (std::size_t i = 0; i + 1 < cores_.size(); ++i)
      if (cores_[i].rank_right() != cores_[i + 1].rank_left())
        throw ConfigError("TensorTrain: rank chain mismatch between cores " + std::to_string(i) +
                          " and " + std::to_string(i + 1));
  }

  [[nodiscard]] int dim() const { return static_cast<int>(cores_.size()); }
  [[nodiscard]] Index mode_size(int i) const { return cores_[static_cast<std::size_t>(i)].n; }
  [[nodiscard]] std::vector<Index> mode_sizes() const {
    std::vector<Index> out(cores_.size());
    for (std::size_t i = 0; i < cores_.size(); ++i) out[i] = cores_[i].n;
    return out;
  }
  // r_0..r_d (boundary ranks included)
  [[nodiscard]] std::vector<Index> ranks() const {
    std::vector<Index> out(cores_.size() + 1);
    out[0] = 1;
    for (std::size_t i = 0; i < cores_.size(); ++i) out[i + 1] = cores_[i].rank_right();
    return out;
  }
  [[nodiscard]] Index max_rank() const {
    Index r = 1;
    for (const auto& c : cores_) r = std::max(r, c.rank_right());
    return r;
  }
  [[nodiscard]] const TTCore<Scalar>& core(int i) const { return cores_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] TTCore<Scalar>& core(int i) { return cores_[static_cast<std::size_t>(i)]; }
  [[nodiscard]] std::size_t value_count() const {
    std::size_t total = 0;
    for (const auto& c : cores_) total += static_cast<std::size_t>(c.m.size());
    return total;
  }

  std::optional<ChebyshevGrid<Scalar>> grid;

 private:
  std::vector<TTCore<Scalar>> cores_;
};

template <typename Scalar>
[[nodiscard]] Scalar tt_entry(const TensorTrain<Scalar>& t, std::span<const Index> multi) {
  if (static_cast<int>(multi.size()) != t.dim())
    throw ConfigError("tt_entry: index arity does not match tensor dimension");
  for (int i = 0; i < t.dim(); ++i)
    if (multi[static_cast<std::size_t>(i)] < 0 || multi[static_cast<std::size_t>(i)] >= t.mode_size(i))
      throw ConfigError("tt_entry: index out of bounds in dimension " + std::to_string(i));
  Eigen::RowVectorX<Scalar> v = t.core(0).slice(multi[0]);
  for (int i = 1; i < t.dim(); ++i) v = v * t.core(i).slice(multi[static_cast<std::size_t>(i)]);
  return v(0);
}

// <a, b> by a single left-to-right sweep of core contractions; never
// enumerates entries.
template <typename Scalar>
[[nodiscard]] Scalar tt_inner_product(const TensorTrain<Scalar>& a, const TensorTrain<Scalar>& b) {
  if (a.dim() != b.dim()) throw ConfigError("tt_inner_product: dimension mismatch");
  for (int i = 0; i < a.dim(); ++i)
    if (a.mode_size(i) != b.mode_size(i)) throw ConfigError("tt_inner_product: mode-size mismatch");
  Eigen::MatrixX<Scalar> w = Eigen::MatrixX<Scalar>::Ones(1, 1);
  for (int i = 0; i < a.dim(); ++i) {
    const auto& ca = a.core(i);
    const auto& cb = b.core(i);
    Eigen::MatrixX<Scalar> next = Eigen::MatrixX<Scalar>::Zero(ca.rank_right(), cb.rank_right());
    for (Index j = 0; j < ca.n; ++j) next.noalias() += ca.slice(j).transpose() * (w * cb.slice(j));
    w.swap(next);
  }
  return w(0, 0);
}

template <typename Scalar>
[[nodiscard]] Scalar tt_norm(const TensorTrain<Scalar>& a) {
  return std::sqrt(std::max(Scalar(0), tt_inner_product(a, a)));
}

// Dense reconstruction (row-major, last dimension fastest). Intended for
// tests and small tensors.
template <typename Scalar>
[[nodiscard]] Eigen::VectorX<Scalar> tt_to_full(const TensorTrain<Scalar>& t) {
  Eigen::MatrixX<Scalar> x = Eigen::MatrixX<Scalar>::Ones(1, 1);
  for (int i = 0; i < t.dim(); ++i) {
    const auto& c = t.core(i);
    Eigen::MatrixX<Scalar> next(x.rows() * c.n, c.rank_right());
    for (Index j = 0; j < c.n; ++j) {
      const Eigen::MatrixX<Scalar> xj = x * c.slice(j);
      for (Index row = 0; row < x.rows(); ++row) next.row(row * c.n + j) = xj.row(row);
    }
    x.swap(next);
  }
  return Eigen::VectorX<Scalar>(Eigen::Map<const Eigen::VectorX<Scalar>>(x.data(), x.rows()));
}

// Sequential SVD sweep over unfoldings. tol is relative: singular values
// below tol * (largest singular value of the first unfolding) / sqrt(d-1)
// are discarded, which keeps the overall relative Frobenius error at the
// tol level. tol = 0 keeps every strictly positive singular value.
template <typename Scalar>
[[nodiscard]] TensorTrain<Scalar> tt_from_full(std::span<const Scalar> values,
                                               std::span<const Index> dims, Scalar tol) {
  const int d = static_cast<int>(dims.size());
  if (d < 1) throw ConfigError("tt_from_full: empty dims");
  if (values.size() != total_size(dims)) throw ConfigError("tt_from_full: value count mismatch");
  std::vector<TTCore<Scalar>> cores;
  cores.reserve(static_cast<std::size_t>(d));

  // current carry: r x (remaining modes, row-major) in column-major storage
  Eigen::MatrixX<Scalar> carry(1, static_cast<Index>(values.size()));
  for (std::size_t q = 0; q < values.size(); ++q) carry(0, static_cast<Index>(q)) = values[q];

  Scalar threshold = Scalar(0);
  for (int i = 0; i < d - 1; ++i) {
    const Index n = dims[static_cast<std::size_t>(i)];
    const Index r = carry.rows();
    const Index rest = carry.cols() / n;
    // fold the mode into the rows: M(a + r*j, q) = carry(a, j*rest + q)
    Eigen::MatrixX<Scalar> M(r * n, rest);
    for (Index j = 0; j < n; ++j)
      M.middleRows(j * r, r) = carry.middleCols(j * rest, rest);
    Eigen::BDCSVD<Eigen::MatrixX<Scalar>> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (i == 0)
      threshold = (d > 1 && sv.size() > 0)
                      ? tol * sv[0] / std::sqrt(static_cast<Scalar>(d - 1))
                      : Scalar(0);
    Index k = 0;
    for (Index s = 0; s < sv.size(); ++s)
      if (sv[s] > threshold) ++k;
    k = std::max<Index>(k, 1);
    cores.emplace_back(Eigen::MatrixX<Scalar>(svd.matrixU().leftCols(k)), n);
    carry.noalias() = sv.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
  }
  // last core: carry is r x n_d; its column-major data is already the left
  // unfolding of an (r, n_d, 1) core.
  Eigen::MatrixX<Scalar> last(carry.rows() * dims[static_cast<std::size_t>(d - 1)], 1);
  std::copy(carry.data(), carry.data() + carry.size(), last.data());
  cores.emplace_back(std::move(last), dims[static_cast<std::size_t>(d - 1)]);
  return TensorTrain<Scalar>(std::move(cores));
}

template <typename Scalar>
[[nodiscard]] TensorTrain<Scalar> tt_from_full(const ChebyshevTensor<Scalar>& t, Scalar tol) {
  std::vector<Index> dims(t.grid().counts().begin(), t.grid().counts().end());
  auto tt = tt_from_full(std::span<const Scalar>(t.values().data(),
                                                 static_cast<std::size_t>(t.values().size())),
                         std::span<const Index>(dims), tol);
  tt.grid = t.grid();
  return tt;
}

// Left-orthogonalizes cores 0..d-2 in place via QR; the last core absorbs the
// triangular factors. Entries are unchanged.
template <typename Scalar>
void tt_left_orthogonalize(TensorTrain<Scalar>& t) {
  for (int i = 0; i + 1 < t.dim(); ++i) {
    auto& c = t.core(i);
    Eigen::HouseholderQR<Eigen::MatrixX<Scalar>> qr(c.m);
    const Index k = std::min(c.m.rows(), c.m.cols());
    Eigen::MatrixX<Scalar> Q = qr.householderQ() * Eigen::MatrixX<Scalar>::Identity(c.m.rows(), k);
    Eigen::MatrixX<Scalar> R =
        qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    c = TTCore<Scalar>(std::move(Q), c.n);
    t.core(i + 1) = detail::multiply_left(R, t.core(i + 1));
  }
}

// Right-orthogonalizes cores d-1..1 in place; the first core absorbs the
// factors. Entries are unchanged.
template <typename Scalar>
void tt_right_orthogonalize(TensorTrain<Scalar>& t) {
  for (int i = t.dim() - 1; i >= 1; --i) {
    const Eigen::MatrixX<Scalar> rm = detail::right_unfolding(t.core(i));
    Eigen::HouseholderQR<Eigen::MatrixX<Scalar>> qr(rm.transpose());
    const Index k = std::min(rm.rows(), rm.cols());
    Eigen::MatrixX<Scalar> Q = qr.householderQ() * Eigen::MatrixX<Scalar>::Identity(rm.cols(), k);
    Eigen::MatrixX<Scalar> R =
        qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
    t.core(i) = detail::core_from_right(Eigen::MatrixX<Scalar>(Q.transpose()), t.core(i).n);
    t.core(i - 1) = detail::multiply_right(t.core(i - 1), Eigen::MatrixX<Scalar>(R.transpose()));
  }
}

// Truncates to the given interior rank caps (r_1..r_{d-1}); with tol = 0 the
// result has ranks exactly min(cap, admissible). Right-orthogonalize, then a
// left-to-right SVD sweep.
template <typename Scalar>
[[nodiscard]] TensorTrain<Scalar> tt_round(TensorTrain<Scalar> t, std::span<const Index> rank_caps,
                                           Scalar tol = Scalar(0)) {
  if (static_cast<int>(rank_caps.size()) != t.dim() - 1)
    throw ConfigError("tt_round: need one rank cap per interior bond");
  tt_right_orthogonalize(t);
  for (int i = 0; i + 1 < t.dim(); ++i) {
    auto& c = t.core(i);
    Eigen::BDCSVD<Eigen::MatrixX<Scalar>> svd(c.m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    Index k = std::min<Index>(rank_caps[static_cast<std::size_t>(i)], sv.size());
    if (tol > Scalar(0)) {
      const Scalar cut = tol * (sv.size() ? sv[0] : Scalar(0));
      Index kk = 0;
      for (Index s = 0; s < sv.size(); ++s)
        if (sv[s] > cut) ++kk;
      k = std::min(k, std::max<Index>(kk, 1));
    }
    k = std::max<Index>(k, 1);
    c = TTCore<Scalar>(Eigen::MatrixX<Scalar>(svd.matrixU().leftCols(k)), c.n);
    const Eigen::MatrixX<Scalar> carry =
        sv.head(k).asDiagonal() * svd.matrixV().leftCols(k).transpose();
    t.core(i + 1) = detail::multiply_left(carry, t.core(i + 1));
  }
  return t;
}

namespace detail {

// Contract each core with a per-dimension weight vector: M_i = sum_j w_j slice(j).
template <typename Scalar>
[[nodiscard]] Eigen::MatrixX<Scalar> weighted_core(const TTCore<Scalar>& c,
                                                   const Eigen::VectorX<Scalar>& w) {
  Eigen::MatrixX<Scalar> m = Eigen::MatrixX<Scalar>::Zero(c.rank_left(), c.rank_right());
  for (Index j = 0; j < c.n; ++j)
    if (w[j] != Scalar(0)) m.noalias() += w[j] * c.slice(j);
  return m;
}

}  // namespace detail

// Interpolant evaluation for a grid-carrying TT: per-dimension barycentric
// weight vectors contracted into each core, then one matrix-product chain.
// Cost O(d n r^2); no dense reconstruction.
template <typename Scalar>
[[nodiscard]] Scalar tt_cheb_eval(const TensorTrain<Scalar>& t, std::span<const Scalar> x) {
  if (!t.grid) throw ConfigError("tt_cheb_eval: tensor has no grid attached");
  const auto& g = *t.grid;
  g.require_inside(x);
  Eigen::VectorX<Scalar> w;
  Eigen::MatrixX<Scalar> v = Eigen::MatrixX<Scalar>::Ones(1, 1);
  for (int i = 0; i < t.dim(); ++i) {
    g.value_weights(i, x[static_cast<std::size_t>(i)], w);
    v = v * detail::weighted_core(t.core(i), w);
  }
  return v(0, 0);
}

// Gradient of the TT interpolant via prefix/suffix products of the weighted
// cores, swapping in the derivative functional one dimension at a time.
template <typename Scalar>
[[nodiscard]] Eigen::VectorX<Scalar> tt_cheb_gradient(const TensorTrain<Scalar>& t,
                                                      std::span<const Scalar> x) {
  if (!t.grid) throw ConfigError("tt_cheb_gradient: tensor has no grid attached");
  const auto& g = *t.grid;
  g.require_inside(x);
  const int d = t.dim();
  std::vector<Eigen::MatrixX<Scalar>> value_m(static_cast<std::size_t>(d));
  std::vector<Eigen::MatrixX<Scalar>> deriv_m(static_cast<std::size_t>(d));
  Eigen::VectorX<Scalar> w;
  for (int i = 0; i < d; ++i) {
    g.value_weights(i, x[static_cast<std::size_t>(i)], w);
    value_m[static_cast<std::size_t>(i)] = detail::weighted_core(t.core(i), w);
    g.derivative_weights(i, x[static_cast<std::size_t>(i)], w);
    deriv_m[static_cast<std::size_t>(i)] = detail::weighted_core(t.core(i), w);
  }
  // suffix[i] = M_i * ... * M_{d-1} (column), prefix built on the fly
  std::vector<Eigen::MatrixX<Scalar>> suffix(static_cast<std::size_t>(d + 1));
  suffix[static_cast<std::size_t>(d)] = Eigen::MatrixX<Scalar>::Ones(1, 1);
  for (int i = d - 1; i >= 0; --i)
    suffix[static_cast<std::size_t>(i)] =
        value_m[static_cast<std::size_t>(i)] * suffix[static_cast<std::size_t>(i + 1)];
  Eigen::VectorX<Scalar> grad(d);
  Eigen::MatrixX<Scalar> prefix = Eigen::MatrixX<Scalar>::Ones(1, 1);
  for (int i = 0; i < d; ++i) {
    grad[i] = (prefix * deriv_m[static_cast<std::size_t>(i)] *
               suffix[static_cast<std::size_t>(i + 1)])(0, 0);
    prefix = prefix * value_m[static_cast<std::size_t>(i)];
  }
  return grad;
}

}  // namespace chebtt

#pragma once

#include <cholmod.h>
#include <amd.h>
#include <umfpack.h>

#include <chrono>
#include <cstdio>
#include <limits>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hdgmax/global_system.hpp"
#include "hdgmax/symmetric_factor.hpp"

namespace hdgmax {

/// Fill-reducing ordering of the face-block graph.
enum class Ordering { nested_dissection, amd, natural };

inline Ordering parse_ordering(std::string_view s) {
  if (s == "nd" || s == "metis") return Ordering::nested_dissection;
  if (s == "amd") return Ordering::amd;
  if (s == "natural") return Ordering::natural;
  throw invalid_argument("unknown ordering '" + std::string(s) + "' (expected nd|amd|natural)");
}

inline std::string_view to_string(Ordering o) noexcept {
  switch (o) {
    case Ordering::nested_dissection: return "nd";
    case Ordering::amd: return "amd";
    case Ordering::natural: return "natural";
  }
  return "?";
}

struct SolverStats {
  std::string method;
  std::string ordering;
  double lnz = 0.0, unz = 0.0;       // entries of L and U (direct)
  double peak_memory_bytes = 0.0;    // UMFPACK numeric + symbolic peak
  double flops = 0.0;                // factorization flop count (direct)
  double rcond = 0.0;                // UMFPACK estimate, min |u_ii| / max |u_ii|
  int iterations = 0;                // Krylov iterations, or refinement steps (direct)
  double seconds = 0.0;
  bool residual_warning = false;     // relative residual above tolerance
};

struct TraceSolution {
  CVector x;
  /// ||A x - b|| / ||b||, or ||x|| when b = 0.
  real relative_residual = 0.0;
  SolverStats stats;
};

/// `symmetric` is the L L^T factorization, falling back to LU when its
/// refined residual misses the tolerance.
enum class DirectMethod { symmetric, lu };

struct SolverOptions {
  real tol = 1e-10;
  Ordering ordering = Ordering::nested_dissection;
  DirectMethod direct_method = DirectMethod::symmetric;
  int refinement_steps = 2;
  int max_iter = 5000;
  int restart = 200;
};

inline real relative_residual(const BlockSparseMatrix& a, const CVector& x, const CVector& b) {
  const real nb = b.norm();
  if (nb == 0.0) return x.norm();
  return (a.multiply(x) - b).norm() / nb;
}

namespace detail {

/// Symmetric block adjacency in compressed-column form, diagonal excluded.
inline void block_graph(const BlockSparseMatrix& a, std::vector<SuiteSparse_long>& ptr, std::vector<SuiteSparse_long>& idx) {
  const std::size_t nb = a.num_block_rows();
  ptr.assign(nb + 1, 0);
  idx.clear();
  for (std::size_t r = 0; r < nb; ++r) {
    for (std::size_t c : a.block_columns(r))
      if (c != r) idx.push_back(static_cast<SuiteSparse_long>(c));
    ptr[r + 1] = static_cast<SuiteSparse_long>(idx.size());
  }
}

inline std::vector<SuiteSparse_long> metis_order(const BlockSparseMatrix& a) {
  std::vector<SuiteSparse_long> ptr, idx;
  block_graph(a, ptr, idx);
  const std::size_t nb = a.num_block_rows();
  cholmod_common common;
  cholmod_l_start(&common);
  common.print = 0;
  cholmod_sparse g{};
  g.nrow = g.ncol = nb;
  g.nzmax = idx.size();
  g.p = ptr.data();
  g.i = idx.data();
  g.stype = 1; // both triangles stored; the strictly lower part is ignored
  g.itype = CHOLMOD_LONG;
  g.xtype = CHOLMOD_PATTERN;
  g.dtype = CHOLMOD_DOUBLE;
  g.sorted = 1;
  g.packed = 1;
  std::vector<SuiteSparse_long> perm(nb);
  const int ok = cholmod_l_metis(&g, nullptr, 0, 1, perm.data(), &common);
  cholmod_l_finish(&common);
  if (!ok) throw error("METIS ordering failed");
  return perm;
}

inline std::vector<SuiteSparse_long> amd_block_order(const BlockSparseMatrix& a) {
  std::vector<SuiteSparse_long> ptr, idx;
  block_graph(a, ptr, idx);
  const auto nb = static_cast<SuiteSparse_long>(a.num_block_rows());
  std::vector<SuiteSparse_long> perm(static_cast<std::size_t>(nb));
  double control[AMD_CONTROL], info[AMD_INFO];
  amd_l_defaults(control);
  if (amd_l_order(nb, ptr.data(), idx.data(), perm.data(), control, info) < AMD_OK) throw error("AMD ordering failed");
  return perm;
}

} // namespace detail

/// Block permutation expanded to scalar unknowns; blocks keep internal order.
inline std::vector<SuiteSparse_long> scalar_ordering(const BlockSparseMatrix& a, Ordering o) {
  std::vector<SuiteSparse_long> blocks;
  if (o == Ordering::nested_dissection) blocks = detail::metis_order(a);
  else if (o == Ordering::amd) blocks = detail::amd_block_order(a);
  else {
    blocks.resize(a.num_block_rows());
    for (std::size_t b = 0; b < blocks.size(); ++b) blocks[b] = static_cast<SuiteSparse_long>(b);
  }
  std::vector<SuiteSparse_long> out;
  out.reserve(a.rows());
  for (SuiteSparse_long b : blocks) {
    const auto fb = static_cast<std::size_t>(b);
    for (std::size_t j = a.offsets()[fb]; j < a.offsets()[fb + 1]; ++j) out.push_back(static_cast<SuiteSparse_long>(j));
  }
  return out;
}

/// Sparse LU of a trace matrix. The row-compressed matrix is handed to
/// UMFPACK as the column-compressed transpose; solves use the array-transpose
/// system so no second copy is made.
class DirectFactorization {
public:
  DirectFactorization(const BlockSparseMatrix& a, Ordering ordering = Ordering::nested_dissection)
    : csr_(a.to_csr()) {
    const auto t0 = std::chrono::steady_clock::now();
    n_ = csr_.rows();
    umfpack_zl_defaults(control_);
    control_[UMFPACK_PRL] = 0;
    // The trace matrix is structurally symmetric with a nonzero diagonal; the
    // symmetric strategy keeps the fill-reducing order on both sides and cuts
    // the factorization work several-fold over the unsymmetric default.
    control_[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
    const auto* ap = csr_.outerIndexPtr();
    const auto* ai = csr_.innerIndexPtr();
    const auto* ax = reinterpret_cast<const double*>(csr_.valuePtr());
    stats_.method = "direct";
    stats_.ordering = std::string(to_string(ordering));
    double info[UMFPACK_INFO];
    int status = 0;
    if (ordering == Ordering::natural) {
      control_[UMFPACK_ORDERING] = UMFPACK_ORDERING_NONE;
      status = umfpack_zl_symbolic(n_, n_, ap, ai, ax, nullptr, &symbolic_, control_, info);
    } else {
      auto q = scalar_ordering(a, ordering);
      status = umfpack_zl_qsymbolic(n_, n_, ap, ai, ax, nullptr, q.data(), &symbolic_, control_, info);
    }
    if (status != UMFPACK_OK) throw error("UMFPACK symbolic analysis failed (status " + std::to_string(status) + ")");
    status = umfpack_zl_numeric(ap, ai, ax, nullptr, symbolic_, &numeric_, control_, info);
    if (status == UMFPACK_WARNING_singular_matrix)
      throw scheme_bug("trace matrix of size " + std::to_string(n_) + " is numerically singular");
    if (status != UMFPACK_OK) throw error("UMFPACK numeric factorization failed (status " + std::to_string(status) + ")");
    stats_.lnz = info[UMFPACK_LNZ];
    stats_.unz = info[UMFPACK_UNZ];
    stats_.peak_memory_bytes = info[UMFPACK_PEAK_MEMORY] * info[UMFPACK_SIZE_OF_UNIT];
    stats_.rcond = info[UMFPACK_RCOND];
    stats_.flops = info[UMFPACK_FLOPS];
    stats_.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  DirectFactorization(const DirectFactorization&) = delete;
  DirectFactorization& operator=(const DirectFactorization&) = delete;

  ~DirectFactorization() {
    if (numeric_) umfpack_zl_free_numeric(&numeric_);
    if (symbolic_) umfpack_zl_free_symbolic(&symbolic_);
  }

  CVector solve(const CVector& b) const {
    if (b.size() != n_) throw invalid_argument("right-hand side has wrong size");
    CVector x = CVector::Zero(n_);
    if (b.norm() == 0.0) return x;
    double info[UMFPACK_INFO];
    const int status =
        umfpack_zl_solve(UMFPACK_Aat, csr_.outerIndexPtr(), csr_.innerIndexPtr(), reinterpret_cast<const double*>(csr_.valuePtr()),
                         nullptr, reinterpret_cast<double*>(x.data()), nullptr, reinterpret_cast<const double*>(b.data()), nullptr,
                         numeric_, const_cast<double*>(control_), info);
    if (status == UMFPACK_WARNING_singular_matrix) throw scheme_bug("singular trace matrix during solve");
    if (status != UMFPACK_OK) throw error("UMFPACK solve failed (status " + std::to_string(status) + ")");
    return x;
  }

  const SolverStats& stats() const { return stats_; }

private:
  Eigen::SparseMatrix<complex, Eigen::RowMajor, long> csr_;
  SuiteSparse_long n_ = 0;
  double control_[UMFPACK_CONTROL];
  void* symbolic_ = nullptr;
  void* numeric_ = nullptr;
  SolverStats stats_;
};

namespace detail {

inline TraceSolution solve_lu(const GlobalSystem& sys, const SolverOptions& opts) {
  DirectFactorization lu(sys.matrix, opts.ordering);
  TraceSolution sol;
  sol.x = lu.solve(sys.rhs);
  sol.stats = lu.stats();
  sol.stats.method = "lu";
  sol.relative_residual = relative_residual(sys.matrix, sol.x, sys.rhs);
  return sol;
}

inline TraceSolution solve_symmetric(const GlobalSystem& sys, const SolverOptions& opts) {
  const SymmetricFactorization llt(sys.matrix, scalar_ordering(sys.matrix, opts.ordering));
  TraceSolution sol;
  sol.stats.method = "llt";
  sol.stats.ordering = std::string(to_string(opts.ordering));
  sol.stats.lnz = llt.stored_entries();
  sol.stats.flops = llt.flops();
  sol.stats.peak_memory_bytes = llt.memory_bytes();
  sol.stats.rcond = llt.pivot_ratio();
  sol.x = CVector::Zero(sys.rhs.size());
  if (sys.rhs.norm() == 0.0) return sol;
  sol.x = llt.solve(sys.rhs);
  sol.relative_residual = relative_residual(sys.matrix, sol.x, sys.rhs);
  // Pivot-free factorization: refinement absorbs moderate growth.
  for (int k = 0; k < opts.refinement_steps && sol.relative_residual > 1e-3 * opts.tol; ++k) {
    const CVector r = sys.rhs - sys.matrix.multiply(sol.x);
    const CVector x = sol.x + llt.solve(r);
    const real res = relative_residual(sys.matrix, x, sys.rhs);
    if (!(res < sol.relative_residual)) break;
    sol.x = x;
    sol.relative_residual = res;
    ++sol.stats.iterations;
  }
  return sol;
}

} // namespace detail

/// Direct solve. A residual above `opts.tol` after the LU fallback is
/// reported through stats.residual_warning, not thrown.
inline TraceSolution solve_direct(const GlobalSystem& sys, const SolverOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  TraceSolution sol;
  if (opts.direct_method == DirectMethod::symmetric) {
    try {
      sol = detail::solve_symmetric(sys, opts);
    } catch (const scheme_bug&) {
      sol.relative_residual = std::numeric_limits<real>::infinity();
    }
    if (!(sol.relative_residual <= opts.tol)) {
      sol = detail::solve_lu(sys, opts);
      sol.stats.method = "llt->lu";
    }
  } else {
    sol = detail::solve_lu(sys, opts);
  }
  if (!std::isfinite(sol.relative_residual)) throw scheme_bug("non-finite trace solution");
  sol.stats.residual_warning = sol.relative_residual > opts.tol;
  sol.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return sol;
}

/// Inverse of every diagonal face block.
class BlockJacobi {
public:
  explicit BlockJacobi(const BlockSparseMatrix& a) : offsets_(a.offsets()) {
    for (std::size_t b = 0; b < a.num_block_rows(); ++b) {
      const auto m = static_cast<Eigen::Index>(a.block_size(b));
      const Eigen::Map<const Eigen::Matrix<complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> blk(a.block_data(b, b), m, m);
      lu_.emplace_back(CMatrix(blk));
    }
  }

  CVector apply(const CVector& r) const {
    CVector z(r.size());
    for (std::size_t b = 0; b < lu_.size(); ++b) {
      const auto o = static_cast<Eigen::Index>(offsets_[b]);
      const auto m = static_cast<Eigen::Index>(offsets_[b + 1] - offsets_[b]);
      z.segment(o, m) = lu_[b].solve(r.segment(o, m));
    }
    return z;
  }

private:
  std::vector<std::size_t> offsets_;
  std::vector<Eigen::PartialPivLU<CMatrix>> lu_;
};

/// Restarted GMRES, right preconditioned by per-face block Jacobi. The
/// reported residual is the true unpreconditioned one.
inline TraceSolution solve_iterative(const GlobalSystem& sys, const SolverOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw invalid_argument("tolerance must be positive");
  if (opts.max_iter < 1 || opts.restart < 1) throw invalid_argument("max_iter and restart must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  const BlockSparseMatrix& a = sys.matrix;
  const CVector& b = sys.rhs;
  const auto n = b.size();
  TraceSolution sol;
  sol.stats.method = "gmres";
  sol.stats.ordering = "none";
  sol.x = CVector::Zero(n);
  const real nb = b.norm();
  if (nb == 0.0) return sol;

  const BlockJacobi prec(a);
  const int m = opts.restart;
  CMatrix V(n, m + 1);
  CMatrix Z(n, m);
  CMatrix H = CMatrix::Zero(m + 1, m);
  std::vector<complex> cs(m), sn(m);
  CVector g(m + 1);
  real best = 1.0;
  int total = 0;

  while (total < opts.max_iter) {
    CVector r = b - a.multiply(sol.x);
    real beta = r.norm();
    best = std::min(best, beta / nb);
    if (beta / nb <= opts.tol) break;
    V.col(0) = r / beta;
    g.setZero();
    g(0) = beta;
    H.setZero();
    int k = 0;
    for (; k < m && total < opts.max_iter; ++k, ++total) {
      Z.col(k) = prec.apply(V.col(k));
      CVector v = a.multiply(Z.col(k));
      for (int j = 0; j <= k; ++j) {
        H(j, k) = V.col(j).dot(v);
        v -= H(j, k) * V.col(j);
      }
      H(k + 1, k) = v.norm();
      if (std::abs(H(k + 1, k)) > 0.0) V.col(k + 1) = v / H(k + 1, k);
      for (int j = 0; j < k; ++j) {
        const complex t = std::conj(cs[j]) * H(j, k) + std::conj(sn[j]) * H(j + 1, k);
        H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
        H(j, k) = t;
      }
      const real den = std::hypot(std::abs(H(k, k)), std::abs(H(k + 1, k)));
      cs[k] = den == 0.0 ? complex(1.0) : H(k, k) / den;
      sn[k] = den == 0.0 ? complex(0.0) : H(k + 1, k) / den;
      H(k, k) = den;
      H(k + 1, k) = 0.0;
      g(k + 1) = -sn[k] * g(k);
      g(k) = std::conj(cs[k]) * g(k);
      if (std::abs(g(k + 1)) / nb <= opts.tol || den == 0.0) {
        ++k;
        ++total;
        break;
      }
    }
    const CVector y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    sol.x += Z.leftCols(k) * y;
    sol.relative_residual = relative_residual(a, sol.x, b);
    best = std::min(best, sol.relative_residual);
    if (sol.relative_residual <= opts.tol) break;
  }
  sol.relative_residual = relative_residual(a, sol.x, b);
  sol.stats.iterations = total;
  sol.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!(sol.relative_residual <= opts.tol))
  {
    char msg[128];
    std::snprintf(msg, sizeof msg, "GMRES did not reach relative residual %g in %d iterations", opts.tol, opts.max_iter);
    throw not_converged(msg, std::min(best, sol.relative_residual));
  }
  return sol;
}

enum class SolverKind { direct, iterative };

inline DirectMethod parse_direct_method(std::string_view s) {
  if (s == "llt") return DirectMethod::symmetric;
  if (s == "lu") return DirectMethod::lu;
  throw invalid_argument("unknown direct method '" + std::string(s) + "' (expected llt|lu)");
}

inline std::string_view to_string(DirectMethod m) noexcept { return m == DirectMethod::lu ? "lu" : "llt"; }

inline SolverKind parse_solver_kind(std::string_view s) {
  if (s == "direct") return SolverKind::direct;
  if (s == "iterative" || s == "gmres") return SolverKind::iterative;
  throw invalid_argument("unknown solver '" + std::string(s) + "' (expected direct|gmres)");
}

inline TraceSolution solve(const GlobalSystem& sys, SolverKind kind, const SolverOptions& opts = {}) {
  return kind == SolverKind::direct ? solve_direct(sys, opts) : solve_iterative(sys, opts);
}

} // namespace hdgmax

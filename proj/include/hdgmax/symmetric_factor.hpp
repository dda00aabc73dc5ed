#pragma once

#include <cblas.h>
#include <cholmod.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hdgmax/block_sparse.hpp"
#include "hdgmax/error.hpp"

namespace hdgmax {

/// Supernodal factorization A = L L^T of a complex symmetric matrix (plain
/// transpose, no conjugation, no pivoting). CHOLMOD supplies the symbolic
/// analysis for a given fill-reducing order; the numeric phase is ours since
/// CHOLMOD only factors Hermitian matrices.
///
/// Supernode s owns columns [super[s], super[s+1]) of the permuted matrix and
/// stores an nsrow x nscol column-major block at px[s]; its row list starts
/// with its own columns and continues with the sorted off-diagonal rows.
class SymmetricFactorization {
public:
  SymmetricFactorization(const BlockSparseMatrix& a, const std::vector<SuiteSparse_long>& order) {
    const auto t0 = std::chrono::steady_clock::now();
    n_ = static_cast<long>(a.rows());
    if (order.size() != static_cast<std::size_t>(n_)) throw invalid_argument("ordering has wrong size");
    analyze(a, order);
    assemble(a);
    factor();
    seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  long size() const { return n_; }
  long num_supernodes() const { return static_cast<long>(super_.size()) - 1; }
  /// Stored entries of L, supernode padding included.
  double stored_entries() const { return static_cast<double>(values_.size()); }
  double flops() const { return flops_; }
  double memory_bytes() const { return static_cast<double>(values_.size() * sizeof(complex)); }
  /// min |d_jj| / max |d_jj| over the pivots before the square root.
  double pivot_ratio() const { return max_pivot_ > 0.0 ? min_pivot_ / max_pivot_ : 0.0; }
  double seconds() const { return seconds_; }

  CVector solve(const CVector& b) const {
    if (b.size() != n_) throw invalid_argument("right-hand side has wrong size");
    CVector y(n_);
    for (long k = 0; k < n_; ++k) y(k) = b(perm_[static_cast<std::size_t>(k)]);
    std::vector<complex> tmp;
    const complex one(1.0), zero(0.0);
    const long ns = num_supernodes();
    for (long s = 0; s < ns; ++s) {
      const long k1 = super_[s], nc = super_[s + 1] - k1, nr = pi_[s + 1] - pi_[s], off = nr - nc;
      const complex* l = values_.data() + px_[s];
      complex* xs = y.data() + k1;
      cblas_ztrsv(CblasColMajor, CblasLower, CblasNoTrans, CblasNonUnit, int(nc), l, int(nr), xs, 1);
      if (off == 0) continue;
      tmp.assign(static_cast<std::size_t>(off), zero);
      cblas_zgemv(CblasColMajor, CblasNoTrans, int(off), int(nc), &one, l + nc, int(nr), xs, 1, &zero, tmp.data(), 1);
      const long* rows = rows_.data() + pi_[s] + nc;
      for (long i = 0; i < off; ++i) y(rows[i]) -= tmp[static_cast<std::size_t>(i)];
    }
    const complex minus_one(-1.0);
    for (long s = ns - 1; s >= 0; --s) {
      const long k1 = super_[s], nc = super_[s + 1] - k1, nr = pi_[s + 1] - pi_[s], off = nr - nc;
      const complex* l = values_.data() + px_[s];
      complex* xs = y.data() + k1;
      if (off > 0) {
        const long* rows = rows_.data() + pi_[s] + nc;
        tmp.resize(static_cast<std::size_t>(off));
        for (long i = 0; i < off; ++i) tmp[static_cast<std::size_t>(i)] = y(rows[i]);
        cblas_zgemv(CblasColMajor, CblasTrans, int(off), int(nc), &minus_one, l + nc, int(nr), tmp.data(), 1, &one, xs, 1);
      }
      cblas_ztrsv(CblasColMajor, CblasLower, CblasTrans, CblasNonUnit, int(nc), l, int(nr), xs, 1);
    }
    CVector x(n_);
    for (long k = 0; k < n_; ++k) x(perm_[static_cast<std::size_t>(k)]) = y(k);
    return x;
  }

private:
  void analyze(const BlockSparseMatrix& a, const std::vector<SuiteSparse_long>& order) {
    // Upper triangle of the scalar pattern, column j listing rows i <= j;
    // the matrix is structurally symmetric so block row r serves as column r.
    const auto& offs = a.offsets();
    std::vector<SuiteSparse_long> ptr(static_cast<std::size_t>(n_) + 1, 0), idx;
    for (std::size_t r = 0; r < a.num_block_rows(); ++r) {
      const auto cols = a.block_columns(r);
      for (std::size_t j = offs[r]; j < offs[r + 1]; ++j) {
        for (std::size_t c : cols)
          for (std::size_t i = offs[c]; i < offs[c + 1] && i <= j; ++i) idx.push_back(static_cast<SuiteSparse_long>(i));
        ptr[j + 1] = static_cast<SuiteSparse_long>(idx.size());
      }
    }
    cholmod_sparse pat{};
    pat.nrow = pat.ncol = static_cast<std::size_t>(n_);
    pat.nzmax = idx.size();
    pat.p = ptr.data();
    pat.i = idx.data();
    pat.stype = 1;
    pat.itype = CHOLMOD_LONG;
    pat.xtype = CHOLMOD_PATTERN;
    pat.dtype = CHOLMOD_DOUBLE;
    pat.sorted = 1;
    pat.packed = 1;

    cholmod_common cm;
    cholmod_l_start(&cm);
    cm.print = 0;
    cm.nmethods = 1;
    cm.method[0].ordering = CHOLMOD_GIVEN;
    cm.postorder = 1;
    cm.supernodal = CHOLMOD_SUPERNODAL;
    std::vector<SuiteSparse_long> given(order.begin(), order.end());
    cholmod_factor* f = cholmod_l_analyze_p(&pat, given.data(), nullptr, 0, &cm);
    if (!f || !f->is_super) {
      if (f) cholmod_l_free_factor(&f, &cm);
      cholmod_l_finish(&cm);
      throw error("supernodal symbolic analysis failed (status " + std::to_string(cm.status) + ")");
    }
    ptr.clear();
    ptr.shrink_to_fit();
    idx.clear();
    idx.shrink_to_fit();

    const auto ns = f->nsuper;
    const auto* sp = static_cast<const SuiteSparse_long*>(f->super);
    const auto* pip = static_cast<const SuiteSparse_long*>(f->pi);
    const auto* pxp = static_cast<const SuiteSparse_long*>(f->px);
    const auto* rp = static_cast<const SuiteSparse_long*>(f->s);
    const auto* pp = static_cast<const SuiteSparse_long*>(f->Perm);
    super_.assign(sp, sp + ns + 1);
    pi_.assign(pip, pip + ns + 1);
    px_.assign(pxp, pxp + ns + 1);
    rows_.assign(rp, rp + pi_[ns]);
    perm_.assign(pp, pp + n_);
    cholmod_l_free_factor(&f, &cm);
    cholmod_l_finish(&cm);

    for (std::size_t s = 0; s + 1 < super_.size(); ++s) {
      const long nc = super_[s + 1] - super_[s];
      std::sort(rows_.begin() + pi_[s] + nc, rows_.begin() + pi_[s + 1]);
    }
    values_.assign(static_cast<std::size_t>(px_.back()), complex(0.0));
  }

  void assemble(const BlockSparseMatrix& a) {
    std::vector<long> pinv(static_cast<std::size_t>(n_)), owner(static_cast<std::size_t>(n_));
    for (long k = 0; k < n_; ++k) pinv[static_cast<std::size_t>(perm_[static_cast<std::size_t>(k)])] = k;
    for (long s = 0; s + 1 < static_cast<long>(super_.size()); ++s)
      for (long k = super_[s]; k < super_[s + 1]; ++k) owner[static_cast<std::size_t>(k)] = s;
    const auto& offs = a.offsets();
    for (std::size_t r = 0; r < a.num_block_rows(); ++r)
      for (std::size_t c : a.block_columns(r)) {
        const complex* v = a.block_data(r, c);
        const std::size_t nr = a.block_size(r), nc = a.block_size(c);
        for (std::size_t i = 0; i < nr; ++i)
          for (std::size_t j = 0; j < nc; ++j) {
            const long pr = pinv[offs[r] + i], pc = pinv[offs[c] + j];
            if (pr < pc) continue;
            const long s = owner[static_cast<std::size_t>(pc)];
            const long first = pi_[s], last = pi_[s + 1], ncol = super_[s + 1] - super_[s];
            long local;
            if (pr < super_[s + 1]) local = pr - super_[s];
            else {
              const auto it = std::lower_bound(rows_.begin() + first + ncol, rows_.begin() + last, pr);
              if (it == rows_.begin() + last || *it != pr) throw error("entry outside the symbolic factor");
              local = static_cast<long>(it - rows_.begin()) - first;
            }
            values_[static_cast<std::size_t>(px_[s] + (pc - super_[s]) * (last - first) + local)] += v[i * nc + j];
          }
      }
  }

  /// Unblocked L L^T of the leading columns [p0, p1) of an nr-row panel whose
  /// earlier columns are already applied.
  void factor_columns(complex* l, long nr, long p0, long p1) {
    for (long j = p0; j < p1; ++j) {
      complex* cj = l + j * nr;
      const complex d = cj[j];
      const double ad = std::abs(d);
      if (!(ad > 0.0) || !std::isfinite(ad)) throw scheme_bug("zero or non-finite pivot in symmetric factorization");
      min_pivot_ = std::min(min_pivot_, ad);
      max_pivot_ = std::max(max_pivot_, ad);
      const complex root = std::sqrt(d), inv = 1.0 / root;
      cj[j] = root;
      for (long i = j + 1; i < nr; ++i) cj[i] *= inv;
      for (long k = j + 1; k < p1; ++k) {
        const complex ljk = cj[k];
        if (ljk == 0.0) continue;
        complex* ck = l + k * nr;
        for (long i = k; i < nr; ++i) ck[i] -= ljk * cj[i];
      }
    }
  }

  void factor() {
    constexpr long panel = 64, chunk = 128;
    const complex one(1.0), minus_one(-1.0), zero(0.0);
    std::vector<long> map(static_cast<std::size_t>(n_), -1), owner(static_cast<std::size_t>(n_));
    const long ns = num_supernodes();
    for (long s = 0; s < ns; ++s)
      for (long k = super_[s]; k < super_[s + 1]; ++k) owner[static_cast<std::size_t>(k)] = s;
    std::vector<complex> work;
    flops_ = 0.0;
    for (long s = 0; s < ns; ++s) {
      const long nc = super_[s + 1] - super_[s], nr = pi_[s + 1] - pi_[s], off = nr - nc;
      complex* l = values_.data() + px_[s];
      for (long j = 0; j < nc; ++j) flops_ += 4.0 * double(nr - j) * double(nr - j);
      for (long p0 = 0; p0 < nc; p0 += panel) {
        const long p1 = std::min(p0 + panel, nc);
        if (p0 > 0)
          cblas_zgemm(CblasColMajor, CblasNoTrans, CblasTrans, int(nr - p0), int(p1 - p0), int(p0), &minus_one, l + p0, int(nr),
                      l + p0, int(nr), &one, l + p0 * nr + p0, int(nr));
        factor_columns(l, nr, p0, p1);
      }
      if (off == 0) continue;

      // Schur update of ancestors: C = L2 L2^T over the off-diagonal rows,
      // scattered column chunk by column chunk into the owning supernodes.
      const long* rows = rows_.data() + pi_[s] + nc;
      const complex* l2 = l + nc;
      long j0 = 0;
      while (j0 < off) {
        const long t = owner[static_cast<std::size_t>(rows[j0])];
        long j1 = j0;
        while (j1 < off && rows[j1] < super_[t + 1]) ++j1;
        const long tr = pi_[t + 1] - pi_[t];
        for (long q = 0; q < tr; ++q) map[static_cast<std::size_t>(rows_[static_cast<std::size_t>(pi_[t] + q)])] = q;
        complex* lt = values_.data() + px_[t];
        for (long c0 = j0; c0 < j1; c0 += chunk) {
          const long c1 = std::min(c0 + chunk, j1), m = off - c0, w = c1 - c0;
          work.resize(static_cast<std::size_t>(m * w));
          cblas_zgemm(CblasColMajor, CblasNoTrans, CblasTrans, int(m), int(w), int(nc), &one, l2 + c0, int(nr), l2 + c0, int(nr), &zero,
                      work.data(), int(m));
          for (long jj = c0; jj < c1; ++jj) {
            complex* dst = lt + (rows[jj] - super_[t]) * tr;
            const complex* src = work.data() + (jj - c0) * m - c0;
            for (long ii = jj; ii < off; ++ii) dst[map[static_cast<std::size_t>(rows[ii])]] -= src[ii];
          }
        }
        j0 = j1;
      }
    }
  }

  long n_ = 0;
  std::vector<long> super_, pi_, px_, rows_, perm_;
  std::vector<complex> values_;
  double flops_ = 0.0, seconds_ = 0.0;
  double min_pivot_ = std::numeric_limits<double>::infinity(), max_pivot_ = 0.0;
};

} // namespace hdgmax

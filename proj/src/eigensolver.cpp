#include "nelson/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace nelson {

namespace {

template <class S>
using DenseM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using DenseV = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <class S>
using SparseM = Eigen::SparseMatrix<S, Eigen::RowMajor>;

template <class S>
DenseV<S> random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    DenseV<S> v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = S(d(rng));
    return v;
}

// Two passes of classical Gram-Schmidt against the first `cols` columns.
template <class S>
void orthogonalize(const DenseM<S>& V, Eigen::Index cols, DenseV<S>& f) {
    for (int pass = 0; pass < 2; ++pass) {
        const DenseV<S> c = V.leftCols(cols).adjoint() * f;
        f.noalias() -= V.leftCols(cols) * c;
    }
}

enum class Range { All, Lowest, Window };

struct RangeSpec {
    Range kind = Range::All;
    int count = 0;
    double lo = 0.0, hi = 0.0;
};

// Dense symmetric/Hermitian eigenproblem through LAPACK's relatively robust representation driver.
template <class S>
EigenResult dense_path(const SparseM<S>& A, const RangeSpec& range) {
    const DenseM<S> D = DenseM<S>(A);
    DenseM<S> work = D;
    const lapack_int n = static_cast<lapack_int>(D.rows());
    Eigen::VectorXd w(n);
    DenseM<S> Z(n, std::max<lapack_int>(n, 1));
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(std::max<lapack_int>(n, 1)));
    lapack_int found = 0;
    const char which = range.kind == Range::All ? 'A' : range.kind == Range::Lowest ? 'I' : 'V';
    const lapack_int il = 1, iu = std::max<lapack_int>(1, std::min<lapack_int>(range.count, n));
    lapack_int info = 0;
    if constexpr (std::is_same_v<S, double>) {
        info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', which, 'U', n, work.data(), n, range.lo, range.hi, il, iu, 0.0,
                              &found, w.data(), Z.data(), n, support.data());
    } else {
        info = LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', which, 'U', n, work.data(),
                              n, range.lo, range.hi, il, iu, 0.0, &found, w.data(),
                              Z.data(), n, support.data());
    }
    if (info != 0) throw SolverError("dense eigensolver failed with code " + std::to_string(info), NAN);
    EigenResult r;
    r.values = w.head(found);
    r.vectors = Z.leftCols(found).template cast<cplx>();
    r.residuals.resize(found);
    for (lapack_int i = 0; i < found; ++i)
        r.residuals[i] = (D * Z.col(i) - w[i] * Z.col(i)).norm();
    r.method = "dense";
    return r;
}

template <class S>
EigenResult krylov_path(const SparseM<S>& A, int count, const SolverOptions& opt) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = std::min<Eigen::Index>(n, opt.max_basis > 0 ? opt.max_basis : std::max(2 * count + 40, 80));
    const Eigen::Index keep_max = std::max<Eigen::Index>(count + 4, m / 2);
    std::mt19937_64 rng(opt.seed);
    DenseM<S> V(n, m), W(n, m);
    DenseV<S> f = random_vector<S>(n, rng);
    f.normalize();
    V.col(0) = f;
    Eigen::Index cur = 0;  // filled columns of W
    int matvecs = 0;
    Eigen::Index filled_v = 1;
    double last_worst = INFINITY;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        while (cur < m) {
            W.col(cur) = A * V.col(cur);
            ++matvecs;
            ++cur;
            if (cur == filled_v && cur < m) {
                f = W.col(cur - 1);
                const double scale = f.norm() + 1.0;
                orthogonalize<S>(V, cur, f);
                double beta = f.norm();
                if (beta < 1e-12 * scale) {
                    // Invariant subspace: continue with a fresh direction.
                    f = random_vector<S>(n, rng);
                    orthogonalize<S>(V, cur, f);
                    beta = f.norm();
                    if (beta < 1e-12) break;
                }
                V.col(cur) = f / beta;
                ++filled_v;
            }
        }
        const Eigen::Index k = cur;
        DenseM<S> T = V.leftCols(k).adjoint() * W.leftCols(k);
        T = (0.5 * (T + T.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<DenseM<S>> es(T);
        const Eigen::Index want = std::min<Eigen::Index>(count, k);
        const Eigen::Index keep = std::min<Eigen::Index>(keep_max, k - 1);
        const DenseM<S> Y = es.eigenvectors().leftCols(std::max(want, keep));
        const DenseM<S> X = V.leftCols(k) * Y;
        const DenseM<S> AX = W.leftCols(k) * Y;
        double worst = 0.0;
        for (Eigen::Index i = 0; i < want; ++i) {
            const double th = es.eigenvalues()[i];
            const double res = (AX.col(i) - th * X.col(i)).norm();
            worst = std::max(worst, res / (opt.tol * (1.0 + std::abs(th))));
        }
        last_worst = worst;
        if (worst <= 0.5 || k == n) {
            EigenResult r;
            r.values = es.eigenvalues().head(want);
            r.vectors.resize(n, want);
            r.residuals.resize(want);
            bool ok = true;
            for (Eigen::Index i = 0; i < want; ++i) {
                DenseV<S> x = X.col(i);
                x.normalize();
                const double th = r.values[i];
                r.residuals[i] = (A * x - th * x).norm();
                ++matvecs;
                ok = ok && r.residuals[i] <= opt.tol * (1.0 + std::abs(th));
                r.vectors.col(i) = x.template cast<cplx>();
            }
            if (ok) {
                r.method = "lanczos";
                r.iterations = restart;
                r.matvecs = matvecs;
                return r;
            }
        }
        // Thick restart: keep the lowest Ritz pairs plus the continuation direction.
        f = W.col(k - 1);
        orthogonalize<S>(V, k, f);
        double beta = f.norm();
        V.leftCols(keep) = X.leftCols(keep);
        W.leftCols(keep) = AX.leftCols(keep);
        // Re-orthonormalize the kept block to curb drift.
        for (Eigen::Index j = 0; j < keep; ++j) {
            DenseV<S> x = V.col(j);
            if (j > 0) orthogonalize<S>(V, j, x);
            const double nx = x.norm();
            V.col(j) = x / nx;
            W.col(j) = A * V.col(j);
            ++matvecs;
        }
        orthogonalize<S>(V, keep, f);
        beta = f.norm();
        if (beta < 1e-12) {
            f = random_vector<S>(n, rng);
            orthogonalize<S>(V, keep, f);
            beta = f.norm();
        }
        V.col(keep) = f / beta;
        cur = keep;
        filled_v = keep + 1;
    }
    std::ostringstream os;
    os << "Lanczos did not converge within " << opt.max_restarts << " restarts (worst scaled residual " << last_worst
       << ")";
    throw SolverError(os.str(), last_worst * opt.tol);
}

}  // namespace

EigenResult lowest_eigs(const OperatorMatrix& H, int count, const SolverOptions& options) {
    if (count < 1) throw std::invalid_argument("lowest_eigs: count must be positive");
    const bool dense = H.dim() <= options.dense_threshold || static_cast<std::size_t>(count) * 4 >= H.dim();
    if (H.is_real()) {
        const SparseR A = H.real_matrix();
        return dense ? dense_path<double>(A, {Range::Lowest, count}) : krylov_path<double>(A, count, options);
    }
    return dense ? dense_path<cplx>(H.matrix(), {Range::Lowest, count}) : krylov_path<cplx>(H.matrix(), count, options);
}

EigenResult dense_eigs(const OperatorMatrix& H) {
    if (H.is_real()) return dense_path<double>(H.real_matrix(), {});
    return dense_path<cplx>(H.matrix(), {});
}

EigenResult window_eigs(const OperatorMatrix& H, double lo, double hi) {
    const RangeSpec range{Range::Window, 0, lo, hi};
    if (H.is_real()) return dense_path<double>(H.real_matrix(), range);
    return dense_path<cplx>(H.matrix(), range);
}

EigenResult dense_eigs(const Eigen::MatrixXcd& H) {
    const SparseC S = H.sparseView();
    return dense_path<cplx>(S, {});
}

}  // namespace nelson

#include "afrelay/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "afrelay/errors.hpp"

namespace afrelay {
namespace {

// Index of the largest-magnitude entry; near-ties resolve to the lowest index.
Eigen::Index pivot_index(const CVector& col) {
    double peak = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) peak = std::max(peak, std::abs(col(i)));
    for (Eigen::Index i = 0; i < col.size(); ++i) {
        if (std::abs(col(i)) >= peak * (1.0 - 1e-10)) return i;
    }
    return 0;
}

// Unit phase that rotates the pivot entry onto the nonnegative real axis.
Complex pivot_phase(const CVector& col) {
    const Complex x = col(pivot_index(col));
    const double mag = std::abs(x);
    return mag > 0.0 ? std::conj(x) / mag : Complex(1.0, 0.0);
}

// Applies the pivot phase to column j (and the partner column), pinning the pivot exactly real.
void fix_phase(CMatrix& m, Eigen::Index j, CMatrix* partner = nullptr) {
    const Eigen::Index piv = pivot_index(m.col(j));
    const Complex phase = pivot_phase(m.col(j));
    const double mag = std::abs(m(piv, j));
    m.col(j) *= phase;
    m(piv, j) = Complex(mag, 0.0);
    if (partner) partner->col(j) *= phase;
}

// Column permutation that orders each run of (near-)equal values by pivot index.
std::vector<Eigen::Index> degenerate_order(const RVector& values, const CMatrix& vecs,
                                           Eigen::Index count) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(count));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    if (count == 0) return order;
    double scale = 0.0;
    for (Eigen::Index i = 0; i < count; ++i) scale = std::max(scale, std::abs(values(i)));
    const double tol = 1e-10 * std::max(scale, 1e-300);

    Eigen::Index start = 0;
    while (start < count) {
        Eigen::Index end = start + 1;
        while (end < count && std::abs(values(end) - values(start)) <= tol) ++end;
        std::stable_sort(order.begin() + start, order.begin() + end,
                         [&](Eigen::Index a, Eigen::Index b) {
                             return pivot_index(vecs.col(a)) < pivot_index(vecs.col(b));
                         });
        start = end;
    }
    return order;
}

void normalize_tail(CMatrix& vecs, Eigen::Index from) {
    // Null-space columns carry no value; normalize their phase and sort by pivot.
    const Eigen::Index n = vecs.cols() - from;
    if (n <= 0) return;
    for (Eigen::Index j = from; j < vecs.cols(); ++j) fix_phase(vecs, j);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), from);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return pivot_index(vecs.col(a)) < pivot_index(vecs.col(b));
    });
    CMatrix tail(vecs.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) tail.col(j) = vecs.col(order[static_cast<std::size_t>(j)]);
    vecs.rightCols(n) = tail;
}

}  // namespace

void require_finite(const CMatrix& m, const char* what) {
    if (!m.allFinite()) throw InvalidInput(std::string(what) + ": matrix has non-finite entries");
}

CMatrix hermitian_part(const CMatrix& m) { return 0.5 * (m + m.adjoint()); }

OrderedSVD svd_ordered(const CMatrix& m) {
    require_finite(m, "svd_ordered");
    const Eigen::Index k = std::min(m.rows(), m.cols());
    OrderedSVD out;
    if (m.size() == 0) {
        out.u = CMatrix::Identity(m.rows(), m.rows());
        out.v = CMatrix::Identity(m.cols(), m.cols());
        out.sigma = RVector(0);
        return out;
    }
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    CMatrix u = svd.matrixU();
    CMatrix v = svd.matrixV();
    RVector sigma = svd.singularValues();

    for (Eigen::Index j = 0; j < k; ++j) fix_phase(u, j, &v);
    const auto order = degenerate_order(sigma, u, k);
    out.u = u;
    out.v = v;
    out.sigma = RVector(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        const auto src = order[static_cast<std::size_t>(j)];
        out.u.col(j) = u.col(src);
        out.v.col(j) = v.col(src);
        out.sigma(j) = sigma(src);
    }
    normalize_tail(out.u, k);
    normalize_tail(out.v, k);
    return out;
}

OrderedHermitianEig eig_hermitian_ordered(const CMatrix& m) {
    require_finite(m, "eig_hermitian_ordered");
    if (m.rows() != m.cols()) throw InvalidInput("eig_hermitian_ordered: matrix is not square");
    const double asym = (m - m.adjoint()).norm();
    if (asym > 1e-10 * std::max(1.0, m.norm())) {
        throw InvalidInput("eig_hermitian_ordered: matrix is not Hermitian (||m - m^H||_F = " +
                           std::to_string(asym) + ")");
    }
    const Eigen::Index n = m.rows();
    OrderedHermitianEig out;
    if (n == 0) return out;

    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(m));
    // Eigen returns ascending eigenvalues.
    CMatrix vecs = es.eigenvectors().rowwise().reverse();
    RVector vals = es.eigenvalues().reverse();
    for (Eigen::Index j = 0; j < n; ++j) fix_phase(vecs, j);

    const auto order = degenerate_order(vals, vecs, n);
    out.vectors.resize(n, n);
    out.values.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto src = order[static_cast<std::size_t>(j)];
        out.vectors.col(j) = vecs.col(src);
        out.values(j) = vals(src);
    }
    return out;
}

namespace {

RVector clamped_psd_values(const OrderedHermitianEig& eig, const char* what) {
    const Eigen::Index n = eig.values.size();
    double spectral = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) spectral = std::max(spectral, std::abs(eig.values(i)));
    RVector vals = eig.values;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (vals(i) < -1e-10 * spectral) {
            throw NotPositiveSemidefinite(std::string(what) + ": eigenvalue " +
                                          std::to_string(vals(i)) + " is negative");
        }
        vals(i) = std::max(vals(i), 0.0);
    }
    return vals;
}

}  // namespace

CMatrix herm_sqrt(const CMatrix& m) {
    const auto eig = eig_hermitian_ordered(m);
    const RVector vals = clamped_psd_values(eig, "herm_sqrt");
    const CMatrix s = eig.vectors * vals.cwiseSqrt().asDiagonal() * eig.vectors.adjoint();
    return hermitian_part(s);
}

CMatrix herm_inv_sqrt(const CMatrix& m) {
    const auto eig = eig_hermitian_ordered(m);
    const Eigen::Index n = eig.values.size();
    if (n == 0) return CMatrix(0, 0);
    const double largest = eig.values(0);
    const double smallest = eig.values(n - 1);
    if (!(largest > 0.0) || !(smallest > 1e-12 * largest)) {
        throw SingularMatrix("herm_inv_sqrt: matrix is singular or ill-conditioned (eigenvalues " +
                             std::to_string(smallest) + " .. " + std::to_string(largest) + ")");
    }
    const RVector inv = eig.values.cwiseSqrt().cwiseInverse();
    return hermitian_part(eig.vectors * inv.asDiagonal() * eig.vectors.adjoint());
}

CMatrix hermitian_solve(const CMatrix& m, const CMatrix& rhs) {
    Eigen::LLT<CMatrix> llt(hermitian_part(m));
    if (llt.info() != Eigen::Success) {
        // Fall back to a pivoted factorization for semidefinite-leaning inputs.
        Eigen::LDLT<CMatrix> ldlt(hermitian_part(m));
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
            throw SingularMatrix("hermitian_solve: matrix is not positive definite");
        }
        return ldlt.solve(rhs);
    }
    return llt.solve(rhs);
}

double subspace_angle(const CMatrix& a, const CMatrix& b) {
    if (a.cols() != b.cols() || a.rows() != b.rows()) {
        throw InvalidInput("subspace_angle: shape mismatch");
    }
    if (a.cols() == 0) return 0.0;
    const CMatrix resid = b - a * (a.adjoint() * b);
    Eigen::JacobiSVD<CMatrix> svd(resid);
    const double s = std::min(1.0, svd.singularValues()(0));
    return std::asin(s);
}

}  // namespace afrelay

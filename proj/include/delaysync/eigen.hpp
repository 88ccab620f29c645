#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "delaysync/matrix.hpp"

namespace delaysync {

/// Eigenvalues of a square matrix plus the spectral radius.
struct Spectrum {
    std::vector<std::complex<double>> eigenvalues;
    double spectral_radius = 0.0;
};

namespace detail {

using cplx = std::complex<double>;

/// Householder reduction to upper Hessenberg form, in place.
inline void hessenberg(ComplexMatrix& h) {
    const std::size_t n = h.rows();
    for (std::size_t k = 0; k + 2 < n; ++k) {
        // Build the reflector annihilating column k below the subdiagonal.
        double scale = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) scale += std::abs(h(i, k));
        if (scale == 0.0) continue;
        std::vector<cplx> v(n - k - 1);
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i - k - 1] = h(i, k) / scale;
            vnorm2 += std::norm(v[i - k - 1]);
        }
        cplx a0 = v[0];
        const double alpha = std::sqrt(vnorm2);
        cplx phase = (std::abs(a0) == 0.0) ? cplx(1.0) : a0 / std::abs(a0);
        v[0] += phase * alpha;
        double vn2 = 0.0;
        for (const auto& vi : v) vn2 += std::norm(vi);
        if (vn2 == 0.0) continue;
        // H = I - 2 v v* / (v* v); apply from left and right.
        for (std::size_t j = 0; j < n; ++j) {
            cplx s{};
            for (std::size_t i = k + 1; i < n; ++i) s += std::conj(v[i - k - 1]) * h(i, j);
            s *= 2.0 / vn2;
            for (std::size_t i = k + 1; i < n; ++i) h(i, j) -= v[i - k - 1] * s;
        }
        for (std::size_t i = 0; i < n; ++i) {
            cplx s{};
            for (std::size_t j = k + 1; j < n; ++j) s += h(i, j) * v[j - k - 1];
            s *= 2.0 / vn2;
            for (std::size_t j = k + 1; j < n; ++j) h(i, j) -= s * std::conj(v[j - k - 1]);
        }
        for (std::size_t i = k + 2; i < n; ++i) h(i, k) = cplx{};
    }
}

/// Wilkinson shift: the eigenvalue of the trailing 2x2 closest to h(hi,hi).
inline cplx wilkinson_shift(const ComplexMatrix& h, std::size_t hi) {
    const cplx a = h(hi - 1, hi - 1), b = h(hi - 1, hi);
    const cplx c = h(hi, hi - 1), d = h(hi, hi);
    const cplx tr = a + d;
    const cplx det = a * d - b * c;
    const cplx disc = std::sqrt(tr * tr - 4.0 * det);
    const cplx l1 = 0.5 * (tr + disc), l2 = 0.5 * (tr - disc);
    return (std::abs(l1 - d) < std::abs(l2 - d)) ? l1 : l2;
}

struct Givens {
    double c;
    cplx s;
};

inline Givens make_givens(cplx a, cplx b) {
    const double na = std::abs(a), nb = std::abs(b);
    if (nb == 0.0) return {1.0, cplx{}};
    const double r = std::hypot(na, nb);
    // Rotation [c, conj(s); -s, c] maps (a,b) to (r*phase, 0).
    cplx phase = (na == 0.0) ? cplx(1.0) : a / na;
    return {na / r, std::conj(b) * phase / r};
}

} // namespace detail

/// All eigenvalues of a square complex matrix via Hessenberg reduction and
/// shifted QR iteration. tol scales the subdiagonal deflation threshold.
inline Spectrum eigenvalues(ComplexMatrix m, double tol = 1e-10) {
    using detail::cplx;
    if (!m.square()) throw DimensionError("eigenvalues: matrix not square " + m.shape_str());
    if (!m.all_finite()) throw DimensionError("eigenvalues: non-finite entries");
    if (tol <= 0.0) throw DimensionError("eigenvalues: tol must be positive");
    const std::size_t n = m.rows();
    Spectrum out;
    if (n == 0) return out;

    detail::hessenberg(m);
    std::vector<cplx> eig(n);
    const std::size_t max_iter = 100 * n * n + 200;
    std::size_t iter = 0;
    std::size_t hi = n - 1;
    while (true) {
        // Deflate tiny subdiagonals in the active window.
        std::size_t lo = hi;
        while (lo > 0) {
            const double s = std::abs(m(lo - 1, lo - 1)) + std::abs(m(lo, lo));
            const double thresh = tol * std::max(s, 1e-300);
            if (std::abs(m(lo, lo - 1)) <= thresh) {
                m(lo, lo - 1) = cplx{};
                break;
            }
            --lo;
        }
        if (lo == hi) {
            eig[hi] = m(hi, hi);
            if (hi == 0) break;
            --hi;
            continue;
        }
        if (++iter > max_iter)
            throw ConvergenceError("eigenvalues: QR iteration cap exceeded");

        // One shifted QR sweep on rows/cols [lo, hi].
        cplx shift = detail::wilkinson_shift(m, hi);
        if (iter % 29 == 0) {
            // Exceptional ad-hoc shift to break symmetric stalls.
            shift = cplx(std::abs(m(hi, hi - 1)) + std::abs(m(hi, hi)), 0.0);
        }
        cplx x = m(lo, lo) - shift;
        cplx y = m(lo + 1, lo);
        for (std::size_t k = lo; k < hi; ++k) {
            const auto g = detail::make_givens(x, y);
            // Similarity transform G M G^H on rows/cols k, k+1 (bulge chase).
            const std::size_t jstart = (k == 0) ? 0 : k - 1;
            for (std::size_t j = jstart; j < n; ++j) {
                const cplx t1 = m(k, j), t2 = m(k + 1, j);
                m(k, j) = g.c * t1 + g.s * t2;
                m(k + 1, j) = -std::conj(g.s) * t1 + g.c * t2;
            }
            const std::size_t iend = std::min(k + 2, hi) + 1;
            for (std::size_t i = 0; i < iend; ++i) {
                const cplx t1 = m(i, k), t2 = m(i, k + 1);
                m(i, k) = g.c * t1 + std::conj(g.s) * t2;
                m(i, k + 1) = -g.s * t1 + g.c * t2;
            }
            if (k + 1 < hi) {
                x = m(k + 1, k);
                y = m(k + 2, k);
            }
        }
    }

    out.eigenvalues = std::move(eig);
    for (const auto& l : out.eigenvalues)
        out.spectral_radius = std::max(out.spectral_radius, std::abs(l));
    return out;
}

inline Spectrum eigenvalues(const RealMatrix& m, double tol = 1e-10) {
    return eigenvalues(to_complex(m), tol);
}

template <typename T>
double spectral_radius(const Matrix<T>& m) {
    return eigenvalues(m).spectral_radius;
}

/// Strict Schur test: spectral radius < 1 - margin.
inline bool is_schur(const RealMatrix& m, double margin = 0.0) {
    if (!m.square()) throw DimensionError("is_schur: matrix not square");
    return spectral_radius(m) < 1.0 - margin;
}

inline bool is_schur(const ComplexMatrix& m, double margin = 0.0) {
    if (!m.square()) throw DimensionError("is_schur: matrix not square");
    return spectral_radius(m) < 1.0 - margin;
}

} // namespace delaysync

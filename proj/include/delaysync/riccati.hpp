#pragma once

#include "delaysync/eigen.hpp"
#include "delaysync/matrix.hpp"

namespace delaysync {

struct RiccatiOptions {
    double residual_tol = 1e-10;
    std::size_t max_iterations = 10000;
};

/// Stabilizing state-feedback gain K with A - B K Schur, via fixed-point
/// iteration on the discrete algebraic Riccati equation
///   P <- A'PA - A'PB (R + B'PB)^{-1} B'PA + Q.
/// Q defaults to I and R to I when empty.
inline RealMatrix synthesize_state_gain(const RealMatrix& a, const RealMatrix& b,
                                        RealMatrix q = {}, RealMatrix r = {},
                                        const RiccatiOptions& opt = {}) {
    if (!a.square()) throw DimensionError("synthesize_state_gain: A not square");
    if (b.rows() != a.rows()) throw DimensionError("synthesize_state_gain: B row mismatch");
    const std::size_t n = a.rows();
    const std::size_t m = b.cols();
    if (q.empty()) q = RealMatrix::identity(n);
    if (r.empty()) r = RealMatrix::identity(m);
    if (m == 0 || b.max_abs() == 0.0) {
        // No control authority; acceptable only if A is already Schur.
        if (!is_schur(a)) throw SynthesisError("synthesize_state_gain: B = 0 and A not Schur");
        return RealMatrix::zeros(m, n);
    }

    const RealMatrix at = a.transpose();
    const RealMatrix bt = b.transpose();
    RealMatrix p = q;
    RealMatrix k;
    for (std::size_t it = 0; it < opt.max_iterations; ++it) {
        const RealMatrix btp = bt * p;
        k = solve(r + btp * b, btp * a);
        const RealMatrix pn = at * p * (a - b * k) + q;
        const double delta = (pn - p).max_abs();
        p = pn;
        if (delta < opt.residual_tol) {
            const RealMatrix btp2 = bt * p;
            k = solve(r + btp2 * b, btp2 * a);
            if (!is_schur(a - b * k))
                throw SynthesisError("synthesize_state_gain: converged but closed loop not Schur");
            return k;
        }
        if (!p.all_finite())
            throw SynthesisError("synthesize_state_gain: Riccati iteration diverged");
    }
    throw SynthesisError("synthesize_state_gain: iteration stalled above residual tolerance");
}

/// Observer gain H with A - H C Schur, by duality on (A', C').
inline RealMatrix synthesize_observer_gain(const RealMatrix& a, const RealMatrix& c,
                                           RealMatrix q = {}, RealMatrix r = {},
                                           const RiccatiOptions& opt = {}) {
    if (!a.square()) throw DimensionError("synthesize_observer_gain: A not square");
    if (c.cols() != a.rows()) throw DimensionError("synthesize_observer_gain: C col mismatch");
    try {
        return synthesize_state_gain(a.transpose(), c.transpose(), std::move(q), std::move(r), opt)
            .transpose();
    } catch (const SynthesisError&) {
        throw SynthesisError("synthesize_observer_gain: (A, C) pair not detectable");
    }
}

} // namespace delaysync

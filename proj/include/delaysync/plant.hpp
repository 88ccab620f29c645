#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "delaysync/eigen.hpp"
#include "delaysync/matrix.hpp"
#include "delaysync/riccati.hpp"

namespace delaysync {

/// Discrete-time linear agent x(k+1) = A x + B u, y = C x, with an optional
/// local measurement z = C_m x for introspective agents.
struct AgentModel {
    RealMatrix a; // n x n
    RealMatrix b; // n x m
    RealMatrix c; // p x n
    RealMatrix c_m; // q x n, empty unless introspective

    std::size_t state_dim() const { return a.rows(); }
    std::size_t input_dim() const { return b.cols(); }
    std::size_t output_dim() const { return c.rows(); }
    bool introspective() const { return !c_m.empty(); }

    void check_dimensions() const {
        if (!a.square()) throw ModelError("agent A must be square");
        if (b.rows() != a.rows()) throw ModelError("agent B row count != state dim");
        if (c.cols() != a.rows()) throw ModelError("agent C col count != state dim");
        if (!c_m.empty() && c_m.cols() != a.rows())
            throw ModelError("agent C_m col count != state dim");
    }

    /// Eigenvalues of A within the closed unit disc (up to tol).
    bool eigenvalues_in_closed_disc(double tol = 1e-9) const {
        return spectral_radius(a) <= 1.0 + tol;
    }

    /// Numeric right-invertibility: the system pencil [A - l I, B; C, 0]
    /// has full row rank at a generic point l.
    bool right_invertible(double tol = 1e-8) const {
        const std::size_t n = state_dim(), m = input_dim(), p = output_dim();
        ComplexMatrix pencil(n + p, n + m);
        const std::complex<double> lambda(0.73142, 0.41923); // generic probe point
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) pencil(i, j) = a(i, j);
            pencil(i, i) -= lambda;
            for (std::size_t j = 0; j < m; ++j) pencil(i, n + j) = b(i, j);
        }
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < n; ++j) pencil(n + i, j) = c(i, j);
        return numeric_rank(pencil, tol) == n + p;
    }
};

inline void step_agent(const AgentModel& model, const Vec& x, const Vec& u, Vec& x_next,
                       Vec& y, Vec& z) {
    if (x.rows() != model.state_dim() || u.rows() != model.input_dim())
        throw DimensionError("step_agent: state/input width mismatch");
    x_next = model.a * x + model.b * u;
    y = model.c * x;
    z = model.introspective() ? model.c_m * x : Vec{};
}

/// Autonomous reference generator x_r(k+1) = A_r x_r, y_r = C_r x_r.
struct Exosystem {
    RealMatrix a_r;
    RealMatrix c_r;
    Vec x_r0;

    std::size_t state_dim() const { return a_r.rows(); }
    std::size_t output_dim() const { return c_r.rows(); }

    /// Observability of (C_r, A_r) plus all eigenvalues on the unit circle.
    void check_assumptions(double tol = 1e-7) const {
        const std::size_t r = state_dim(), p = output_dim();
        RealMatrix obs(p * r, r);
        RealMatrix cak = c_r;
        for (std::size_t k = 0; k < r; ++k) {
            obs.set_block(k * p, 0, cak);
            cak = cak * a_r;
        }
        if (numeric_rank(obs) != r)
            throw ModelError("exosystem (C_r, A_r) is not observable");
        for (const auto& l : eigenvalues(a_r).eigenvalues)
            if (std::abs(std::abs(l) - 1.0) > tol)
                throw ModelError("exosystem eigenvalue off the unit circle");
    }
};

inline void step_exosystem(const Exosystem& exo, const Vec& x_r, Vec& x_r_next, Vec& y_r) {
    if (x_r.rows() != exo.state_dim())
        throw DimensionError("step_exosystem: state width mismatch");
    x_r_next = exo.a_r * x_r;
    y_r = exo.c_r * x_r;
}

/// Remodeled exosystem (C_r_check, A_r_check, B_r_check): square invertible,
/// uniform rank n_q, no invariant zeros. A_r_check is in companion form with
/// output selecting the first state and input entering the last.
struct TargetModel {
    RealMatrix a_r; // r_check x r_check
    RealMatrix b_r; // r_check x p
    RealMatrix c_r; // p x r_check
    std::size_t uniform_rank = 0; // n_q

    std::size_t state_dim() const { return a_r.rows(); }

    /// Markov-parameter test: C A^i B zero below n_q - 1 and invertible there.
    void check_uniform_rank(double tol = 1e-10) const {
        RealMatrix cak = c_r;
        for (std::size_t i = 0; i + 1 < uniform_rank; ++i) {
            if ((cak * b_r).max_abs() > tol)
                throw ModelError("target model Markov parameter nonzero below uniform rank");
            cak = cak * a_r;
        }
        const RealMatrix last = cak * b_r;
        if (numeric_rank(last, tol) != last.rows())
            throw ModelError("target model Markov parameter singular at uniform rank");
    }

    bool companion_form(double tol = 1e-12) const {
        const std::size_t r = state_dim();
        if (c_r.rows() != 1 || b_r.cols() != 1) return false;
        for (std::size_t j = 0; j < r; ++j) {
            if (std::abs(c_r(0, j) - (j == 0 ? 1.0 : 0.0)) > tol) return false;
            if (std::abs(b_r(j, 0) - (j + 1 == r ? 1.0 : 0.0)) > tol) return false;
        }
        for (std::size_t i = 0; i + 1 < r; ++i)
            for (std::size_t j = 0; j < r; ++j)
                if (std::abs(a_r(i, j) - (j == i + 1 ? 1.0 : 0.0)) > tol) return false;
        return true;
    }
};

namespace detail {

/// Characteristic polynomial coefficients (monic, ascending powers) via the
/// Faddeev-LeVerrier recurrence.
inline std::vector<double> char_poly(const RealMatrix& a) {
    const std::size_t n = a.rows();
    std::vector<double> c(n + 1, 0.0);
    c[n] = 1.0;
    RealMatrix m = RealMatrix::zeros(n, n);
    for (std::size_t k = 1; k <= n; ++k) {
        m = a * m;
        for (std::size_t i = 0; i < n; ++i) m(i, i) += c[n - k + 1];
        double tr = 0.0;
        RealMatrix am = a * m;
        for (std::size_t i = 0; i < n; ++i) tr += am(i, i);
        c[n - k] = -tr / static_cast<double>(k);
    }
    return c;
}

} // namespace detail

/// Builds the target model of uniform rank n_q >= max(requested agent
/// infinite-zero orders, exosystem order): a companion chain whose
/// characteristic polynomial is lambda^(n_q - r) times that of A_r, so the
/// spectrum is the exosystem spectrum plus extra zeros.
inline TargetModel remodel_exosystem(const Exosystem& exo,
                                     const std::vector<std::size_t>& agent_orders) {
    exo.check_assumptions();
    if (exo.output_dim() != 1)
        throw ModelError("remodel_exosystem: only single-output exosystems are supported");
    const std::size_t r = exo.state_dim();
    std::size_t n_q = r; // observability index of a single-output observable pair
    for (const std::size_t o : agent_orders) n_q = std::max(n_q, o);

    const std::vector<double> p = detail::char_poly(exo.a_r);
    TargetModel t;
    t.uniform_rank = n_q;
    t.a_r = RealMatrix::zeros(n_q, n_q);
    for (std::size_t i = 0; i + 1 < n_q; ++i) t.a_r(i, i + 1) = 1.0;
    // lambda^(n_q - r) * p(lambda): coefficient of lambda^k is p[k - (n_q - r)].
    for (std::size_t j = 0; j < n_q; ++j) {
        const std::size_t shift = n_q - r;
        t.a_r(n_q - 1, j) = (j >= shift) ? -p[j - shift] : 0.0;
    }
    t.b_r = RealMatrix::zeros(n_q, 1);
    t.b_r(n_q - 1, 0) = 1.0;
    t.c_r = RealMatrix::zeros(1, n_q);
    t.c_r(0, 0) = 1.0;
    t.check_uniform_rank();
    return t;
}

/// Initial target-model state reproducing the exosystem output:
/// x_check_j(0) = y_r(j - 1).
inline Vec remodeled_initial_state(const Exosystem& exo, const TargetModel& target,
                                   const Vec& x_r0) {
    Vec out(target.state_dim(), 1);
    Vec x = x_r0;
    for (std::size_t j = 0; j < target.state_dim(); ++j) {
        out[j] = (exo.c_r * x)[0];
        x = exo.a_r * x;
    }
    return out;
}

/// Local dynamic feedback making an agent match the target model:
///   xi(k+1) = A_h xi + B_h z + E_h v
///   u(k)    = C_h xi + D_h v + F_h z
/// The compensated cascade satisfies x_h(k+1) = A_target x_h + B_target (v + rho)
/// with rho(k) = C_s omega(k), omega(k+1) = A_s omega(k) and A_s Schur.
/// omega(0) = W_x x(0) + W_xi xi(0).
struct PreCompensator {
    RealMatrix a_h, b_h, e_h; // compensator dynamics
    RealMatrix c_h, d_h, f_h; // output map (f_h is the feedthrough from z)
    RealMatrix a_s, c_s;      // mismatch dynamics of Eq-style rho channel
    RealMatrix w_x, w_xi;     // initial-mismatch map
    std::size_t state_dim() const { return a_h.rows(); }
    std::size_t mismatch_dim() const { return a_s.rows(); }

    Vec initial_mismatch(const Vec& x0, const Vec& xi0) const {
        Vec w(mismatch_dim(), 1);
        if (mismatch_dim() == 0) return w;
        w = w_x * x0;
        if (state_dim() > 0) w = w + w_xi * xi0;
        return w;
    }

    /// Homogenized state equivalent to (x0, xi0): the target-model state the
    /// compensated cascade embodies from step 0.
    Vec initial_homogenized_state(const TargetModel& target, const Vec& x0,
                                  const Vec& xi0) const {
        if (mismatch_dim() == 0 && state_dim() == 0 && f_h.cols() == x0.rows() &&
            x0.rows() == target.state_dim())
            return x0; // static matching: the agent state is the target state
        Vec xh = xi0;
        const Vec w0 = initial_mismatch(x0, xi0);
        for (std::size_t j = 0; j < std::min<std::size_t>(w0.rows(), xh.rows()); ++j)
            xh[j] += w0[j];
        return xh;
    }
};

namespace detail {

inline bool try_static_matching(const AgentModel& agent, const TargetModel& target,
                                PreCompensator& out, double tol = 1e-9) {
    const std::size_t n = agent.state_dim();
    if (n != target.state_dim()) return false;
    if ((agent.c - target.c_r).max_abs() > tol) return false;
    if (!agent.introspective()) return false;
    if ((agent.c_m - RealMatrix::identity(n)).max_abs() > tol) return false;
    // Solve B F = A_target - A and B D = B_target in the least-squares sense.
    const RealMatrix f = lstsq(agent.b, target.a_r - agent.a);
    const RealMatrix d = lstsq(agent.b, target.b_r);
    if ((agent.b * f - (target.a_r - agent.a)).max_abs() > tol) return false;
    if ((agent.b * d - target.b_r).max_abs() > tol) return false;
    out = PreCompensator{};
    out.a_h = RealMatrix::zeros(0, 0);
    out.b_h = RealMatrix::zeros(0, n);
    out.e_h = RealMatrix::zeros(0, target.b_r.cols());
    out.c_h = RealMatrix::zeros(agent.input_dim(), 0);
    out.d_h = d;
    out.f_h = f;
    out.a_s = RealMatrix::zeros(0, 0);
    out.c_s = RealMatrix::zeros(1, 0);
    out.w_x = RealMatrix::zeros(0, n);
    out.w_xi = RealMatrix::zeros(0, 0);
    return true;
}

} // namespace detail

/// Constructs a pre-compensator homogenizing an introspective agent (full
/// state measurement) to a companion-form target model. Tries exact static
/// model matching first, then the relative-degree construction: the output
/// chain is pinned to an internal target-model copy, remaining input freedom
/// stabilizes the internal dynamics, and the mismatch rho is dead-beat.
inline PreCompensator homogenize(const AgentModel& agent, const TargetModel& target) {
    agent.check_dimensions();
    if (agent.output_dim() != 1 || target.c_r.rows() != 1)
        throw HomogenizationError("homogenize: only single-output agents are supported");

    PreCompensator pre;
    if (detail::try_static_matching(agent, target, pre)) return pre;

    if (!agent.introspective() ||
        (agent.c_m - RealMatrix::identity(agent.state_dim())).max_abs() > 1e-12)
        throw HomogenizationError(
            "homogenize: dynamic construction requires full state measurement (C_m = I)");
    if (!target.companion_form())
        throw HomogenizationError("homogenize: target model must be in companion form");
    if (!agent.right_invertible())
        throw HomogenizationError("homogenize: agent is not right-invertible");

    const std::size_t n = agent.state_dim();
    const std::size_t m = agent.input_dim();
    const std::size_t nq = target.state_dim();

    // Relative degree d: first i with C A^(i-1) B nonzero.
    std::size_t d = 0;
    RealMatrix g;
    RealMatrix cak = agent.c;
    for (std::size_t i = 1; i <= n; ++i) {
        g = cak * agent.b;
        if (g.max_abs() > 1e-9) { d = i; break; }
        cak = cak * agent.a;
    }
    if (d == 0 || d > nq)
        throw HomogenizationError("homogenize: agent relative degree exceeds target uniform rank");

    const RealMatrix ca_d = cak * agent.a; // C A^d
    const double gn2 = (g * g.transpose())(0, 0);
    const RealMatrix g_pinv = g.transpose() * (1.0 / gn2); // m x 1

    // Null-space directions of g absorb the remaining input freedom.
    RealMatrix null_basis(m, m > 0 ? m - 1 : 0);
    {
        // Gram-Schmidt complement of g within R^m.
        std::vector<Vec> basis;
        Vec gdir = g.transpose() * (1.0 / std::sqrt(gn2));
        for (std::size_t j = 0; j < m && basis.size() + 1 < m + 1; ++j) {
            Vec e(m, 1);
            e[j] = 1.0;
            Vec v = e - gdir * (gdir.transpose() * e)(0, 0);
            for (const auto& bvec : basis) v = v - bvec * (bvec.transpose() * v)(0, 0);
            const double nrm = v.norm();
            if (nrm > 1e-10 && basis.size() < m - 1) basis.push_back(v * (1.0 / nrm));
        }
        if (basis.size() != m - 1)
            throw HomogenizationError("homogenize: could not build input null-space basis");
        null_basis = RealMatrix::zeros(m, m - 1);
        for (std::size_t j = 0; j < basis.size(); ++j)
            null_basis.set_block(0, j, basis[j]);
    }

    // Output-pinned dynamics A - B g+ C A^d; stabilize with the null inputs.
    const RealMatrix a_pinned = agent.a - agent.b * g_pinv * ca_d;
    RealMatrix f_stab = RealMatrix::zeros(m > 0 ? m - 1 : 0, n);
    if (m > 1) {
        try {
            f_stab = synthesize_state_gain(a_pinned, agent.b * null_basis);
        } catch (const SynthesisError&) {
            throw HomogenizationError(
                "homogenize: internal dynamics not stabilizable with remaining inputs");
        }
    } else if (!is_schur(a_pinned, -1e-9)) {
        throw HomogenizationError("homogenize: no input freedom left and internal dynamics unstable");
    }

    const RealMatrix cr_ar_d = target.c_r * matrix_power(target.a_r, static_cast<unsigned>(d));
    const RealMatrix cr_ar_dm1_br =
        target.c_r * matrix_power(target.a_r, static_cast<unsigned>(d - 1)) * target.b_r;

    pre = PreCompensator{};
    pre.a_h = target.a_r;
    pre.b_h = RealMatrix::zeros(nq, n);
    pre.e_h = target.b_r;
    pre.c_h = g_pinv * cr_ar_d;
    pre.d_h = g_pinv * cr_ar_dm1_br;
    pre.f_h = -(g_pinv * ca_d) - (m > 1 ? null_basis * f_stab : RealMatrix::zeros(m, n));

    // Mismatch channel: omega(k+1) = (A_target - B_target a') omega, a pure
    // shift for companion targets, so rho dies out in at most n_q steps.
    pre.a_s = target.a_r - target.b_r * target.a_r.row(nq - 1);
    pre.c_s = -target.a_r.row(nq - 1);
    pre.w_x = RealMatrix::zeros(nq, n);
    pre.w_xi = RealMatrix::zeros(nq, nq);
    RealMatrix caj = agent.c;
    for (std::size_t j = 0; j < d; ++j) {
        pre.w_x.set_block(j, 0, caj);
        pre.w_xi(j, j) = -1.0;
        caj = caj * agent.a;
    }
    return pre;
}

/// Simulation check of the homogenization contract: from a random initial
/// state, the compensated cascade's output matches the target model driven
/// by the same input from the reported homogenized initial state, with the
/// mismatch decaying below tol within the horizon.
inline double homogenization_mismatch(const AgentModel& agent, const PreCompensator& pre,
                                      const TargetModel& target, unsigned seed,
                                      std::size_t horizon = 500) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Vec x(agent.state_dim(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) x[i] = dist(rng);
    Vec xi(pre.state_dim(), 1);
    for (std::size_t i = 0; i < xi.rows(); ++i) xi[i] = dist(rng);
    // The cascade tracks its internal target-model copy (the mismatch rho is
    // dead-beat), so the reference starts from xi(0); static matching embeds
    // the agent state itself.
    Vec xh = pre.state_dim() > 0 ? xi : x;

    double late_mismatch = 0.0;
    for (std::size_t k = 0; k < horizon; ++k) {
        Vec v(1, 1);
        v[0] = std::sin(0.3 * static_cast<double>(k)) + 0.2 * dist(rng);
        Vec u = pre.d_h * v + pre.f_h * x;
        if (pre.state_dim() > 0) u = u + pre.c_h * xi;
        const double err = std::abs((agent.c * x)[0] - (target.c_r * xh)[0]);
        if (k >= horizon / 2) late_mismatch = std::max(late_mismatch, err);
        x = agent.a * x + agent.b * u;
        if (pre.state_dim() > 0) xi = pre.a_h * xi + pre.e_h * v; // b_h z is zero here
        xh = target.a_r * xh + target.b_r * v;
    }
    return late_mismatch;
}

} // namespace delaysync

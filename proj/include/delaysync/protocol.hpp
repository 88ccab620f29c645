#pragma once

#include <vector>

#include "delaysync/matrix.hpp"
#include "delaysync/plant.hpp"

namespace delaysync {

/// Network coupling signal
///   zeta_bar_i = (s_i - s_r(k - kappa_ir))
///                - sum_j dbar_ij (s_j(k - kappa_ij) - s_r(k - kappa_ir)),
/// where s is whatever quantity is exchanged over the plant channel (agent
/// output or full state). The sum runs over all j including j = i, whose
/// entry is undelayed by construction (kappa_ii = 0), and the reference term
/// carries the single cumulative delay kappa_ir.
///
/// `delayed[j]` must hold s_j(k - kappa_ij); `delayed[i]` is s_i itself.
inline Vec coupling_zeta_bar(const RealMatrix& contraction, std::size_t i, const Vec& s_i,
                             const std::vector<Vec>& delayed, const Vec& s_r_delayed) {
    if (i >= contraction.rows() || delayed.size() != contraction.cols())
        throw DimensionError("coupling_zeta_bar: index/width mismatch");
    Vec zeta = s_i - s_r_delayed;
    for (std::size_t j = 0; j < delayed.size(); ++j) {
        const double w = contraction(i, j);
        if (w == 0.0) continue;
        zeta = zeta - (delayed[j] - s_r_delayed) * w;
    }
    return zeta;
}

/// Protocol-channel coupling signal
///   zeta_hat_i = chi_i - sum_j dbar_ij chi_j(k - kappa_hat_ij),
/// with the j = i term undelayed (kappa_hat_ii = 0). `delayed[j]` must hold
/// chi_j(k - kappa_hat_ij); `delayed[i]` is chi_i itself.
inline Vec coupling_zeta_hat(const RealMatrix& contraction, std::size_t i, const Vec& chi_i,
                             const std::vector<Vec>& delayed) {
    if (i >= contraction.rows() || delayed.size() != contraction.cols())
        throw DimensionError("coupling_zeta_hat: index/width mismatch");
    Vec zeta = chi_i;
    for (std::size_t j = 0; j < delayed.size(); ++j) {
        const double w = contraction(i, j);
        if (w == 0.0) continue;
        zeta = zeta - delayed[j] * w;
    }
    return zeta;
}

/// Per-agent protocol memory. `chi` is the internal protocol state exchanged
/// over the protocol channel; `xhat` is the local observer state (empty for
/// the full-state protocol).
struct ProtocolState {
    Vec chi;
    Vec xhat;
};

/// Full-state protocol (state coupling over the plant channel):
///   chi(k+1) = A chi + B u + A zeta_bar - A zeta_hat,  u = -K chi.
/// Returns the control input applied at step k; updates `state` in place.
inline Vec protocol1_step(const AgentModel& model, const RealMatrix& k_gain,
                          ProtocolState& state, const Vec& zeta_bar, const Vec& zeta_hat) {
    const Vec u = -(k_gain * state.chi);
    state.chi = model.a * state.chi + model.b * u + model.a * (zeta_bar - zeta_hat);
    return u;
}

/// Partial-state protocol (output coupling over the plant channel):
///   xhat(k+1) = A xhat - B K zeta_hat + H (zeta_bar - C xhat)
///   chi(k+1)  = A chi + B u + A xhat - A zeta_hat,  u = -K chi.
inline Vec protocol2_step(const AgentModel& model, const RealMatrix& k_gain,
                          const RealMatrix& h_gain, ProtocolState& state, const Vec& zeta_bar,
                          const Vec& zeta_hat) {
    const Vec u = -(k_gain * state.chi);
    const Vec xhat_next = model.a * state.xhat - model.b * (k_gain * zeta_hat) +
                          h_gain * (zeta_bar - model.c * state.xhat);
    state.chi = model.a * state.chi + model.b * u + model.a * state.xhat -
                model.a * zeta_hat;
    state.xhat = xhat_next;
    return u;
}

/// Heterogeneous protocol, formulated on the shared target model; the return
/// value is the intermediate input v fed to the agent's pre-compensator:
///   xhat(k+1) = Ar xhat - Br K zeta_hat + H (zeta_bar - Cr xhat)
///   chi(k+1)  = (Ar - Br K) chi + Ar xhat - Ar zeta_hat,  v = -K chi.
inline Vec protocol3_step(const TargetModel& target, const RealMatrix& k_gain,
                          const RealMatrix& h_gain, ProtocolState& state, const Vec& zeta_bar,
                          const Vec& zeta_hat) {
    const Vec v = -(k_gain * state.chi);
    const Vec xhat_next = target.a_r * state.xhat - target.b_r * (k_gain * zeta_hat) +
                          h_gain * (zeta_bar - target.c_r * state.xhat);
    state.chi = target.a_r * state.chi + target.b_r * v + target.a_r * state.xhat -
                target.a_r * zeta_hat;
    state.xhat = xhat_next;
    return v;
}

} // namespace delaysync

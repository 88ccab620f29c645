#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "delaysync/delayline.hpp"
#include "delaysync/eigen.hpp"
#include "delaysync/matrix.hpp"
#include "delaysync/plant.hpp"
#include "delaysync/protocol.hpp"
#include "delaysync/riccati.hpp"
#include "delaysync/topology.hpp"

namespace delaysync {

enum class ProtocolVariant { full_state, partial_state, heterogeneous };

inline std::string to_string(ProtocolVariant v) {
    switch (v) {
        case ProtocolVariant::full_state: return "full_state";
        case ProtocolVariant::partial_state: return "partial_state";
        case ProtocolVariant::heterogeneous: return "heterogeneous";
    }
    return "?";
}

/// Gains are either explicit matrices or synthesized from the agent (or
/// target) model with the given weights (identity when empty).
struct GainSpec {
    RealMatrix k;
    RealMatrix h;
    RealMatrix q;
    RealMatrix r;
};

struct Scenario {
    std::string name = "scenario";
    ProtocolVariant variant = ProtocolVariant::full_state;
    std::vector<AgentModel> agents; // one shared model, or one per node
    Exosystem exo;
    GainSpec gains;
    NetworkTopology topology;
    std::size_t horizon = 2000;
    double tolerance = 1e-4;
    PrefillPolicy prefill = PrefillPolicy::zeros;
    unsigned seed = 1;
    double initial_scale = 1.0;
    std::vector<Vec> initial_states; // optional explicit agent states (input order)
    double divergence_threshold = 1e9;
};

/// A scenario after validation: reordered topology, derived network
/// matrices, per-node models, resolved gains, and (for the heterogeneous
/// variant) the target model plus per-node pre-compensators.
struct ResolvedScenario {
    Scenario source;
    DerivedNetwork network;
    std::vector<AgentModel> agents; // size N, root-first order
    RealMatrix k_gain;
    RealMatrix h_gain;
    bool gains_schur = false;       // closed loop(s) verified Schur
    TargetModel target;             // heterogeneous only
    std::vector<PreCompensator> compensators; // heterogeneous only
    Vec reference_initial;          // x_r0, or the remodeled target state

    std::size_t agent_count() const { return network.agent_count; }
};

namespace detail {

inline std::size_t relative_degree(const AgentModel& m) {
    RealMatrix cak = m.c;
    for (std::size_t i = 1; i <= m.state_dim(); ++i) {
        if ((cak * m.b).max_abs() > 1e-9) return i;
        cak = cak * m.a;
    }
    return m.state_dim();
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ScenarioError(msg);
}

} // namespace detail

/// Validates a scenario end to end and resolves everything the simulation
/// and the certificate need. Gains are synthesized when not given; the
/// Schur property of the closed loops is recorded (not enforced) so that
/// deliberately destabilized scenarios still run to their horizon.
inline ResolvedScenario resolve(const Scenario& s) {
    ResolvedScenario r;
    r.source = s;
    r.network = derive(s.topology);
    const std::size_t n_agents = r.network.agent_count;

    detail::require(!s.agents.empty(), "scenario has no agent model");
    detail::require(s.agents.size() == 1 || s.agents.size() == n_agents,
                    "agent model count must be 1 or match the node count");
    r.agents.resize(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) {
        const std::size_t src = s.agents.size() == 1 ? 0 : r.network.topology.permutation[i];
        r.agents[i] = s.agents[src];
        r.agents[i].check_dimensions();
    }
    detail::require(s.horizon > 0, "horizon must be positive");
    detail::require(s.tolerance > 0.0, "tolerance must be positive");
    if (!s.initial_states.empty())
        detail::require(s.initial_states.size() == n_agents,
                        "explicit initial states must cover every node");

    const RealMatrix q = s.gains.q;
    const RealMatrix rw = s.gains.r;

    if (s.variant == ProtocolVariant::heterogeneous) {
        std::vector<std::size_t> orders;
        orders.reserve(n_agents);
        for (const auto& a : r.agents) orders.push_back(detail::relative_degree(a));
        r.target = remodel_exosystem(s.exo, orders);
        r.compensators.reserve(n_agents);
        for (const auto& a : r.agents) r.compensators.push_back(homogenize(a, r.target));
        r.reference_initial = remodeled_initial_state(s.exo, r.target, s.exo.x_r0);

        r.k_gain = s.gains.k.empty()
                       ? synthesize_state_gain(r.target.a_r, r.target.b_r, q, rw)
                       : s.gains.k;
        r.h_gain = s.gains.h.empty()
                       ? synthesize_observer_gain(r.target.a_r, r.target.c_r, q, rw)
                       : s.gains.h;
        detail::require(r.k_gain.rows() == r.target.b_r.cols() &&
                            r.k_gain.cols() == r.target.state_dim(),
                        "K gain shape must match the target model");
        detail::require(r.h_gain.rows() == r.target.state_dim() &&
                            r.h_gain.cols() == r.target.c_r.rows(),
                        "H gain shape must match the target model");
        r.gains_schur = is_schur(r.target.a_r - r.target.b_r * r.k_gain) &&
                        is_schur(r.target.a_r - r.h_gain * r.target.c_r);
        return r;
    }

    // Homogeneous variants: one model shared by every node, reference runs
    // the same dynamics.
    const AgentModel& model = r.agents[0];
    for (const auto& a : r.agents)
        detail::require((a.a - model.a).max_abs() == 0.0 && (a.b - model.b).max_abs() == 0.0 &&
                            (a.c - model.c).max_abs() == 0.0,
                        "homogeneous variants require identical agent models");
    detail::require(model.eigenvalues_in_closed_disc(),
                    "agent eigenvalues must lie in the closed unit disc");
    detail::require(s.exo.a_r.rows() == model.state_dim(),
                    "reference dynamics must match the agent state dimension");
    detail::require((s.exo.a_r - model.a).max_abs() <= 1e-12,
                    "homogeneous variants need the reference to run the agent dynamics");
    detail::require(s.exo.x_r0.rows() == model.state_dim(), "x_r0 dimension mismatch");
    if (s.variant == ProtocolVariant::partial_state)
        detail::require((s.exo.c_r - model.c).max_abs() <= 1e-12,
                        "partial-state variant needs the reference output map C");

    r.k_gain = s.gains.k.empty() ? synthesize_state_gain(model.a, model.b, q, rw) : s.gains.k;
    detail::require(r.k_gain.rows() == model.input_dim() && r.k_gain.cols() == model.state_dim(),
                    "K gain shape must match the agent model");
    r.gains_schur = is_schur(model.a - model.b * r.k_gain);
    if (s.variant == ProtocolVariant::partial_state) {
        r.h_gain = s.gains.h.empty() ? synthesize_observer_gain(model.a, model.c, q, rw)
                                     : s.gains.h;
        detail::require(r.h_gain.rows() == model.state_dim() &&
                            r.h_gain.cols() == model.output_dim(),
                        "H gain shape must match the agent model");
        r.gains_schur = r.gains_schur && is_schur(model.a - r.h_gain * model.c);
    }
    r.reference_initial = s.exo.x_r0;
    return r;
}

/// Time-indexed trajectories and delayed regulated synchronization errors
/// e_i(k) = s_i(k) - s_r(k - kappa_ir) (states for the full-state variant,
/// outputs otherwise). Errors before k = kappa_ir compare against the
/// prefill and are flagged by `error_valid_from`.
struct SimResult {
    std::size_t agent_count = 0;
    std::size_t horizon = 0;
    unsigned seed = 0;
    ProtocolVariant variant = ProtocolVariant::full_state;
    std::vector<std::vector<Vec>> states;   // [agent][step]
    std::vector<std::vector<Vec>> outputs;  // [agent][step]
    std::vector<std::vector<Vec>> inputs;   // [agent][step]
    std::vector<Vec> reference_states;      // [step]
    std::vector<Vec> reference_outputs;     // [step]
    std::vector<std::vector<Vec>> delayed_reference; // [agent][step] s_r(k - kappa_ir)
    std::vector<std::vector<double>> error_norms;    // [agent][step]
    std::vector<std::size_t> error_valid_from;       // kappa_ir per agent
    double final_max_error = 0.0;
    bool converged = false;
};

/// Runs the synchronous simulation loop: every channel (plant, protocol,
/// exosystem link) is a FIFO delay line; all agents read step-k samples
/// before anyone advances. Throws DivergenceError with the step index when
/// a signal leaves the finite range.
inline SimResult run(const ResolvedScenario& rs) {
    const Scenario& s = rs.source;
    const std::size_t n_agents = rs.agent_count();
    const bool het = s.variant == ProtocolVariant::heterogeneous;
    const bool full = s.variant == ProtocolVariant::full_state;
    const NetworkTopology& topo = rs.network.topology;
    const RealMatrix& dbar = rs.network.contraction;

    // Reference dynamics: the agent model copy (homogeneous) or the target
    // model run autonomously (heterogeneous).
    const RealMatrix ref_a = het ? rs.target.a_r : s.exo.a_r;
    const RealMatrix ref_c = het ? rs.target.c_r : s.exo.c_r;

    const std::size_t plant_width = full ? rs.agents[0].state_dim() : ref_c.rows();
    const std::size_t chi_width = het ? rs.target.state_dim() : rs.agents[0].state_dim();

    // Initial conditions.
    std::mt19937 rng(s.seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<Vec> x(n_agents);
    std::vector<Vec> xi(n_agents); // pre-compensator states (heterogeneous)
    for (std::size_t i = 0; i < n_agents; ++i) {
        const std::size_t n = rs.agents[i].state_dim();
        if (!s.initial_states.empty()) {
            x[i] = s.initial_states[topo.permutation[i]];
            if (x[i].rows() != n) throw ScenarioError("initial state dimension mismatch");
        } else {
            x[i] = Vec(n, 1);
            for (std::size_t e = 0; e < n; ++e) x[i][e] = s.initial_scale * dist(rng);
        }
        if (het) {
            xi[i] = Vec(rs.compensators[i].state_dim(), 1);
            for (std::size_t e = 0; e < xi[i].rows(); ++e)
                xi[i][e] = s.initial_scale * dist(rng);
        }
    }
    std::vector<ProtocolState> proto(n_agents);
    for (auto& p : proto) {
        p.chi = Vec(chi_width, 1);
        if (!full) p.xhat = Vec(chi_width, 1);
    }
    Vec x_r = rs.reference_initial;

    // Delay lines. plant_lines[i][j] / proto_lines[i][j] exist only for
    // actual edges; ref_lines[i] carries s_r with the cumulative delay.
    std::vector<std::vector<std::unique_ptr<DelayLine>>> plant_lines(n_agents);
    std::vector<std::vector<std::unique_ptr<DelayLine>>> proto_lines(n_agents);
    std::vector<DelayLine> ref_lines;
    ref_lines.reserve(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) {
        plant_lines[i].resize(n_agents);
        proto_lines[i].resize(n_agents);
        for (std::size_t j = 0; j < n_agents; ++j) {
            if (i == j || topo.weights(i, j) == 0.0) continue;
            plant_lines[i][j] = std::make_unique<DelayLine>(
                static_cast<std::size_t>(detail::delay_entry(topo.plant_delays, i, j)),
                plant_width, s.prefill);
            proto_lines[i][j] = std::make_unique<DelayLine>(
                static_cast<std::size_t>(detail::delay_entry(topo.protocol_delays, i, j)),
                chi_width, s.prefill);
        }
        ref_lines.emplace_back(static_cast<std::size_t>(rs.network.cumulative_delays[i]),
                               plant_width, s.prefill);
    }

    SimResult res;
    res.agent_count = n_agents;
    res.horizon = s.horizon;
    res.seed = s.seed;
    res.variant = s.variant;
    res.states.assign(n_agents, {});
    res.outputs.assign(n_agents, {});
    res.inputs.assign(n_agents, {});
    res.delayed_reference.assign(n_agents, {});
    res.error_norms.assign(n_agents, {});
    res.error_valid_from.resize(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i)
        res.error_valid_from[i] = static_cast<std::size_t>(rs.network.cumulative_delays[i]);

    std::vector<Vec> plant_sig(n_agents), zeta_bar(n_agents), zeta_hat(n_agents);
    for (std::size_t k = 0; k < s.horizon; ++k) {
        const Vec y_r = ref_c * x_r;
        const Vec ref_sig = full ? x_r : y_r;
        for (std::size_t i = 0; i < n_agents; ++i)
            plant_sig[i] = full ? x[i] : rs.agents[i].c * x[i];

        // Everyone samples the step-k channels before anyone advances.
        for (std::size_t i = 0; i < n_agents; ++i) {
            std::vector<Vec> plant_del(n_agents), proto_del(n_agents);
            for (std::size_t j = 0; j < n_agents; ++j) {
                if (plant_lines[i][j]) {
                    plant_del[j] = plant_lines[i][j]->push_and_read(plant_sig[j]);
                    proto_del[j] = proto_lines[i][j]->push_and_read(proto[j].chi);
                } else {
                    plant_del[j] = plant_sig[j];
                    proto_del[j] = proto[j].chi;
                }
            }
            const Vec ref_del = ref_lines[i].push_and_read(ref_sig);
            zeta_bar[i] = coupling_zeta_bar(dbar, i, plant_sig[i], plant_del, ref_del);
            zeta_hat[i] = coupling_zeta_hat(dbar, i, proto[i].chi, proto_del);

            res.delayed_reference[i].push_back(ref_del);
            res.states[i].push_back(x[i]);
            res.outputs[i].push_back(rs.agents[i].c * x[i]);
            const Vec err = full ? x[i] - ref_del : res.outputs[i].back() - ref_del;
            res.error_norms[i].push_back(err.norm());
        }
        res.reference_states.push_back(x_r);
        res.reference_outputs.push_back(y_r);

        // Advance protocols, agents, and the reference.
        for (std::size_t i = 0; i < n_agents; ++i) {
            Vec u;
            if (s.variant == ProtocolVariant::full_state) {
                u = protocol1_step(rs.agents[i], rs.k_gain, proto[i], zeta_bar[i], zeta_hat[i]);
            } else if (s.variant == ProtocolVariant::partial_state) {
                u = protocol2_step(rs.agents[i], rs.k_gain, rs.h_gain, proto[i], zeta_bar[i],
                                   zeta_hat[i]);
            } else {
                const Vec v =
                    protocol3_step(rs.target, rs.k_gain, rs.h_gain, proto[i], zeta_bar[i],
                                   zeta_hat[i]);
                const PreCompensator& pc = rs.compensators[i];
                const Vec z = rs.agents[i].c_m * x[i];
                u = pc.d_h * v + pc.f_h * z;
                if (pc.state_dim() > 0) {
                    u = u + pc.c_h * xi[i];
                    xi[i] = pc.a_h * xi[i] + pc.b_h * z + pc.e_h * v;
                }
            }
            res.inputs[i].push_back(u);
            x[i] = rs.agents[i].a * x[i] + rs.agents[i].b * u;
            if (!x[i].all_finite() || !proto[i].chi.all_finite() ||
                x[i].max_abs() > s.divergence_threshold ||
                proto[i].chi.max_abs() > s.divergence_threshold)
                throw DivergenceError("agent " + std::to_string(i + 1) +
                                          " diverged (non-finite or above threshold)",
                                      static_cast<long>(k));
        }
        x_r = ref_a * x_r;
    }

    double final_err = 0.0;
    for (std::size_t i = 0; i < n_agents; ++i) final_err = std::max(final_err, res.error_norms[i].back());
    res.final_max_error = final_err;
    res.converged = final_err < s.tolerance;
    return res;
}

/// Delayed regulated errors per agent (recomputed from stored trajectories)
/// plus pairwise delayed errors ||s_i(k) - s_j(k - kappa_ij)|| along tree
/// edges, kappa_ij = kappa_ir - kappa_jr.
struct ErrorSeries {
    std::vector<std::vector<double>> regulated;  // [agent][step]
    std::vector<std::size_t> regulated_valid_from;
    std::vector<std::pair<std::size_t, std::size_t>> edges; // (child, parent)
    std::vector<std::vector<double>> pairwise;   // [edge][step]
    std::vector<std::size_t> pairwise_valid_from;
};

inline ErrorSeries delayed_sync_errors(const SimResult& r, const DerivedNetwork& net) {
    const bool full = r.variant == ProtocolVariant::full_state;
    ErrorSeries es;
    es.regulated = r.error_norms;
    es.regulated_valid_from = r.error_valid_from;
    const auto& sig = full ? r.states : r.outputs;
    for (std::size_t i = 1; i < net.agent_count; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            if (net.topology.weights(i, j) == 0.0) continue;
            const long kij = net.cumulative_delays[i] - net.cumulative_delays[j];
            es.edges.emplace_back(i, j);
            es.pairwise_valid_from.push_back(static_cast<std::size_t>(std::max(kij, 0L)));
            std::vector<double> series(r.horizon, 0.0);
            for (std::size_t k = 0; k < r.horizon; ++k) {
                const long kd = static_cast<long>(k) - kij;
                if (kd < 0) continue;
                series[k] = (sig[i][k] - sig[j][static_cast<std::size_t>(kd)]).norm();
            }
            es.pairwise.push_back(std::move(series));
        }
    return es;
}

struct CertificatePoint {
    double omega = 0.0;
    double min_distance = 0.0; // min over spectrum of | |lambda| - 1 |
};

struct CertificateReport {
    bool passed = false;
    double margin = 0.0;
    double min_distance = 0.0;
    double worst_omega = 0.0;
    std::vector<CertificatePoint> points;
};

namespace detail {

/// The variant's stability block matrix at frequency omega, built from the
/// frequency-shifted contraction D_bar_jw. At omega = 0 with zero delays it
/// reduces to the zero-delay stacked error system.
inline ComplexMatrix certificate_matrix(const ResolvedScenario& rs, double omega) {
    const std::size_t n_agents = rs.agent_count();
    const ComplexMatrix i_n = to_complex(RealMatrix::identity(n_agents));
    const ComplexMatrix d_bar = to_complex(rs.network.contraction);
    const ComplexMatrix d_w = delay_transfer_matrix(rs.network, omega);

    const bool het = rs.source.variant == ProtocolVariant::heterogeneous;
    const RealMatrix a = het ? rs.target.a_r : rs.agents[0].a;
    const RealMatrix b = het ? rs.target.b_r : rs.agents[0].b;
    const RealMatrix c = het ? rs.target.c_r : rs.agents[0].c;
    const std::size_t n = a.rows();
    const ComplexMatrix a_cl = to_complex(a - b * rs.k_gain);
    const ComplexMatrix bk = to_complex(b * rs.k_gain);
    const ComplexMatrix a_c = to_complex(a);

    if (rs.source.variant == ProtocolVariant::full_state) {
        ComplexMatrix m(2 * n_agents * n, 2 * n_agents * n);
        m.set_block(0, 0, kron(i_n, a_cl));
        m.set_block(0, n_agents * n, kron(i_n, bk));
        m.set_block(n_agents * n, 0, kron(d_bar - d_w, a_c));
        m.set_block(n_agents * n, n_agents * n, kron(d_w, a_c));
        return m;
    }

    const ComplexMatrix hc = to_complex(het ? rs.h_gain * rs.target.c_r
                                            : rs.h_gain * rs.agents[0].c);
    const ComplexMatrix a_obs = to_complex(het ? rs.target.a_r - rs.h_gain * rs.target.c_r
                                               : rs.agents[0].a - rs.h_gain * rs.agents[0].c);
    const std::size_t blk = n_agents * n;

    std::size_t n_mismatch = 0;
    if (het)
        for (const auto& pc : rs.compensators) n_mismatch += pc.mismatch_dim();

    ComplexMatrix m(3 * blk + n_mismatch, 3 * blk + n_mismatch);
    m.set_block(0, 0, kron(i_n, a_cl));
    m.set_block(0, blk, kron(i_n, bk));
    m.set_block(blk, blk, kron(d_w, a_c));
    m.set_block(blk, 2 * blk, kron(i_n, a_c));
    m.set_block(2 * blk, 0, kron(d_bar - d_w, hc));
    m.set_block(2 * blk, 2 * blk, kron(i_n, a_obs));

    if (het && n_mismatch > 0) {
        // Stacked mismatch channel: A_s block-diagonal, C_s maps the stacked
        // mismatch states to the per-agent disturbance rho_i.
        ComplexMatrix a_s(n_mismatch, n_mismatch);
        ComplexMatrix c_s(n_agents, n_mismatch);
        std::size_t off = 0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            const auto& pc = rs.compensators[i];
            a_s.set_block(off, off, to_complex(pc.a_s));
            if (pc.mismatch_dim() > 0) c_s.set_block(i, off, to_complex(pc.c_s));
            off += pc.mismatch_dim();
        }
        const ComplexMatrix b_c = to_complex(b);
        m.set_block(0, 3 * blk, kron(i_n, b_c) * c_s);
        m.set_block(blk, 3 * blk, kron(i_n, b_c) * c_s);
        m.set_block(2 * blk, 3 * blk, kron(i_n - d_w, b_c) * c_s);
        m.set_block(3 * blk, 3 * blk, a_s);
    }
    return m;
}

} // namespace detail

/// Sampled spectral certificate: over a uniform omega grid on [0, 2pi),
/// assembles the variant's block matrix with the frequency-shifted
/// contraction and reports the minimum distance of its spectrum to the unit
/// circle. Passes iff that distance exceeds the margin at every sampled
/// point. This is a numeric certificate on a finite grid, not a proof.
inline CertificateReport certificate_sweep(const ResolvedScenario& rs,
                                           std::size_t grid_size = 256,
                                           double margin = 1e-3) {
    if (grid_size == 0) throw ScenarioError("certificate grid must have at least one point");
    CertificateReport rep;
    rep.margin = margin;
    rep.min_distance = std::numeric_limits<double>::infinity();
    rep.points.reserve(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double omega = 2.0 * M_PI * static_cast<double>(g) / static_cast<double>(grid_size);
        const ComplexMatrix m = detail::certificate_matrix(rs, omega);
        const Spectrum sp = eigenvalues(m);
        double dist = std::numeric_limits<double>::infinity();
        for (const auto& l : sp.eigenvalues) dist = std::min(dist, std::abs(std::abs(l) - 1.0));
        rep.points.push_back({omega, dist});
        if (dist < rep.min_distance) {
            rep.min_distance = dist;
            rep.worst_omega = omega;
        }
    }
    rep.passed = rep.min_distance > margin;
    return rep;
}

} // namespace delaysync

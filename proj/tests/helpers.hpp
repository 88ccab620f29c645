#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "delaysync/engine.hpp"

namespace testutil {

using namespace delaysync;

// ---------------------------------------------------------------------------
// Worked-example fixtures (homogeneous triple: A with radius 1, published
// gains; heterogeneous agent classes with full state measurement).

inline AgentModel example1_agent() {
    const double s3 = std::sqrt(3.0) / 2.0;
    AgentModel m;
    m.a = RealMatrix{{0.5, 1.0, 1.0}, {0.0, s3, -0.5}, {0.0, 0.5, s3}};
    m.b = RealMatrix{{1.0}, {1.0}, {0.0}};
    m.c = RealMatrix{{1.0, 0.0, 1.0}};
    return m;
}

inline RealMatrix example1_k() { return RealMatrix{{0.0695, 1.7625, 1.2051}}; }
inline RealMatrix example1_h() { return RealMatrix{{1.4327}, {0.4143}, {0.6993}}; }

inline TargetModel example2_target() {
    TargetModel t;
    t.a_r = RealMatrix{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {1.0, -1.0, 1.0}};
    t.b_r = RealMatrix{{0.0}, {0.0}, {1.0}};
    t.c_r = RealMatrix{{1.0, 0.0, 0.0}};
    t.uniform_rank = 3;
    return t;
}

inline RealMatrix example2_k() { return RealMatrix{{1.006, -0.99, 0.6}}; }
inline RealMatrix example2_h() { return RealMatrix{{0.9}, {-0.35}, {-0.225}}; }

/// Heterogeneous agent classes (1, 2, 3, 5), each introspective (C_m = I).
inline AgentModel example2_agent(int cls) {
    AgentModel m;
    switch (cls) {
        case 1:
            m.a = RealMatrix{{0, 0, 1, 0}, {0, 0, 0, 1}, {0, 2, 1, 1}, {1, 1, 1, 0}};
            m.b = RealMatrix{{0, 0}, {0, 0}, {1, 0}, {0, 1}};
            m.c = RealMatrix{{0, 0, 1, 0}};
            break;
        case 2:
            m.a = RealMatrix{{0, 1, 0}, {0, 0, 1}, {0, 0, 0}};
            m.b = RealMatrix{{0}, {0}, {1}};
            m.c = RealMatrix{{1, 0, 0}};
            break;
        case 3:
            m.a = RealMatrix{{0, 0, 0, 1, 0},
                             {0, 1, -1, 0, 1},
                             {0, 1, 0, 0, 0},
                             {0, 0, 1, 0, 0},
                             {1, 1, 0, 0, 1}};
            m.b = RealMatrix{{0, 0}, {1, 0}, {0, 0}, {0, 0}, {0, 1}};
            m.c = RealMatrix{{0, 0, 1, 0, 0}};
            break;
        case 5:
            m.a = RealMatrix{{0, 1, 0}, {0, 0, 1}, {-2, 1, 0}};
            m.b = RealMatrix{{0}, {0}, {1}};
            m.c = RealMatrix{{1, 0, 0}};
            break;
        default: throw ModelError("unknown agent class");
    }
    m.c_m = RealMatrix::identity(m.state_dim());
    return m;
}

/// Class assignment used by the shipped heterogeneous scenarios.
inline const std::vector<int>& example2_classes() {
    static const std::vector<int> cls{1, 2, 3, 3, 5, 1, 2, 3, 3, 5};
    return cls;
}

// ---------------------------------------------------------------------------
// Random rooted spanning trees with shuffled node labels.

struct TreeOptions {
    double min_weight = 1.0;
    double max_weight = 1.0;
    long max_delay = 0; // delays drawn from {0..max_delay}
    long min_delay = 0;
};

inline NetworkTopology random_tree(std::mt19937& rng, std::size_t n,
                                   const TreeOptions& opt = {}) {
    std::vector<std::size_t> label(n);
    std::iota(label.begin(), label.end(), 0);
    std::shuffle(label.begin(), label.end(), rng);
    std::uniform_real_distribution<double> weight(opt.min_weight, opt.max_weight);
    std::uniform_int_distribution<long> delay(opt.min_delay, opt.max_delay);
    NetworkTopology t = NetworkTopology::make(n);
    t.root_links[label[0]] = 1;
    t.root_exo_delay = delay(rng);
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t parent = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        t.add_edge(label[parent], label[i], weight(rng), delay(rng), delay(rng));
    }
    return t;
}

/// Redraws every delay of a topology uniformly from {lo..hi} (edges, the
/// protocol exchange channel, and the exosystem link independently).
inline NetworkTopology randomize_delays(const NetworkTopology& t, std::mt19937& rng, long lo,
                                        long hi) {
    std::uniform_int_distribution<long> delay(lo, hi);
    NetworkTopology out = t;
    out.root_exo_delay = delay(rng);
    for (std::size_t i = 0; i < t.agent_count; ++i)
        for (std::size_t j = 0; j < t.agent_count; ++j)
            if (t.weights(i, j) != 0.0) {
                out.plant_delays(i, j) = static_cast<double>(delay(rng));
                out.protocol_delays(i, j) = static_cast<double>(delay(rng));
            }
    return out;
}

// ---------------------------------------------------------------------------
// Scenario builders mirroring the shipped files, with adjustable topology.

inline Scenario example1_scenario(const NetworkTopology& topo,
                                  ProtocolVariant variant = ProtocolVariant::partial_state) {
    Scenario s;
    s.name = "example1";
    s.variant = variant;
    s.agents = {example1_agent()};
    s.exo.a_r = s.agents[0].a;
    s.exo.c_r = s.agents[0].c;
    s.exo.x_r0 = Vec{{0.3}, {0.1}, {0.1}};
    s.gains.k = example1_k();
    s.gains.h = example1_h();
    s.topology = topo;
    return s;
}

inline Scenario example2_scenario(const NetworkTopology& topo) {
    Scenario s;
    s.name = "example2";
    s.variant = ProtocolVariant::heterogeneous;
    for (std::size_t i = 0; i < topo.agent_count; ++i)
        s.agents.push_back(example2_agent(example2_classes()[i % 10]));
    const TargetModel t = example2_target();
    s.exo.a_r = t.a_r;
    s.exo.c_r = t.c_r;
    s.exo.x_r0 = Vec{{0.3}, {0.1}, {0.1}};
    s.gains.k = example2_k();
    s.gains.h = example2_h();
    s.topology = topo;
    return s;
}

/// The paper-style case graphs (unit weights). Delays per shipped scenarios.
inline NetworkTopology case_topology(int which) {
    if (which == 1) {
        NetworkTopology t = NetworkTopology::make(3);
        t.root_links[0] = 1;
        t.add_edge(0, 1, 1.0, 3, 2);
        t.add_edge(0, 2, 1.0, 2, 0);
        return t;
    }
    if (which == 2) {
        NetworkTopology t = NetworkTopology::make(5);
        t.root_links[0] = 1;
        t.root_exo_delay = 2;
        t.add_edge(0, 1, 1.0, 2, 0);
        t.add_edge(0, 2, 1.0, 4, 5);
        t.add_edge(2, 3, 1.0, 1, 2);
        t.add_edge(2, 4, 1.0, 2, 2);
        return t;
    }
    NetworkTopology t = NetworkTopology::make(10);
    t.root_links[0] = 1;
    t.root_exo_delay = 2;
    t.add_edge(0, 1, 1.0, 2, 0);
    t.add_edge(1, 2, 1.0, 4, 5);
    t.add_edge(1, 3, 1.0, 0, 1);
    t.add_edge(2, 4, 1.0, 2, 2);
    t.add_edge(2, 5, 1.0, 2, 5);
    t.add_edge(3, 6, 1.0, 4, 1);
    t.add_edge(3, 7, 1.0, 6, 6);
    t.add_edge(4, 8, 1.0, 2, 3);
    t.add_edge(4, 9, 1.0, 2, 1);
    return t;
}

// ---------------------------------------------------------------------------
// Independent oracle: for zero delays, the agentwise closed loop equals the
// stacked transformed error system (a single block-matrix recursion). The
// agentwise side below uses the library's coupling and protocol steppers;
// the stacked side is assembled here from first principles.

inline double stacked_oracle_deviation(ProtocolVariant variant, unsigned seed,
                                       std::size_t n_agents = 5, std::size_t steps = 50) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    NetworkTopology topo = random_tree(rng, n_agents);
    const DerivedNetwork net = derive(topo);
    const RealMatrix& dbar = net.contraction;
    const RealMatrix i_n = RealMatrix::identity(n_agents);
    const bool het = variant == ProtocolVariant::heterogeneous;

    // Models and gains.
    const AgentModel homog_model = example1_agent();
    const TargetModel target = example2_target();
    const RealMatrix k = het ? example2_k() : example1_k();
    const RealMatrix h = het ? example2_h() : example1_h();
    const RealMatrix a = het ? target.a_r : homog_model.a;
    const RealMatrix b = het ? target.b_r : homog_model.b;
    const RealMatrix c = het ? target.c_r : homog_model.c;
    const std::size_t n = a.rows();
    const std::size_t blk = n_agents * n;

    std::vector<AgentModel> agents;
    std::vector<PreCompensator> pres;
    for (std::size_t i = 0; i < n_agents; ++i) {
        agents.push_back(het ? example2_agent(example2_classes()[i % 10]) : homog_model);
        if (het) pres.push_back(homogenize(agents.back(), target));
    }

    // Initial conditions.
    std::vector<Vec> x(n_agents), xi(n_agents);
    std::vector<ProtocolState> proto(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) {
        x[i] = Vec(agents[i].state_dim(), 1);
        for (std::size_t e = 0; e < x[i].rows(); ++e) x[i][e] = dist(rng);
        if (het) {
            xi[i] = Vec(pres[i].state_dim(), 1);
            for (std::size_t e = 0; e < xi[i].rows(); ++e) xi[i][e] = dist(rng);
        }
        proto[i].chi = Vec(n, 1);
        if (variant != ProtocolVariant::full_state) proto[i].xhat = Vec(n, 1);
    }
    Vec x_r(n, 1);
    for (std::size_t e = 0; e < n; ++e) x_r[e] = dist(rng);

    // Stacked transformed matrix.
    std::size_t n_mismatch = 0;
    RealMatrix a_s, c_s;
    if (het) {
        for (const auto& p : pres) n_mismatch += p.mismatch_dim();
        a_s = RealMatrix::zeros(n_mismatch, n_mismatch);
        c_s = RealMatrix::zeros(n_agents, n_mismatch);
        std::size_t off = 0;
        for (std::size_t i = 0; i < n_agents; ++i) {
            a_s.set_block(off, off, pres[i].a_s);
            if (pres[i].mismatch_dim() > 0) c_s.set_block(i, off, pres[i].c_s);
            off += pres[i].mismatch_dim();
        }
    }
    const std::size_t rows = variant == ProtocolVariant::full_state
                                 ? 2 * blk
                                 : 3 * blk + n_mismatch;
    RealMatrix m = RealMatrix::zeros(rows, rows);
    m.set_block(0, 0, kron(i_n, a - b * k));
    m.set_block(0, blk, kron(i_n, b * k));
    m.set_block(blk, blk, kron(dbar, a));
    if (variant != ProtocolVariant::full_state) {
        m.set_block(blk, 2 * blk, kron(i_n, a));
        m.set_block(2 * blk, 2 * blk, kron(i_n, a - h * c));
    }
    if (het && n_mismatch > 0) {
        m.set_block(0, 3 * blk, kron(i_n, b) * c_s);
        m.set_block(blk, 3 * blk, kron(i_n, b) * c_s);
        m.set_block(2 * blk, 3 * blk, kron(i_n - dbar, b) * c_s);
        m.set_block(3 * blk, 3 * blk, a_s);
    }

    // Stacked state from agentwise signals: [x_tilde; delta; delta_bar; w].
    const auto homogenized = [&](std::size_t i) {
        return het ? pres[i].initial_homogenized_state(target, x[i], xi[i]) : x[i];
    };
    const auto stacked_of_sim = [&](const std::vector<Vec>& w) {
        Vec st(rows, 1);
        Vec xt(blk, 1);
        for (std::size_t i = 0; i < n_agents; ++i)
            xt.set_block(i * n, 0, homogenized(i) - x_r);
        st.set_block(0, 0, xt);
        Vec chis(blk, 1);
        for (std::size_t i = 0; i < n_agents; ++i) chis.set_block(i * n, 0, proto[i].chi);
        st.set_block(blk, 0, xt - chis);
        if (variant != ProtocolVariant::full_state) {
            Vec xhats(blk, 1);
            for (std::size_t i = 0; i < n_agents; ++i) xhats.set_block(i * n, 0, proto[i].xhat);
            st.set_block(2 * blk, 0, kron(i_n - dbar, RealMatrix::identity(n)) * xt - xhats);
        }
        if (het) {
            std::size_t off = 3 * blk;
            for (std::size_t i = 0; i < n_agents; ++i) {
                if (w[i].rows() > 0) st.set_block(off, 0, w[i]);
                off += w[i].rows();
            }
        }
        return st;
    };

    std::vector<Vec> w(n_agents);
    if (het)
        for (std::size_t i = 0; i < n_agents; ++i) w[i] = pres[i].initial_mismatch(x[i], xi[i]);

    Vec st = stacked_of_sim(w);
    double max_dev = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
        // Agentwise step (zero delays: every channel reads the live value).
        std::vector<Vec> plant_sig(n_agents), chi_now(n_agents);
        const Vec ref_sig = variant == ProtocolVariant::full_state ? x_r : Vec(c * x_r);
        for (std::size_t i = 0; i < n_agents; ++i) {
            plant_sig[i] = variant == ProtocolVariant::full_state ? x[i]
                                                                  : Vec(agents[i].c * x[i]);
            chi_now[i] = proto[i].chi;
        }
        for (std::size_t i = 0; i < n_agents; ++i) {
            const Vec zb = coupling_zeta_bar(dbar, i, plant_sig[i], plant_sig, ref_sig);
            const Vec zh = coupling_zeta_hat(dbar, i, chi_now[i], chi_now);
            Vec u;
            if (variant == ProtocolVariant::full_state)
                u = protocol1_step(agents[i], k, proto[i], zb, zh);
            else if (variant == ProtocolVariant::partial_state)
                u = protocol2_step(agents[i], k, h, proto[i], zb, zh);
            else {
                const Vec v = protocol3_step(target, k, h, proto[i], zb, zh);
                u = pres[i].d_h * v + pres[i].f_h * x[i];
                if (pres[i].state_dim() > 0) {
                    u = u + pres[i].c_h * xi[i];
                    xi[i] = pres[i].a_h * xi[i] + pres[i].b_h * x[i] + pres[i].e_h * v;
                }
            }
            x[i] = agents[i].a * x[i] + agents[i].b * u;
            if (het && w[i].rows() > 0) w[i] = pres[i].a_s * w[i];
        }
        x_r = a * x_r;

        // Stacked step and comparison.
        st = m * st;
        max_dev = std::max(max_dev, (st - stacked_of_sim(w)).max_abs());
    }
    return max_dev;
}

} // namespace testutil

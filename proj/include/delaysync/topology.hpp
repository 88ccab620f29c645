#pragma once

#include <complex>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "delaysync/matrix.hpp"

namespace delaysync {

/// Weighted directed communication structure: adjacency weights (a_ij > 0
/// means an edge from agent j to agent i), a single exosystem link, and two
/// integer delay assignments (one for plant outputs, one for the protocol
/// exchange channel). Indices are 0-based in code.
struct NetworkTopology {
    std::size_t agent_count = 0;
    RealMatrix weights;              // N x N, nonnegative, zero diagonal
    std::vector<int> root_links;     // iota_i in {0, 1}
    RealMatrix plant_delays;         // kappa_ij, integer-valued entries per edge
    RealMatrix protocol_delays;      // kappa_hat_ij per edge
    long root_exo_delay = 0;         // kappa_1r, delay on the exosystem link

    /// Permutation applied by validate_and_reorder: new index -> old index.
    std::vector<std::size_t> permutation;

    static NetworkTopology make(std::size_t n) {
        NetworkTopology t;
        t.agent_count = n;
        t.weights = RealMatrix::zeros(n, n);
        t.root_links.assign(n, 0);
        t.plant_delays = RealMatrix::zeros(n, n);
        t.protocol_delays = RealMatrix::zeros(n, n);
        return t;
    }

    void add_edge(std::size_t from, std::size_t to, double weight = 1.0,
                  long plant_delay = 0, long protocol_delay = 0) {
        weights(to, from) = weight;
        plant_delays(to, from) = static_cast<double>(plant_delay);
        protocol_delays(to, from) = static_cast<double>(protocol_delay);
    }
};

/// Matrices derived from a validated, reordered topology.
struct DerivedNetwork {
    std::size_t agent_count = 0;
    RealMatrix laplacian;          // L
    RealMatrix row_stochastic;     // D = I - (I + D_in)^{-1} L
    RealMatrix in_degree;          // D_in, diagonal
    RealMatrix expanded_laplacian; // L_bar = L + diag{iota}
    RealMatrix contraction;        // D_bar = I - (2I + D_in)^{-1} L_bar
    std::vector<long> cumulative_delays; // kappa_ir, path sums from the root
    NetworkTopology topology;      // the validated source topology
};

namespace detail {

inline long delay_entry(const RealMatrix& d, std::size_t i, std::size_t j) {
    return static_cast<long>(d(i, j) + 0.5);
}

} // namespace detail

/// Checks the directed-spanning-tree structure and returns an equivalent
/// topology whose agents are ordered root-first with parents before
/// children, so the Laplacian is lower triangular. Throws TopologyError
/// naming the offending node otherwise.
inline NetworkTopology validate_and_reorder(const NetworkTopology& t) {
    const std::size_t n = t.agent_count;
    if (n == 0) throw TopologyError("empty topology");
    if (t.weights.rows() != n || t.weights.cols() != n)
        throw TopologyError("weight matrix shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        if (t.weights(i, i) != 0.0)
            throw TopologyError("self-loop at node " + std::to_string(i + 1));
        for (std::size_t j = 0; j < n; ++j) {
            if (t.weights(i, j) < 0.0)
                throw TopologyError("negative weight on edge " + std::to_string(j + 1) +
                                    " -> " + std::to_string(i + 1));
            if (detail::delay_entry(t.plant_delays, i, j) < 0 ||
                detail::delay_entry(t.protocol_delays, i, j) < 0)
                throw TopologyError("negative delay on edge " + std::to_string(j + 1) +
                                    " -> " + std::to_string(i + 1));
        }
    }
    if (t.root_exo_delay < 0) throw TopologyError("negative exosystem delay");

    std::size_t root = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (t.root_links[i] == 1) {
            if (root != n)
                throw TopologyError("multiple exosystem links (nodes " + std::to_string(root + 1) +
                                    " and " + std::to_string(i + 1) + ")");
            root = i;
        } else if (t.root_links[i] != 0) {
            throw TopologyError("root link of node " + std::to_string(i + 1) +
                                " must be 0 or 1");
        }
    }
    if (root == n) throw TopologyError("no exosystem link: exactly one node must carry iota = 1");

    std::vector<std::size_t> parent(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t indeg = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (t.weights(i, j) > 0.0) {
                ++indeg;
                parent[i] = j;
            }
        if (i == root) {
            if (indeg != 0)
                throw TopologyError("root node " + std::to_string(i + 1) +
                                    " must have in-degree 0, has " + std::to_string(indeg));
        } else if (indeg != 1) {
            throw TopologyError("node " + std::to_string(i + 1) + " has in-degree " +
                                std::to_string(indeg) + ", expected 1");
        }
    }

    // BFS from the root; a node never reached sits on a cycle or is detached.
    std::vector<std::size_t> order;
    order.reserve(n);
    std::vector<char> seen(n, 0);
    order.push_back(root);
    seen[root] = 1;
    for (std::size_t q = 0; q < order.size(); ++q) {
        const std::size_t u = order[q];
        for (std::size_t i = 0; i < n; ++i)
            if (!seen[i] && parent[i] == u) {
                seen[i] = 1;
                order.push_back(i);
            }
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i])
            throw TopologyError("node " + std::to_string(i + 1) +
                                " is not reachable from the root (cycle or disconnected)");

    NetworkTopology out = NetworkTopology::make(n);
    out.root_exo_delay = t.root_exo_delay;
    out.permutation = order; // new index -> old index
    out.root_links[0] = 1;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            out.weights(i, j) = t.weights(order[i], order[j]);
            out.plant_delays(i, j) = t.plant_delays(order[i], order[j]);
            out.protocol_delays(i, j) = t.protocol_delays(order[i], order[j]);
        }
    return out;
}

/// Builds the network matrices and cumulative delays from a validated,
/// reordered topology. The per-agent cumulative delay kappa_ir is the sum
/// of edge delays along the unique tree path from the root, plus the
/// root's own exosystem-link delay.
inline DerivedNetwork derive(const NetworkTopology& t) {
    NetworkTopology v = t;
    if (v.permutation.empty()) v = validate_and_reorder(t);
    const std::size_t n = v.agent_count;

    DerivedNetwork d;
    d.agent_count = n;
    d.topology = v;
    d.in_degree = RealMatrix::zeros(n, n);
    d.laplacian = RealMatrix::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double din = 0.0;
        for (std::size_t j = 0; j < n; ++j) din += v.weights(i, j);
        d.in_degree(i, i) = din;
        d.laplacian(i, i) = din;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) d.laplacian(i, j) = -v.weights(i, j);
    }
    d.expanded_laplacian = d.laplacian;
    for (std::size_t i = 0; i < n; ++i)
        d.expanded_laplacian(i, i) += static_cast<double>(v.root_links[i]);

    d.row_stochastic = RealMatrix::identity(n);
    d.contraction = RealMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double s1 = 1.0 / (1.0 + d.in_degree(i, i));
        const double s2 = 1.0 / (2.0 + d.in_degree(i, i));
        for (std::size_t j = 0; j < n; ++j) {
            d.row_stochastic(i, j) -= s1 * d.laplacian(i, j);
            d.contraction(i, j) -= s2 * d.expanded_laplacian(i, j);
        }
    }

    d.cumulative_delays.assign(n, 0);
    d.cumulative_delays[0] = v.root_exo_delay;
    for (std::size_t i = 1; i < n; ++i) {
        std::size_t p = n;
        for (std::size_t j = 0; j < i; ++j)
            if (v.weights(i, j) > 0.0) p = j;
        d.cumulative_delays[i] =
            d.cumulative_delays[p] + detail::delay_entry(v.plant_delays, i, p);
    }
    return d;
}

/// The frequency-shifted contraction matrix: entry (i,j) below the diagonal
/// is d_bar_ij * exp(-j*omega*(kappa_hat_ij - kappa_ij)); the diagonal is
/// d_bar_ii. At omega = 0 this is exactly the contraction matrix.
inline ComplexMatrix delay_transfer_matrix(const DerivedNetwork& d, double omega) {
    const std::size_t n = d.agent_count;
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = d.contraction(i, i);
        for (std::size_t j = 0; j < i; ++j) {
            const double w = d.contraction(i, j);
            if (w == 0.0) continue;
            const double lag =
                static_cast<double>(detail::delay_entry(d.topology.protocol_delays, i, j) -
                                    detail::delay_entry(d.topology.plant_delays, i, j));
            m(i, j) = w * std::exp(std::complex<double>(0.0, -omega * lag));
        }
    }
    return m;
}

} // namespace delaysync

// Test-only oracles, independent of the library's computation paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <vector>

#include "siggame/analysis.hpp"
#include "siggame/nn.hpp"

namespace testutil {

// Straight-line forward pass: explicit matrix multiply then activation,
// written independently of mlp_forward.
inline std::vector<double> oracle_forward(const siggame::Mlp& net,
                                          const std::vector<double>& input) {
    std::vector<double> x = input;
    for (const auto& layer : net.layers) {
        std::vector<double> y(layer.out_dim(), 0.0);
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            y[r] = layer.biases[r];
            for (std::size_t c = 0; c < layer.in_dim(); ++c) y[r] += layer.weights(r, c) * x[c];
            if (layer.activation == siggame::Activation::Relu && y[r] < 0.0) y[r] = 0.0;
        }
        x = y;
    }
    return x;
}

struct FdReport {
    double max_rel_err = 0.0;
    double max_abs_err_small = 0.0;  // components with |g| < 1e-8
    std::size_t n_params = 0;
};

// Central finite differences of MSE(net(input), target) w.r.t. every
// parameter, compared against the analytic backward pass.
inline FdReport fd_gradient_check(siggame::Mlp net, const std::vector<double>& input,
                                  const std::vector<double>& target, double h = 1e-5) {
    using namespace siggame;
    ForwardCache cache;
    mlp_forward_cached(net, input, cache);
    const Gradients analytic = mlp_backward(net, cache, mse_gradient(cache.output, target));

    FdReport report;
    auto loss = [&] { return mse(mlp_forward(net, input), target); };
    auto check = [&](double& param, double analytic_g) {
        const double saved = param;
        param = saved + h;
        const double up = loss();
        param = saved - h;
        const double down = loss();
        param = saved;
        const double fd = (up - down) / (2.0 * h);
        report.n_params += 1;
        if (std::max(std::abs(analytic_g), std::abs(fd)) < 1e-8) {
            report.max_abs_err_small = std::max(report.max_abs_err_small, std::abs(analytic_g - fd));
        } else {
            const double rel =
                std::abs(analytic_g - fd) / std::max(std::abs(analytic_g), std::abs(fd));
            report.max_rel_err = std::max(report.max_rel_err, rel);
        }
    };
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = net.layers[k];
        for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
            check(layer.weights.data[i], analytic.weights[k].data[i]);
        for (std::size_t i = 0; i < layer.biases.size(); ++i)
            check(layer.biases[i], analytic.biases[k][i]);
    }
    return report;
}

// Brute-force DBSCAN oracle: density reachability as the transitive closure
// of the eps-graph over core points. Border points may legitimately attach
// to any adjacent core component, so the comparison accepts each candidate.
struct DbscanOracle {
    std::vector<bool> core;
    std::vector<int> core_component;               // -1 for non-core
    std::vector<std::set<int>> border_candidates;  // per point, adjacent components
};

inline DbscanOracle dbscan_oracle(const std::vector<std::vector<double>>& pts, double eps,
                                  std::size_t min_pts) {
    const std::size_t n = pts.size();
    auto dist2 = [&](std::size_t a, std::size_t b) {
        double acc = 0.0;
        for (std::size_t d = 0; d < pts[a].size(); ++d) {
            const double diff = pts[a][d] - pts[b][d];
            acc += diff * diff;
        }
        return acc;
    };
    const double eps2 = eps * eps;
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (dist2(i, j) <= eps2) nbrs[i].push_back(j);

    DbscanOracle oracle;
    oracle.core.resize(n);
    for (std::size_t i = 0; i < n; ++i) oracle.core[i] = nbrs[i].size() >= min_pts;

    // transitive closure over core-core edges, via repeated relaxation
    oracle.core_component.assign(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!oracle.core[i] || oracle.core_component[i] != -1) continue;
        std::vector<std::size_t> stack{i};
        oracle.core_component[i] = next;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            for (std::size_t q : nbrs[p])
                if (oracle.core[q] && oracle.core_component[q] == -1) {
                    oracle.core_component[q] = next;
                    stack.push_back(q);
                }
        }
        ++next;
    }
    oracle.border_candidates.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (oracle.core[i]) continue;
        for (std::size_t q : nbrs[i])
            if (oracle.core[q]) oracle.border_candidates[i].insert(oracle.core_component[q]);
    }
    return oracle;
}

// True iff `assignment` is a valid DBSCAN partition per the oracle: core
// components map one-to-one onto cluster ids, every border point picked one
// of its candidate components, and exactly the unreachable points are noise.
inline bool dbscan_matches_oracle(const std::vector<std::vector<double>>& pts,
                                  const std::vector<int>& assignment, double eps,
                                  std::size_t min_pts) {
    const DbscanOracle oracle = dbscan_oracle(pts, eps, min_pts);
    std::map<int, int> comp_to_cluster, cluster_to_comp;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!oracle.core[i]) continue;
        const int comp = oracle.core_component[i];
        const int cluster = assignment[i];
        if (cluster == siggame::kNoise) return false;
        auto [it1, fresh1] = comp_to_cluster.emplace(comp, cluster);
        if (!fresh1 && it1->second != cluster) return false;
        auto [it2, fresh2] = cluster_to_comp.emplace(cluster, comp);
        if (!fresh2 && it2->second != comp) return false;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (oracle.core[i]) continue;
        const auto& candidates = oracle.border_candidates[i];
        if (candidates.empty()) {
            if (assignment[i] != siggame::kNoise) return false;
        } else {
            if (assignment[i] == siggame::kNoise) return false;
            const auto it = cluster_to_comp.find(assignment[i]);
            if (it == cluster_to_comp.end() || candidates.count(it->second) == 0) return false;
        }
    }
    return true;
}

}  // namespace testutil

#include "cellalign/graph.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "cellalign/errors.hpp"

namespace cellalign {

DensityMap kde_density(const CellTable& cells, double bandwidth) {
    if (cells.cells.empty()) throw EmptyInput("kde_density on empty table");
    if (!(bandwidth > 0.0)) throw ConfigError("bandwidth must be > 0");

    const std::size_t n = cells.cells.size();
    Eigen::MatrixXd p(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        p(i, 0) = cells.cells[i].centroid.x;
        p(i, 1) = cells.cells[i].centroid.y;
    }
    const Eigen::VectorXd sq = p.rowwise().squaredNorm();
    const double inv = 1.0 / (2.0 * bandwidth * bandwidth);

    DensityMap map;
    map.bandwidth = bandwidth;
    map.density.resize(n);
    double max_d = 0.0;
    Eigen::VectorXd row(n);
    for (std::size_t i = 0; i < n; ++i) {
        row = (-(sq.array() - 2.0 * (p * p.row(i).transpose()).array() + sq(i)) * inv).exp();
        const double d = row.sum();
        map.density[i] = d;
        max_d = std::max(max_d, d);
    }
    for (double& d : map.density) d /= max_d;
    return map;
}

std::vector<WindowPair> sample_windows(const CellTable& cells, const DensityMap& density,
                                       const RigidTransform& coarse, std::size_t count,
                                       std::uint64_t seed, double gate, double source_size,
                                       double target_size, double min_separation) {
    if (density.density.size() != cells.cells.size()) {
        throw InvalidInput("density map does not match table size");
    }
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < density.density.size(); ++i) {
        if (density.density[i] >= gate) candidates.push_back(i);
    }
    if (candidates.empty()) {
        throw NoDenseRegion("no cell passes the density gate d >= " + std::to_string(gate));
    }

    std::mt19937_64 rng(seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);

    std::vector<std::size_t> chosen;
    std::vector<std::size_t> rejected;
    for (std::size_t idx : candidates) {
        if (chosen.size() >= count) break;
        const Point2D p = cells.cells[idx].centroid;
        const bool ok = std::none_of(chosen.begin(), chosen.end(), [&](std::size_t c) {
            return distance(p, cells.cells[c].centroid) < min_separation;
        });
        if (ok) chosen.push_back(idx);
        else rejected.push_back(idx);
    }
    // Best effort: fill from rejected candidates when separation can't be met.
    for (std::size_t idx : rejected) {
        if (chosen.size() >= count) break;
        chosen.push_back(idx);
    }

    std::vector<WindowPair> windows;
    windows.reserve(chosen.size());
    for (std::size_t idx : chosen) {
        WindowPair w;
        w.source_center = cells.cells[idx].centroid;
        w.source_size = source_size;
        w.target_center = apply(coarse, w.source_center);
        w.target_size = target_size;
        windows.push_back(w);
    }
    return windows;
}

CellGraph build_graph(const CellTable& cells, Point2D center, double window_size,
                      double edge_threshold, std::span<const std::string> feature_names) {
    CellGraph g;
    const double half = window_size / 2.0;
    for (const auto& cell : cells.cells) {
        if (std::abs(cell.centroid.x - center.x) > half ||
            std::abs(cell.centroid.y - center.y) > half) {
            continue;
        }
        GraphNode node;
        node.cell_id = cell.cell_id;
        node.pos = cell.centroid;
        node.features.reserve(feature_names.size());
        for (const auto& name : feature_names) {
            const auto v = cell.feature(name);
            if (!v) throw MissingFeature(cell.cell_id + " lacks feature " + name);
            node.features.push_back(*v);
        }
        g.nodes.push_back(std::move(node));
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < g.nodes.size(); ++j) {
            const double len = distance(g.nodes[i].pos, g.nodes[j].pos);
            if (len < edge_threshold) g.edges.push_back({i, j, len});
        }
    }
    return g;
}

}  // namespace cellalign

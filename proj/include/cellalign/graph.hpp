#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cellalign/cell_table.hpp"
#include "cellalign/geometry.hpp"

namespace cellalign {

// Max-normalized Gaussian KDE values, parallel to the table's cell order.
struct DensityMap {
    std::vector<double> density;  // each in [0, 1], max == 1
    double bandwidth{0.0};        // um
};

DensityMap kde_density(const CellTable& cells, double bandwidth);

struct WindowPair {
    Point2D source_center;
    double source_size{50.0};   // um, square side
    Point2D target_center;      // coarse-transform image of source_center
    double target_size{150.0};  // um, square side
};

// Source centers are cells sampled uniformly among {d >= gate}, pairwise
// at least min_separation apart (best effort when the gate set is tight).
std::vector<WindowPair> sample_windows(const CellTable& cells, const DensityMap& density,
                                       const RigidTransform& coarse, std::size_t count,
                                       std::uint64_t seed, double gate = 0.5,
                                       double source_size = 50.0, double target_size = 150.0,
                                       double min_separation = 50.0);

struct GraphNode {
    std::string cell_id;
    Point2D pos;
    std::vector<double> features;
};

struct GraphEdge {
    std::size_t i{0};
    std::size_t j{0};  // i < j
    double length{0.0};
};

struct CellGraph {
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
};

// Nodes: cells inside the axis-aligned square window. Edges: pairs closer
// than edge_threshold. Throws MissingFeature when a node lacks a feature.
CellGraph build_graph(const CellTable& cells, Point2D center, double window_size,
                      double edge_threshold, std::span<const std::string> feature_names);

}  // namespace cellalign

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cellalign/geometry.hpp"

namespace cellalign {

struct CpdConfig {
    double outlier_weight{0.1};  // w in [0, 1)
    int max_iterations{100};
    double tolerance{1e-5};      // relative sigma^2 change
    bool fix_scale{true};        // S = 1 throughout
    std::optional<std::size_t> max_points{5000};  // uniform downsample cap per side
    std::uint64_t seed{0};       // downsampling draw
};

struct CpdResult {
    RigidTransform transform;  // maps source into the target frame
    double sigma2{0.0};        // um^2
    int iterations{0};
    bool converged{false};
    double final_loglik{0.0};
    std::vector<double> sigma2_history;
};

// Rigid CPD: source points are GMM centroids fitted to the target set by
// EM, with a uniform outlier component of weight w. Rotation comes from
// the SVD of the weighted cross-covariance with determinant correction.
CpdResult cpd_rigid(std::span<const Point2D> source, std::span<const Point2D> target,
                    const CpdConfig& config);

// Weighted variant: weights act as replication factors in the E-step
// (super-cell member counts). Empty spans mean unit weights.
CpdResult cpd_rigid_weighted(std::span<const Point2D> source,
                             std::span<const double> source_weights,
                             std::span<const Point2D> target,
                             std::span<const double> target_weights,
                             const CpdConfig& config);

}  // namespace cellalign

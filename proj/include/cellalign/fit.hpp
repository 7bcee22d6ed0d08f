#pragma once

#include <span>
#include <vector>

#include "cellalign/geometry.hpp"

namespace cellalign {

struct Correspondence {
    Point2D source;
    Point2D target;
    double weight{1.0};
};

// Weighted least-squares similarity fit (SVD of the centered
// cross-covariance, determinant-corrected rotation). Scale is forced to 1
// unless estimate_scale is set.
RigidTransform fit_rigid(std::span<const Correspondence> pairs, bool estimate_scale = false);

struct AffineFit {
    AffineTransform transform;
    double residual_rms{0.0};  // um
};

// Weighted ordinary least squares on the six coefficients; needs >= 3
// non-collinear source points.
AffineFit fit_affine(std::span<const Correspondence> pairs);

}  // namespace cellalign

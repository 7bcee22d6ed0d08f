#pragma once

#include <cmath>

#include "cellalign/errors.hpp"

namespace cellalign {

// All coordinates are micrometers. Pixel units appear only at ingest.
struct Point2D {
    double x{0.0};
    double y{0.0};
};

inline Point2D operator+(Point2D a, Point2D b) { return {a.x + b.x, a.y + b.y}; }
inline Point2D operator-(Point2D a, Point2D b) { return {a.x - b.x, a.y - b.y}; }

inline double distance(Point2D a, Point2D b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Wraps an angle into (-pi, pi].
double normalize_angle(double theta);

// Similarity transform S*R(theta) + t. theta in radians, stored
// normalized to (-pi, pi]; scale must be > 0.
struct RigidTransform {
    double theta{0.0};
    double scale{1.0};
    double dx{0.0};
    double dy{0.0};
};

RigidTransform make_rigid(double theta, double scale, double dx, double dy);

Point2D apply(const RigidTransform& t, Point2D p);

// sqrt(dx^2 + dy^2)
double translation_magnitude(const RigidTransform& t);

// Planar affine map: linear part (a11 a12; a21 a22), translation (tx, ty).
struct AffineTransform {
    double a11{1.0}, a12{0.0};
    double a21{0.0}, a22{1.0};
    double tx{0.0}, ty{0.0};
};

Point2D apply(const AffineTransform& t, Point2D p);

inline double linear_det(const AffineTransform& t) {
    return t.a11 * t.a22 - t.a12 * t.a21;
}

// apply(compose(outer, inner), p) == apply(outer, apply(inner, p))
AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner);

// Throws SingularTransform when the linear part is not invertible.
AffineTransform invert(const AffineTransform& t);

AffineTransform to_affine(const RigidTransform& t);

// Rotation angle and translation of the closest rigid interpretation of an
// affine map; used when evaluating an affine result against a rigid truth.
RigidTransform rigid_part(const AffineTransform& t);

// Throws InvalidPixelSize when pixel_size <= 0.
Point2D px_to_um(Point2D p_px, double pixel_size);

}  // namespace cellalign

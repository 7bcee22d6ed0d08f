#include "cellalign/geometry.hpp"

#include <numbers>

namespace cellalign {

double normalize_angle(double theta) {
    const double two_pi = 2.0 * std::numbers::pi;
    double t = std::fmod(theta + std::numbers::pi, two_pi);
    if (t <= 0.0) t += two_pi;
    return t - std::numbers::pi;
}

RigidTransform make_rigid(double theta, double scale, double dx, double dy) {
    if (!(scale > 0.0) || !std::isfinite(theta) || !std::isfinite(scale) ||
        !std::isfinite(dx) || !std::isfinite(dy)) {
        throw InvalidInput("rigid transform requires finite fields and scale > 0");
    }
    return RigidTransform{normalize_angle(theta), scale, dx, dy};
}

Point2D apply(const RigidTransform& t, Point2D p) {
    const double c = t.scale * std::cos(t.theta);
    const double s = t.scale * std::sin(t.theta);
    return {c * p.x - s * p.y + t.dx, s * p.x + c * p.y + t.dy};
}

double translation_magnitude(const RigidTransform& t) {
    return std::hypot(t.dx, t.dy);
}

Point2D apply(const AffineTransform& t, Point2D p) {
    return {t.a11 * p.x + t.a12 * p.y + t.tx, t.a21 * p.x + t.a22 * p.y + t.ty};
}

AffineTransform compose(const AffineTransform& o, const AffineTransform& i) {
    AffineTransform r;
    r.a11 = o.a11 * i.a11 + o.a12 * i.a21;
    r.a12 = o.a11 * i.a12 + o.a12 * i.a22;
    r.a21 = o.a21 * i.a11 + o.a22 * i.a21;
    r.a22 = o.a21 * i.a12 + o.a22 * i.a22;
    r.tx = o.a11 * i.tx + o.a12 * i.ty + o.tx;
    r.ty = o.a21 * i.tx + o.a22 * i.ty + o.ty;
    return r;
}

AffineTransform invert(const AffineTransform& t) {
    const double det = linear_det(t);
    if (std::abs(det) <= 1e-12) {
        throw SingularTransform("linear part is not invertible (|det| <= 1e-12)");
    }
    AffineTransform r;
    r.a11 = t.a22 / det;
    r.a12 = -t.a12 / det;
    r.a21 = -t.a21 / det;
    r.a22 = t.a11 / det;
    r.tx = -(r.a11 * t.tx + r.a12 * t.ty);
    r.ty = -(r.a21 * t.tx + r.a22 * t.ty);
    return r;
}

AffineTransform to_affine(const RigidTransform& t) {
    const double c = t.scale * std::cos(t.theta);
    const double s = t.scale * std::sin(t.theta);
    return AffineTransform{c, -s, s, c, t.dx, t.dy};
}

RigidTransform rigid_part(const AffineTransform& t) {
    const double theta = std::atan2(t.a21 - t.a12, t.a11 + t.a22);
    const double det = linear_det(t);
    const double scale = det > 0.0 ? std::sqrt(det) : 1.0;
    return RigidTransform{normalize_angle(theta), scale, t.tx, t.ty};
}

Point2D px_to_um(Point2D p_px, double pixel_size) {
    if (!(pixel_size > 0.0)) {
        throw InvalidPixelSize("pixel_size must be > 0");
    }
    return {p_px.x * pixel_size, p_px.y * pixel_size};
}

}  // namespace cellalign

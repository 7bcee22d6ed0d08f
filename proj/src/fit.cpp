#include "cellalign/fit.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "cellalign/errors.hpp"

namespace cellalign {

namespace {

void check_weights(std::span<const Correspondence> pairs) {
    double total = 0.0;
    for (const auto& p : pairs) {
        if (p.weight < 0.0) throw InvalidInput("negative correspondence weight");
        total += p.weight;
    }
    if (!(total > 0.0)) throw InvalidInput("correspondence weights are all zero");
}

}  // namespace

RigidTransform fit_rigid(std::span<const Correspondence> pairs, bool estimate_scale) {
    if (pairs.size() < 2) {
        throw TooFewPairs("rigid fit needs >= 2 pairs, got " + std::to_string(pairs.size()));
    }
    check_weights(pairs);

    double wsum = 0.0;
    Eigen::Vector2d mu_s = Eigen::Vector2d::Zero(), mu_t = Eigen::Vector2d::Zero();
    for (const auto& p : pairs) {
        wsum += p.weight;
        mu_s += p.weight * Eigen::Vector2d(p.source.x, p.source.y);
        mu_t += p.weight * Eigen::Vector2d(p.target.x, p.target.y);
    }
    mu_s /= wsum;
    mu_t /= wsum;

    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    double src_var = 0.0;
    for (const auto& p : pairs) {
        const Eigen::Vector2d s = Eigen::Vector2d(p.source.x, p.source.y) - mu_s;
        const Eigen::Vector2d t = Eigen::Vector2d(p.target.x, p.target.y) - mu_t;
        cov += p.weight * t * s.transpose();
        src_var += p.weight * s.squaredNorm();
    }
    if (src_var <= 1e-18) {
        throw DegenerateConfiguration("all source points coincident");
    }

    Eigen::JacobiSVD<Eigen::Matrix2d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix2d c = Eigen::Matrix2d::Identity();
    c(1, 1) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    const Eigen::Matrix2d r = svd.matrixU() * c * svd.matrixV().transpose();

    double scale = 1.0;
    if (estimate_scale) {
        scale = (svd.singularValues().asDiagonal() * c).trace() / src_var;
        if (!(scale > 0.0)) throw DegenerateConfiguration("non-positive fitted scale");
    }
    const Eigen::Vector2d t = mu_t - scale * r * mu_s;
    return make_rigid(std::atan2(r(1, 0), r(0, 0)), scale, t(0), t(1));
}

AffineFit fit_affine(std::span<const Correspondence> pairs) {
    if (pairs.size() < 3) {
        throw TooFewPairs("affine fit needs >= 3 pairs, got " + std::to_string(pairs.size()));
    }
    check_weights(pairs);

    // Normal equations on the shared design [x y 1], one RHS per output axis.
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Eigen::Vector3d atx = Eigen::Vector3d::Zero(), aty = Eigen::Vector3d::Zero();
    for (const auto& p : pairs) {
        const Eigen::Vector3d row(p.source.x, p.source.y, 1.0);
        ata += p.weight * row * row.transpose();
        atx += p.weight * p.target.x * row;
        aty += p.weight * p.target.y * row;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(ata);
    const double cond_floor = es.eigenvalues().maxCoeff() * 1e-12;
    if (es.eigenvalues().minCoeff() <= cond_floor) {
        throw DegenerateConfiguration("source points collinear or coincident");
    }

    const Eigen::Vector3d cx = ata.ldlt().solve(atx);
    const Eigen::Vector3d cy = ata.ldlt().solve(aty);

    AffineFit fit;
    fit.transform = AffineTransform{cx(0), cx(1), cy(0), cy(1), cx(2), cy(2)};

    double wsum = 0.0, sq = 0.0;
    for (const auto& p : pairs) {
        const Point2D mapped = apply(fit.transform, p.source);
        const double d = distance(mapped, p.target);
        sq += p.weight * d * d;
        wsum += p.weight;
    }
    fit.residual_rms = std::sqrt(sq / wsum);
    return fit;
}

}  // namespace cellalign

#include "cellalign/cpd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <thread>

#include <Eigen/Dense>

#include "cellalign/errors.hpp"

namespace cellalign {

namespace {

constexpr double kSigma2Floor = 1e-12;
constexpr std::size_t kBlockRows = 256;

int env_thread_cap() {
    if (const char* s = std::getenv("CELLALIGN_THREADS")) {
        const int v = std::atoi(s);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

Eigen::MatrixXd to_matrix(std::span<const Point2D> pts) {
    Eigen::MatrixXd m(pts.size(), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!std::isfinite(pts[i].x) || !std::isfinite(pts[i].y)) {
            throw InvalidInput("non-finite coordinate at index " + std::to_string(i));
        }
        m(i, 0) = pts[i].x;
        m(i, 1) = pts[i].y;
    }
    return m;
}

// Per-block E-step partials, reduced in block order so the result is
// independent of the thread schedule and thread count.
struct BlockStats {
    Eigen::VectorXd p1;   // M
    Eigen::MatrixXd px;   // M x 2
    double np{0.0};
    double x_sq{0.0};     // sum_n Pt1_n * |x_n|^2
    double loglik{0.0};
};

struct EStepResult {
    Eigen::VectorXd p1;
    Eigen::MatrixXd px;
    double np{0.0};
    double x_sq{0.0};
    double loglik{0.0};
};

EStepResult e_step(const Eigen::MatrixXd& x, const Eigen::VectorXd& bw,
                   const Eigen::MatrixXd& transformed, const Eigen::VectorXd& aw,
                   double sigma2, double w, double sum_a, double sum_b) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto m = static_cast<std::size_t>(transformed.rows());
    const std::size_t n_blocks = (n + kBlockRows - 1) / kBlockRows;
    const double c = std::pow(2.0 * std::numbers::pi * sigma2, 1.0) * w / (1.0 - w) * sum_a / sum_b;
    const double k1 = (1.0 - w) / (sum_a * 2.0 * std::numbers::pi * sigma2);
    const double k2 = sum_b > 0.0 ? w / sum_b : 0.0;

    const Eigen::VectorXd t_sq = transformed.rowwise().squaredNorm();
    std::vector<BlockStats> blocks(n_blocks);

    auto run_block = [&](std::size_t blk) {
        const std::size_t lo = blk * kBlockRows;
        const std::size_t hi = std::min(n, lo + kBlockRows);
        BlockStats& st = blocks[blk];
        st.p1 = Eigen::VectorXd::Zero(m);
        st.px = Eigen::MatrixXd::Zero(m, 2);
        const Eigen::MatrixXd gram =
            x.middleRows(lo, hi - lo) * transformed.transpose();  // B x M
        Eigen::VectorXd q(m);
        for (std::size_t i = lo; i < hi; ++i) {
            const double x2 = x.row(i).squaredNorm();
            q = (-((t_sq.array() - 2.0 * gram.row(i - lo).transpose().array() + x2) /
                   (2.0 * sigma2)))
                    .exp() *
                aw.array();
            const double e_n = q.sum();
            const double denom = e_n + c;
            const double scale = bw(i) / denom;
            st.p1.noalias() += scale * q;
            st.px.col(0).noalias() += (scale * x(i, 0)) * q;
            st.px.col(1).noalias() += (scale * x(i, 1)) * q;
            const double pt1 = bw(i) * e_n / denom;
            st.np += pt1;
            st.x_sq += pt1 * x2;
            st.loglik += bw(i) * std::log(k1 * e_n + k2 + 1e-300);
        }
    };

    const int threads = std::min<int>(env_thread_cap(), static_cast<int>(n_blocks));
    if (threads <= 1) {
        for (std::size_t blk = 0; blk < n_blocks; ++blk) run_block(blk);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                for (std::size_t blk = t; blk < n_blocks; blk += threads) run_block(blk);
            });
        }
        for (auto& th : pool) th.join();
    }

    EStepResult out;
    out.p1 = Eigen::VectorXd::Zero(m);
    out.px = Eigen::MatrixXd::Zero(m, 2);
    for (const auto& st : blocks) {
        out.p1 += st.p1;
        out.px += st.px;
        out.np += st.np;
        out.x_sq += st.x_sq;
        out.loglik += st.loglik;
    }
    return out;
}

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t cap,
                                            std::uint64_t seed, std::uint64_t salt) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (n <= cap) return idx;
    std::mt19937_64 rng(seed ^ salt);
    std::vector<std::size_t> picked;
    picked.reserve(cap);
    std::sample(idx.begin(), idx.end(), std::back_inserter(picked), cap, rng);
    return picked;
}

}  // namespace

CpdResult cpd_rigid_weighted(std::span<const Point2D> source,
                             std::span<const double> source_weights,
                             std::span<const Point2D> target,
                             std::span<const double> target_weights,
                             const CpdConfig& cfg) {
    if (source.size() < 2 || target.size() < 2) {
        throw TooFewPoints("need >= 2 points on each side (source " +
                           std::to_string(source.size()) + ", target " +
                           std::to_string(target.size()) + ")");
    }
    if (cfg.outlier_weight < 0.0 || cfg.outlier_weight >= 1.0) {
        throw ConfigError("outlier_weight must be in [0, 1)");
    }
    if (cfg.max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (!(cfg.tolerance > 0.0)) throw ConfigError("tolerance must be > 0");
    if (!source_weights.empty() && source_weights.size() != source.size()) {
        throw InvalidInput("source weight count mismatch");
    }
    if (!target_weights.empty() && target_weights.size() != target.size()) {
        throw InvalidInput("target weight count mismatch");
    }

    Eigen::MatrixXd y = to_matrix(source);  // GMM centroids
    Eigen::MatrixXd x = to_matrix(target);  // data points
    Eigen::VectorXd aw = Eigen::VectorXd::Ones(y.rows());
    Eigen::VectorXd bw = Eigen::VectorXd::Ones(x.rows());
    for (std::size_t i = 0; i < source_weights.size(); ++i) aw(i) = source_weights[i];
    for (std::size_t i = 0; i < target_weights.size(); ++i) bw(i) = target_weights[i];

    if (cfg.max_points) {
        const auto si = downsample_indices(source.size(), *cfg.max_points, cfg.seed, 0x736f7572ULL);
        const auto ti = downsample_indices(target.size(), *cfg.max_points, cfg.seed, 0x74617267ULL);
        if (si.size() < source.size()) {
            Eigen::MatrixXd ys(si.size(), 2);
            Eigen::VectorXd as(si.size());
            for (std::size_t i = 0; i < si.size(); ++i) {
                ys.row(i) = y.row(si[i]);
                as(i) = aw(si[i]);
            }
            y = std::move(ys);
            aw = std::move(as);
        }
        if (ti.size() < target.size()) {
            Eigen::MatrixXd xs(ti.size(), 2);
            Eigen::VectorXd bs(ti.size());
            for (std::size_t i = 0; i < ti.size(); ++i) {
                xs.row(i) = x.row(ti[i]);
                bs(i) = bw(ti[i]);
            }
            x = std::move(xs);
            bw = std::move(bs);
        }
    }

    const double sum_a = aw.sum();
    const double sum_b = bw.sum();
    const double s_x2 = (bw.array() * x.rowwise().squaredNorm().array()).sum();
    const double s_y2 = (aw.array() * y.rowwise().squaredNorm().array()).sum();
    const Eigen::RowVector2d mx_sum = bw.transpose() * x;
    const Eigen::RowVector2d my_sum = aw.transpose() * y;
    double sigma2 =
        (sum_a * s_x2 + sum_b * s_y2 - 2.0 * mx_sum.dot(my_sum)) / (2.0 * sum_a * sum_b);
    sigma2 = std::max(sigma2, kSigma2Floor);

    double s = 1.0;
    Eigen::Matrix2d r = Eigen::Matrix2d::Identity();
    Eigen::RowVector2d t = Eigen::RowVector2d::Zero();

    CpdResult result;
    result.sigma2_history.reserve(cfg.max_iterations);

    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        const Eigen::MatrixXd transformed = (s * (y * r.transpose())).rowwise() + t;
        const EStepResult e =
            e_step(x, bw, transformed, aw, sigma2, cfg.outlier_weight, sum_a, sum_b);
        if (!(e.np > 0.0)) {
            // Every target point landed on the outlier component.
            result.converged = false;
            break;
        }

        const Eigen::RowVector2d mu_x = e.px.colwise().sum() / e.np;
        const Eigen::RowVector2d mu_y = (e.p1.transpose() * y) / e.np;
        const Eigen::Matrix2d a_mat =
            e.px.transpose() * y - e.np * mu_x.transpose() * mu_y;

        Eigen::JacobiSVD<Eigen::Matrix2d> svd(a_mat,
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix2d c_mat = Eigen::Matrix2d::Identity();
        c_mat(1, 1) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
        r = svd.matrixU() * c_mat * svd.matrixV().transpose();

        const double tr_ar = (a_mat.transpose() * r).trace();
        const double tr_y = (e.p1.array() * y.rowwise().squaredNorm().array()).sum() -
                            e.np * mu_y.squaredNorm();
        s = cfg.fix_scale ? 1.0 : tr_ar / std::max(tr_y, kSigma2Floor);
        t = mu_x - s * (r * mu_y.transpose()).transpose();

        const double tr_x = e.x_sq - e.np * mu_x.squaredNorm();
        double new_sigma2 = (tr_x - 2.0 * s * tr_ar + s * s * tr_y) / (2.0 * e.np);
        result.final_loglik = e.loglik;
        result.iterations = iter + 1;

        if (new_sigma2 < kSigma2Floor) {
            sigma2 = kSigma2Floor;
            result.sigma2_history.push_back(sigma2);
            result.converged = true;
            break;
        }
        const double rel = std::abs(sigma2 - new_sigma2) / sigma2;
        sigma2 = new_sigma2;
        result.sigma2_history.push_back(sigma2);
        if (rel < cfg.tolerance) {
            result.converged = true;
            break;
        }
    }

    const double theta = std::atan2(r(1, 0), r(0, 0));
    result.transform = make_rigid(theta, s > 0.0 ? s : 1.0, t(0), t(1));
    result.sigma2 = sigma2;
    return result;
}

CpdResult cpd_rigid(std::span<const Point2D> source, std::span<const Point2D> target,
                    const CpdConfig& cfg) {
    return cpd_rigid_weighted(source, {}, target, {}, cfg);
}

}  // namespace cellalign

#include "cellalign/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "cellalign/errors.hpp"

namespace cellalign {

namespace {

template <typename Transform>
EvaluationReport evaluate_impl(const LandmarkSet& landmarks, const Transform& estimated,
                               const RigidTransform& est_rigid,
                               const RigidTransform& ground_truth) {
    if (landmarks.pairs.size() < 2) {
        throw TooFewLandmarks("evaluation needs >= 2 landmark pairs");
    }
    EvaluationReport report;
    double sum = 0.0;
    for (const auto& lm : landmarks.pairs) {
        const double d_gt = distance(apply(ground_truth, lm.source), lm.target);
        const double d_est = distance(apply(estimated, lm.source), lm.target);
        report.per_landmark.push_back({d_gt, d_est});
        sum += std::abs(d_gt - d_est);
    }
    report.delta_d = sum / static_cast<double>(landmarks.pairs.size());
    report.delta_t = std::abs(translation_magnitude(est_rigid) -
                              translation_magnitude(ground_truth));
    report.delta_theta = std::abs(normalize_angle(est_rigid.theta - ground_truth.theta));
    return report;
}

}  // namespace

EvaluationReport evaluate(const LandmarkSet& landmarks, const RigidTransform& estimated,
                          const RigidTransform& ground_truth) {
    return evaluate_impl(landmarks, estimated, estimated, ground_truth);
}

EvaluationReport evaluate(const LandmarkSet& landmarks, const AffineTransform& estimated,
                          const RigidTransform& ground_truth) {
    return evaluate_impl(landmarks, estimated, rigid_part(estimated), ground_truth);
}

NearestPairing nearest_pairing(const CellTable& source_mapped, const CellTable& target,
                               double radius) {
    if (source_mapped.cells.empty() || target.cells.empty()) {
        throw EmptyInput("nearest_pairing on empty table");
    }

    const std::size_t ns = source_mapped.cells.size();
    const std::size_t nt = target.cells.size();
    std::vector<long> claimed(ns, -1);
    std::vector<std::size_t> claims(nt, 0);

    for (std::size_t i = 0; i < ns; ++i) {
        const Point2D p = source_mapped.cells[i].centroid;
        double best = radius;
        long best_j = -1;
        for (std::size_t j = 0; j < nt; ++j) {
            const double d = distance(p, target.cells[j].centroid);
            if (d < best || (best_j < 0 && d <= best)) {
                best = d;
                best_j = static_cast<long>(j);
            }
        }
        claimed[i] = best_j;
        if (best_j >= 0) ++claims[best_j];
    }

    NearestPairing result;
    for (std::size_t i = 0; i < ns; ++i) {
        if (claimed[i] < 0) {
            ++result.n0;
        } else if (claims[claimed[i]] == 1) {
            ++result.n1;
            result.unique_pairs.emplace_back(i, static_cast<std::size_t>(claimed[i]));
        } else {
            ++result.n_multi;
        }
    }
    return result;
}

double default_pairing_radius(const CellTable& table) {
    const std::size_t n = table.cells.size();
    if (n < 2) return std::numeric_limits<double>::infinity();
    std::vector<double> nn(n, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = distance(table.cells[i].centroid, table.cells[j].centroid);
            nn[i] = std::min(nn[i], d);
            nn[j] = std::min(nn[j], d);
        }
    }
    std::sort(nn.begin(), nn.end());
    const double median =
        n % 2 ? nn[n / 2] : 0.5 * (nn[n / 2 - 1] + nn[n / 2]);
    return median / 2.0;
}

PearsonResult pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidInput("pearson input length mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw InvalidInput("pearson needs n >= 3");

    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);

    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) {
        throw UndefinedCorrelation("zero variance input");
    }

    PearsonResult result;
    result.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double r2 = result.r * result.r;
    if (r2 >= 1.0) {
        result.p = 0.0;
    } else {
        const double dof = static_cast<double>(n - 2);
        const double t = std::abs(result.r) * std::sqrt(dof / (1.0 - r2));
        boost::math::students_t dist(dof);
        result.p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
    return result;
}

namespace {

std::pair<long, long> bin_of(Point2D p, double grid_size) {
    return {static_cast<long>(std::floor(p.x / grid_size)),
            static_cast<long>(std::floor(p.y / grid_size))};
}

}  // namespace

ProportionGrid regional_composition(const CellTable& cells, double grid_size,
                                    const std::string& positive_label) {
    if (cells.cells.empty()) throw EmptyInput("regional_composition on empty table");
    if (!(grid_size > 0.0)) throw ConfigError("grid_size must be > 0");

    ProportionGrid grid;
    grid.grid_size = grid_size;
    std::map<std::pair<long, long>, std::size_t> positives;
    for (const auto& cell : cells.cells) {
        if (!cell.class_label) throw MissingLabel(cell.cell_id);
        const auto bin = bin_of(cell.centroid, grid_size);
        ++grid.counts[bin];
        if (*cell.class_label == positive_label) ++positives[bin];
    }
    for (const auto& [bin, count] : grid.counts) {
        grid.proportions[bin] =
            static_cast<double>(positives[bin]) / static_cast<double>(count);
    }
    return grid;
}

ConcordanceGrid regional_concordance(const ProportionGrid& a, const ProportionGrid& b) {
    if (a.grid_size != b.grid_size) {
        throw GridMismatch("grid sizes differ: " + std::to_string(a.grid_size) + " vs " +
                           std::to_string(b.grid_size));
    }
    ConcordanceGrid grid;
    grid.grid_size = a.grid_size;
    for (const auto& [bin, pa] : a.proportions) {
        const auto it = b.proportions.find(bin);
        if (it == b.proportions.end()) continue;  // occupied on one side only
        grid.similarity[bin] = 1.0 - std::abs(pa - it->second);
    }
    return grid;
}

}  // namespace cellalign

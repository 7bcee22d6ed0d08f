#include "cellalign/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cellalign/errors.hpp"

namespace cellalign {

namespace {

// Z-score each feature dimension over the union of both node sets; a
// dimension with zero spread contributes zero distance.
std::pair<std::vector<double>, std::vector<double>> feature_stats(const CellGraph& a,
                                                                  const CellGraph& b,
                                                                  std::size_t dim) {
    std::vector<double> mean(dim, 0.0), stddev(dim, 0.0);
    const double n = static_cast<double>(a.nodes.size() + b.nodes.size());
    for (const auto* g : {&a, &b}) {
        for (const auto& node : g->nodes) {
            for (std::size_t d = 0; d < dim; ++d) mean[d] += node.features[d];
        }
    }
    for (auto& m : mean) m /= n;
    for (const auto* g : {&a, &b}) {
        for (const auto& node : g->nodes) {
            for (std::size_t d = 0; d < dim; ++d) {
                const double c = node.features[d] - mean[d];
                stddev[d] += c * c;
            }
        }
    }
    for (auto& s : stddev) s = std::sqrt(s / n);
    return {mean, stddev};
}

}  // namespace

AffinityMatrix build_affinity(const CellGraph& src, const CellGraph& tgt,
                              const AffinityParams& params) {
    if (src.nodes.empty() || tgt.nodes.empty()) {
        throw EmptyInput("build_affinity requires non-empty graphs");
    }
    const std::size_t dim = src.nodes[0].features.size();
    for (const auto* g : {&src, &tgt}) {
        for (const auto& node : g->nodes) {
            if (node.features.size() != dim) {
                throw FeatureMismatch("node " + node.cell_id + " has " +
                                      std::to_string(node.features.size()) +
                                      " features, expected " + std::to_string(dim));
            }
        }
    }

    const auto [mean, stddev] = feature_stats(src, tgt, dim);
    auto zdist2 = [&](const GraphNode& a, const GraphNode& b) {
        double d2 = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            if (stddev[d] <= 0.0) continue;
            const double diff = (a.features[d] - b.features[d]) / stddev[d];
            d2 += diff * diff;
        }
        return d2;
    };

    const std::size_t n1 = src.nodes.size();
    const std::size_t n2 = tgt.nodes.size();
    const double sf2 = params.sigma_feature * params.sigma_feature;
    const double se2 = params.sigma_edge * params.sigma_edge;

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(n1 * n2 + 4 * src.edges.size() * tgt.edges.size());
    auto flat = [n2](std::size_t i, std::size_t a) {
        return static_cast<long>(i * n2 + a);
    };

    for (std::size_t i = 0; i < n1; ++i) {
        for (std::size_t a = 0; a < n2; ++a) {
            const double w = std::exp(-zdist2(src.nodes[i], tgt.nodes[a]) / sf2);
            triplets.emplace_back(flat(i, a), flat(i, a), w);
        }
    }
    for (const auto& es : src.edges) {
        for (const auto& et : tgt.edges) {
            const double diff = es.length - et.length;
            const double w = std::exp(-diff * diff / se2);
            // Both orientations of the undirected edge pair, symmetrized.
            const long p1 = flat(es.i, et.i), p2 = flat(es.j, et.j);
            const long p3 = flat(es.i, et.j), p4 = flat(es.j, et.i);
            triplets.emplace_back(p1, p2, w);
            triplets.emplace_back(p2, p1, w);
            triplets.emplace_back(p3, p4, w);
            triplets.emplace_back(p4, p3, w);
        }
    }

    AffinityMatrix m;
    m.n1 = n1;
    m.n2 = n2;
    m.k.resize(static_cast<long>(n1 * n2), static_cast<long>(n1 * n2));
    m.k.setFromTriplets(triplets.begin(), triplets.end(),
                        [](const double&, const double& b) { return b; });
    return m;
}

Eigen::MatrixXd sinkhorn(const Eigen::MatrixXd& input, int max_iter, double tol) {
    if (input.size() == 0) throw EmptyInput("sinkhorn on empty matrix");
    if (!input.allFinite()) throw InvalidInput("sinkhorn input has NaN/Inf");
    const long n = std::max(input.rows(), input.cols());
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, 1e-9);
    m.topLeftCorner(input.rows(), input.cols()) =
        input.cwiseMax(Eigen::MatrixXd::Constant(input.rows(), input.cols(), 1e-9));

    for (int it = 0; it < max_iter; ++it) {
        for (long i = 0; i < n; ++i) m.row(i) /= m.row(i).sum();
        for (long j = 0; j < n; ++j) m.col(j) /= m.col(j).sum();
        const double row_dev = (m.rowwise().sum().array() - 1.0).abs().maxCoeff();
        const double col_dev = (m.colwise().sum().array() - 1.0).abs().maxCoeff();
        if (std::max(row_dev, col_dev) < tol) break;
    }
    return m;
}

Eigen::MatrixXd rrwm(const AffinityMatrix& affinity, const RrwmParams& params,
                     int* iterations_out) {
    if (affinity.n1 == 0 || affinity.n2 == 0 || affinity.k.nonZeros() == 0) {
        throw DegenerateAffinity("affinity matrix has no nonzero entries");
    }
    if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
        throw ConfigError("alpha must be in (0, 1)");
    }
    if (!(params.beta > 0.0)) throw ConfigError("beta must be > 0");

    const long n1 = static_cast<long>(affinity.n1);
    const long n2 = static_cast<long>(affinity.n2);
    const long nn = n1 * n2;
    // Start the walk from the node affinities rather than uniform: with
    // strongly rectangular problems a uniform start lets edge-rich target
    // regions dominate the first walk step and the jump then locks onto
    // them regardless of node evidence.
    Eigen::VectorXd x(nn);
    for (long i = 0; i < nn; ++i) x(i) = affinity.k.coeff(i, i) + 1e-12;
    x /= x.sum();

    int iterations = params.max_iter;
    for (int it = 0; it < params.max_iter; ++it) {
        Eigen::VectorXd walk = affinity.k * x;
        const double wsum = walk.sum();
        if (!(wsum > 0.0)) throw DegenerateAffinity("walk step vanished");
        walk /= wsum;

        // Reweighting jump: sharpen, then balance toward a permutation.
        const double wmax = walk.maxCoeff();
        Eigen::MatrixXd jump_mat(n1, n2);
        for (long i = 0; i < n1; ++i) {
            for (long a = 0; a < n2; ++a) {
                jump_mat(i, a) = std::exp(params.beta * walk(i * n2 + a) / wmax);
            }
        }
        const Eigen::MatrixXd balanced = sinkhorn(jump_mat, 200, 1e-9);
        Eigen::VectorXd jump(nn);
        for (long i = 0; i < n1; ++i) {
            for (long a = 0; a < n2; ++a) jump(i * n2 + a) = balanced(i, a);
        }
        jump /= jump.sum();

        Eigen::VectorXd next = params.alpha * walk + (1.0 - params.alpha) * jump;
        const double step = (next - x).cwiseAbs().maxCoeff();
        x = std::move(next);
        if (step < params.tol) {
            iterations = it + 1;
            break;
        }
    }
    if (iterations_out != nullptr) *iterations_out = iterations;

    Eigen::MatrixXd out(n1, n2);
    for (long i = 0; i < n1; ++i) {
        for (long a = 0; a < n2; ++a) out(i, a) = x(i * n2 + a);
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> hungarian(const Eigen::MatrixXd& score) {
    if (score.size() == 0) throw EmptyInput("hungarian on empty matrix");
    if (!score.allFinite()) throw InvalidInput("hungarian input has NaN/Inf");

    const long rows = score.rows(), cols = score.cols();
    const long n = std::max(rows, cols);
    const double pad = score.maxCoeff();
    // Minimization form; padded entries cost the same as a zero score.
    Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(n, n, pad);
    cost.topLeftCorner(rows, cols) = (pad - score.array()).matrix();

    // Jonker-Volgenant style shortest augmenting paths, O(n^3).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<long> p(n + 1, 0), way(n + 1, 0);
    for (long i = 1; i <= n; ++i) {
        p[0] = i;
        long j0 = 0;
        std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const long i0 = p[j0];
            long j1 = 0;
            double delta = std::numeric_limits<double>::infinity();
            for (long j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (long j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const long j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<std::pair<std::size_t, std::size_t>> result;
    for (long j = 1; j <= n; ++j) {
        const long i = p[j];
        if (i >= 1 && i <= rows && j <= cols) {
            result.emplace_back(static_cast<std::size_t>(i - 1),
                                static_cast<std::size_t>(j - 1));
        }
    }
    std::sort(result.begin(), result.end());
    return result;
}

namespace {

std::vector<std::size_t> nearest_matches(const std::vector<Point2D>& pts, std::size_t self,
                                         std::size_t k) {
    std::vector<std::size_t> idx;
    idx.reserve(pts.size() - 1);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i != self) idx.push_back(i);
    }
    const Point2D origin = pts[self];
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double da = distance(pts[a], origin), db = distance(pts[b], origin);
        if (da != db) return da < db;
        return a < b;  // stable under coordinate ties
    });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

std::vector<Match> lpm_pass(const std::vector<Match>& matches,
                            const std::map<std::string, Point2D>& src_positions,
                            const std::map<std::string, Point2D>& tgt_positions,
                            std::size_t k, double lambda) {
    std::vector<Point2D> sp(matches.size()), tp(matches.size());
    for (std::size_t i = 0; i < matches.size(); ++i) {
        const auto s = src_positions.find(matches[i].src_id);
        const auto t = tgt_positions.find(matches[i].tgt_id);
        if (s == src_positions.end()) throw UnknownId("source " + matches[i].src_id);
        if (t == tgt_positions.end()) throw UnknownId("target " + matches[i].tgt_id);
        sp[i] = s->second;
        tp[i] = t->second;
    }
    std::vector<Match> kept;
    for (std::size_t m = 0; m < matches.size(); ++m) {
        const auto near_src = nearest_matches(sp, m, k);
        const auto near_tgt = nearest_matches(tp, m, k);
        std::size_t overlap = 0;
        for (std::size_t i : near_src) {
            if (std::find(near_tgt.begin(), near_tgt.end(), i) != near_tgt.end()) ++overlap;
        }
        const double cost = static_cast<double>(k) - static_cast<double>(overlap);
        if (cost <= lambda * static_cast<double>(k)) kept.push_back(matches[m]);
    }
    return kept;
}

}  // namespace

MatchSet lpm_filter(const MatchSet& matches, const std::map<std::string, Point2D>& src_positions,
                    const std::map<std::string, Point2D>& tgt_positions, std::size_t k,
                    double lambda) {
    if (matches.size() < k + 1) {
        MatchSet out = matches;
        out.low_confidence = true;
        return out;
    }
    std::vector<Match> pass1 = lpm_pass(matches.matches, src_positions, tgt_positions, k, lambda);
    if (pass1.size() < k + 1) {
        MatchSet out;
        out.matches = std::move(pass1);
        out.low_confidence = true;
        return out;
    }
    MatchSet out;
    out.matches = lpm_pass(pass1, src_positions, tgt_positions, k, lambda);
    return out;
}

}  // namespace cellalign

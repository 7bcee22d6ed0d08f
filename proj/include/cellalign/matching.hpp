#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "cellalign/graph.hpp"
#include "cellalign/match_set.hpp"

namespace cellalign {

struct AffinityParams {
    std::vector<std::string> feature_names{"perimeter", "solidity"};
    double sigma_feature{1.0};  // on z-scored features
    double sigma_edge{5.0};     // um
};

// Pairwise affinity over candidate assignments (i -> a), flattened
// row-major as i * n2 + a. Diagonal holds node affinities; off-diagonal
// entries exist only where both graphs have the corresponding edge, so the
// matrix is stored sparse.
struct AffinityMatrix {
    Eigen::SparseMatrix<double> k;
    std::size_t n1{0};
    std::size_t n2{0};

    double at(std::size_t i, std::size_t a, std::size_t j, std::size_t b) const {
        return k.coeff(static_cast<long>(i * n2 + a), static_cast<long>(j * n2 + b));
    }
};

// node(i,a) = exp(-|f_i - f_a|^2 / sigma_f^2) on z-scored features;
// edge((i,j),(a,b)) = exp(-(len_ij - len_ab)^2 / sigma_e^2).
AffinityMatrix build_affinity(const CellGraph& src, const CellGraph& tgt,
                              const AffinityParams& params);

struct RrwmParams {
    double alpha{0.2};  // weight of the plain walk term
    double beta{30.0};  // reweighting sharpness
    int max_iter{300};
    double tol{1e-6};   // on the max-norm step change
};

// Reweighted random walk over the affinity matrix; returns nonnegative
// soft assignment scores as an n1 x n2 matrix. When iterations_out is
// given it receives the number of iterations actually run; convergence
// before max_iter means the last step change fell below tol.
Eigen::MatrixXd rrwm(const AffinityMatrix& affinity, const RrwmParams& params,
                     int* iterations_out = nullptr);

// Alternating row/column normalization. Rectangular input is padded to
// square with 1e-9 before balancing; the padded square matrix is returned.
Eigen::MatrixXd sinkhorn(const Eigen::MatrixXd& m, int max_iter = 5000, double tol = 1e-9);

// Optimal one-to-one assignment maximizing total score; min(n1, n2) pairs.
std::vector<std::pair<std::size_t, std::size_t>> hungarian(const Eigen::MatrixXd& score);

// Locality-preserving filter: a match survives when at least
// (1 - lambda) * k of its k nearest matched neighbors (on both sides)
// correspond to each other. Two passes; survivors of the first define the
// neighborhoods of the second. Fewer than k+1 matches pass through with
// the low_confidence flag set.
MatchSet lpm_filter(const MatchSet& matches,
                    const std::map<std::string, Point2D>& src_positions,
                    const std::map<std::string, Point2D>& tgt_positions,
                    std::size_t k = 8, double lambda = 0.5);

}  // namespace cellalign

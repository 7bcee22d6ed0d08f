#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cellalign/cell_table.hpp"
#include "cellalign/cpd.hpp"
#include "cellalign/geometry.hpp"
#include "cellalign/match_set.hpp"
#include "cellalign/matching.hpp"

namespace cellalign {

struct SupercellConfig {
    double grid_size{100.0};  // um
};

struct AlignmentConfig {
    CpdConfig cpd{};
    double kde_bandwidth{25.0};
    double density_gate{0.5};
    std::size_t window_count{8};
    double src_window{50.0};    // um
    double tgt_window{150.0};   // um
    double edge_threshold{15.0};  // um
    AffinityParams affinity{};
    RrwmParams rrwm{};
    std::size_t lpm_k{8};
    double lpm_lambda{0.5};
    double score_floor{0.1};  // row-normalized score below which matches drop
    std::size_t min_pooled_matches{10};
    std::size_t min_cells{50};
    std::optional<SupercellConfig> supercell;
};

struct AlignmentResult {
    RigidTransform coarse;     // CPD
    AffineTransform refined;   // affine fit of LPM survivors, or coarse lifted
    MatchSet matches;          // pooled, LPM-filtered
    bool coarse_only{false};   // too few pooled matches; refined == coarse
    struct Diagnostics {
        int cpd_iterations{0};
        double sigma2{0.0};
        double coarse_seconds{0.0};  // wall time of the coarse stage
        std::size_t windows_used{0};
        std::vector<std::size_t> matches_per_window;
        std::size_t pooled_count{0};
        double fit_residual_rms{0.0};
    } diagnostics;
};

// CPD coarse alignment, windowed graph matching, pooled LPM filtering and
// a final affine fit. Deterministic given seed.
AlignmentResult align(const CellTable& source, const CellTable& target,
                      const AlignmentConfig& config, std::uint64_t seed);

// One super-cell per occupied grid bin; centroid is the member mean and
// feature "weight" the member count.
CellTable supercell_cluster(const CellTable& cells, double grid_size);

// Same pipeline with the coarse CPD stage run on super-cells (weights as
// replication factors); the matching stage still sees original cells.
AlignmentResult align_large(const CellTable& source, const CellTable& target,
                            const AlignmentConfig& config, std::uint64_t seed);

}  // namespace cellalign

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cellalign/cell_table.hpp"
#include "cellalign/geometry.hpp"

namespace cellalign {

// Synthetic tissue-like point pattern with known transform and
// correspondence. All randomness comes from one mt19937_64 stream seeded
// with `seed`; identical scenarios reproduce byte-identical tables.
struct SynthScenario {
    std::size_t n_points{500};
    double extent{500.0};         // um, square side
    std::size_t cluster_count{0};  // 0 = uniform pattern
    double cluster_sigma{20.0};    // um, offspring spread
    RigidTransform transform{};
    double jitter_sigma{0.0};      // um, per-point Gaussian noise in target
    double dropout_rate{0.0};      // fraction of cells missing from target
    double spurious_rate{0.0};     // extra unmatched target cells, per source cell
    double feature_jitter{0.0};    // sigma of additive feature noise in target
    std::uint64_t seed{0};
};

struct SynthOutput {
    CellTable source;
    CellTable target;
    std::vector<std::pair<std::string, std::string>> truth_pairs;  // src_id -> tgt_id
    RigidTransform truth_transform;
};

SynthOutput generate(const SynthScenario& scenario);

}  // namespace cellalign

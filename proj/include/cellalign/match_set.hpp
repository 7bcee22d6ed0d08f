#pragma once

#include <string>
#include <vector>

namespace cellalign {

struct Match {
    std::string src_id;
    std::string tgt_id;
    double score{0.0};  // in [0, 1]
};

// One-to-one scored correspondences; no src_id or tgt_id repeats.
// low_confidence is set when a filter stage had too few matches to act on.
struct MatchSet {
    std::vector<Match> matches;
    bool low_confidence{false};

    std::size_t size() const { return matches.size(); }
    bool empty() const { return matches.empty(); }
};

}  // namespace cellalign

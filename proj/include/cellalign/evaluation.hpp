#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cellalign/cell_table.hpp"
#include "cellalign/geometry.hpp"

namespace cellalign {

// Landmark-based accuracy: mean |d_i - d_i'|, translation-magnitude
// difference and wrapped rotation difference versus ground truth.
struct EvaluationReport {
    double delta_d{0.0};      // um
    double delta_t{0.0};      // um
    double delta_theta{0.0};  // radians, in [0, pi]
    struct LandmarkResidual {
        double d_gt{0.0};   // um, ground-truth transform residual
        double d_est{0.0};  // um, estimated transform residual
    };
    std::vector<LandmarkResidual> per_landmark;
};

EvaluationReport evaluate(const LandmarkSet& landmarks, const RigidTransform& estimated,
                          const RigidTransform& ground_truth);

// Affine estimate: residuals use the affine map, theta/T its rigid part.
EvaluationReport evaluate(const LandmarkSet& landmarks, const AffineTransform& estimated,
                          const RigidTransform& ground_truth);

struct NearestPairing {
    // Indices into (source, target) for sources whose claimed target is
    // claimed by exactly one source; these feed feature concordance.
    std::vector<std::pair<std::size_t, std::size_t>> unique_pairs;
    std::size_t n0{0};       // sources with no target within radius
    std::size_t n1{0};       // sources in a one-to-one pair
    std::size_t n_multi{0};  // sources sharing a target with another source
};

// source_mapped must already be in the target frame. radius may be
// infinity to pair every source with its raw nearest target.
NearestPairing nearest_pairing(const CellTable& source_mapped, const CellTable& target,
                               double radius);

// Half the median nearest-neighbor distance of the table; default pairing radius.
double default_pairing_radius(const CellTable& table);

struct PearsonResult {
    double r{0.0};
    double p{1.0};  // two-sided, Student-t with n-2 dof
};

PearsonResult pearson(std::span<const double> x, std::span<const double> y);

struct FeatureConcordance {
    double r{0.0};
    double p{1.0};
    std::size_t n{0};
};

struct ConcordanceReport {
    std::map<std::string, FeatureConcordance> per_feature;
    std::size_t n0{0}, n1{0}, n_multi{0};
};

// Fraction of positive_label cells per occupied grid bin. Bins are indexed
// by floor(coord / grid_size); two grids compare only when grid_size matches.
struct ProportionGrid {
    double grid_size{0.0};
    std::map<std::pair<long, long>, double> proportions;
    std::map<std::pair<long, long>, std::size_t> counts;
};

ProportionGrid regional_composition(const CellTable& cells, double grid_size,
                                    const std::string& positive_label);

// similarity = 1 - |p_a - p_b| on bins occupied in both grids.
struct ConcordanceGrid {
    double grid_size{0.0};
    std::map<std::pair<long, long>, double> similarity;
};

ConcordanceGrid regional_concordance(const ProportionGrid& a, const ProportionGrid& b);

}  // namespace cellalign

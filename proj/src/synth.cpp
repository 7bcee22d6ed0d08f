#include "cellalign/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "cellalign/errors.hpp"

namespace cellalign {

namespace {

std::string padded_id(const char* prefix, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
    return buf;
}

void assign_morphology(CellRecord& cell, std::mt19937_64& rng) {
    std::normal_distribution<double> radius_dist(3.5, 0.6);
    std::uniform_real_distribution<double> solidity_dist(0.85, 1.0);
    std::lognormal_distribution<double> stain_dist(4.0, 0.5);
    const double r = std::max(1.0, radius_dist(rng));
    const double solidity = solidity_dist(rng);
    cell.features["area"] = std::numbers::pi * r * r;
    cell.features["perimeter"] = 2.0 * std::numbers::pi * r / solidity;
    cell.features["solidity"] = solidity;
    cell.features["min_diameter"] = 2.0 * r * solidity;
    cell.features["max_diameter"] = 2.0 * r / solidity;
    cell.features["nucleus_stain_mean"] = stain_dist(rng);
}

}  // namespace

SynthOutput generate(const SynthScenario& sc) {
    if (sc.n_points < 2) throw ConfigError("n_points must be >= 2");
    if (!(sc.extent > 0.0)) throw ConfigError("extent must be > 0");
    if (sc.dropout_rate < 0.0 || sc.dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must be in [0, 1)");
    }
    if (sc.spurious_rate < 0.0) throw ConfigError("spurious_rate must be >= 0");
    if (sc.jitter_sigma < 0.0 || sc.cluster_sigma < 0.0 || sc.feature_jitter < 0.0) {
        throw ConfigError("sigmas must be >= 0");
    }

    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> uniform(0.0, sc.extent);

    SynthOutput out;
    out.truth_transform = sc.transform;
    out.source.modality = Modality::HE;
    out.target.modality = Modality::MxIF;

    // Neyman-Scott when clustered: uniform parents, Gaussian offspring.
    std::vector<Point2D> parents;
    for (std::size_t i = 0; i < sc.cluster_count; ++i) {
        parents.push_back({uniform(rng), uniform(rng)});
    }
    std::normal_distribution<double> offspring(0.0, sc.cluster_sigma);
    std::uniform_int_distribution<std::size_t> pick_parent(
        0, parents.empty() ? 0 : parents.size() - 1);

    for (std::size_t i = 0; i < sc.n_points; ++i) {
        CellRecord cell;
        cell.cell_id = padded_id("s", i);
        if (parents.empty()) {
            cell.centroid = {uniform(rng), uniform(rng)};
        } else {
            const Point2D& p = parents[pick_parent(rng)];
            cell.centroid = {p.x + offspring(rng), p.y + offspring(rng)};
        }
        assign_morphology(cell, rng);
        out.source.cells.push_back(std::move(cell));
    }

    std::bernoulli_distribution dropped(sc.dropout_rate);
    std::normal_distribution<double> jitter(0.0, sc.jitter_sigma);
    std::normal_distribution<double> fnoise(0.0, sc.feature_jitter);
    std::size_t tgt_idx = 0;
    for (const auto& src : out.source.cells) {
        if (sc.dropout_rate > 0.0 && dropped(rng)) continue;
        CellRecord cell;
        cell.cell_id = padded_id("t", tgt_idx++);
        cell.centroid = apply(sc.transform, src.centroid);
        if (sc.jitter_sigma > 0.0) {
            cell.centroid.x += jitter(rng);
            cell.centroid.y += jitter(rng);
        }
        cell.features = src.features;
        if (sc.feature_jitter > 0.0) {
            for (auto& [name, v] : cell.features) v += fnoise(rng);
        }
        out.truth_pairs.emplace_back(src.cell_id, cell.cell_id);
        out.target.cells.push_back(std::move(cell));
    }

    const auto n_spurious =
        static_cast<std::size_t>(std::llround(sc.spurious_rate * static_cast<double>(sc.n_points)));
    for (std::size_t i = 0; i < n_spurious; ++i) {
        CellRecord cell;
        cell.cell_id = padded_id("t", tgt_idx++);
        cell.centroid = apply(sc.transform, {uniform(rng), uniform(rng)});
        assign_morphology(cell, rng);
        out.target.cells.push_back(std::move(cell));
    }

    return out;
}

}  // namespace cellalign

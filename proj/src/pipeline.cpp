#include "cellalign/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "cellalign/errors.hpp"
#include "cellalign/fit.hpp"
#include "cellalign/graph.hpp"

namespace cellalign {

namespace {

std::vector<Point2D> centroids(const CellTable& table) {
    std::vector<Point2D> pts;
    pts.reserve(table.cells.size());
    for (const auto& c : table.cells) pts.push_back(c.centroid);
    return pts;
}

struct WindowMatches {
    std::vector<Match> matches;
    bool usable{false};
};

WindowMatches match_window(const CellTable& source, const CellTable& target,
                           const WindowPair& window, const AlignmentConfig& cfg) {
    WindowMatches out;
    const CellGraph g_src = build_graph(source, window.source_center, window.source_size,
                                        cfg.edge_threshold, cfg.affinity.feature_names);
    const CellGraph g_tgt = build_graph(target, window.target_center, window.target_size,
                                        cfg.edge_threshold, cfg.affinity.feature_names);
    if (g_src.nodes.empty() || g_tgt.nodes.empty()) return out;
    out.usable = true;

    const AffinityMatrix k = build_affinity(g_src, g_tgt, cfg.affinity);
    const Eigen::MatrixXd soft = rrwm(k, cfg.rrwm);
    const auto assignment = hungarian(soft);
    for (const auto& [i, a] : assignment) {
        const double row_sum = soft.row(static_cast<long>(i)).sum();
        const double score =
            row_sum > 0.0 ? soft(static_cast<long>(i), static_cast<long>(a)) / row_sum : 0.0;
        if (score < cfg.score_floor) continue;
        out.matches.push_back({g_src.nodes[i].cell_id, g_tgt.nodes[a].cell_id,
                               std::min(score, 1.0)});
    }
    return out;
}

// Highest score wins when a cell is matched in several overlapping
// windows; ties break lexicographically so pooling is order-independent.
MatchSet pool_matches(std::vector<Match> candidates) {
    std::sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.src_id != b.src_id) return a.src_id < b.src_id;
        return a.tgt_id < b.tgt_id;
    });
    MatchSet pooled;
    std::map<std::string, bool> src_used, tgt_used;
    for (auto& m : candidates) {
        if (src_used[m.src_id] || tgt_used[m.tgt_id]) continue;
        src_used[m.src_id] = tgt_used[m.tgt_id] = true;
        pooled.matches.push_back(std::move(m));
    }
    std::sort(pooled.matches.begin(), pooled.matches.end(),
              [](const Match& a, const Match& b) {
                  if (a.src_id != b.src_id) return a.src_id < b.src_id;
                  return a.tgt_id < b.tgt_id;
              });
    return pooled;
}

AlignmentResult refine_from_coarse(const CellTable& source, const CellTable& target,
                                   const AlignmentConfig& cfg, std::uint64_t seed,
                                   const CpdResult& coarse, double coarse_seconds) {
    AlignmentResult result;
    result.coarse = coarse.transform;
    result.diagnostics.cpd_iterations = coarse.iterations;
    result.diagnostics.sigma2 = coarse.sigma2;
    result.diagnostics.coarse_seconds = coarse_seconds;

    const DensityMap density = kde_density(source, cfg.kde_bandwidth);
    const auto windows =
        sample_windows(source, density, coarse.transform, cfg.window_count, seed,
                       cfg.density_gate, cfg.src_window, cfg.tgt_window, cfg.src_window);

    std::vector<Match> candidates;
    for (const auto& window : windows) {
        const WindowMatches wm = match_window(source, target, window, cfg);
        if (wm.usable) ++result.diagnostics.windows_used;
        result.diagnostics.matches_per_window.push_back(wm.matches.size());
        candidates.insert(candidates.end(), wm.matches.begin(), wm.matches.end());
    }
    if (result.diagnostics.windows_used == 0) {
        throw WindowsEmpty("no sampled window contained cells on both sides");
    }

    MatchSet pooled = pool_matches(std::move(candidates));
    result.diagnostics.pooled_count = pooled.size();

    std::map<std::string, Point2D> src_pos, tgt_pos;
    for (const auto& c : source.cells) src_pos[c.cell_id] = c.centroid;
    for (const auto& c : target.cells) tgt_pos[c.cell_id] = c.centroid;
    result.matches = lpm_filter(pooled, src_pos, tgt_pos, cfg.lpm_k, cfg.lpm_lambda);

    if (result.matches.size() >= cfg.min_pooled_matches) {
        std::vector<Correspondence> pairs;
        pairs.reserve(result.matches.size());
        for (const auto& m : result.matches.matches) {
            pairs.push_back({src_pos.at(m.src_id), tgt_pos.at(m.tgt_id), m.score});
        }
        const AffineFit fit = fit_affine(pairs);
        result.refined = fit.transform;
        result.diagnostics.fit_residual_rms = fit.residual_rms;
    } else {
        result.coarse_only = true;
        result.refined = to_affine(coarse.transform);
    }
    return result;
}

void check_sizes(const CellTable& source, const CellTable& target,
                 const AlignmentConfig& cfg) {
    if (source.cells.size() < cfg.min_cells || target.cells.size() < cfg.min_cells) {
        throw TooFewCells("need >= " + std::to_string(cfg.min_cells) +
                          " cells per table (source " + std::to_string(source.cells.size()) +
                          ", target " + std::to_string(target.cells.size()) + ")");
    }
}

}  // namespace

AlignmentResult align(const CellTable& source, const CellTable& target,
                      const AlignmentConfig& cfg, std::uint64_t seed) {
    check_sizes(source, target, cfg);
    CpdConfig cpd_cfg = cfg.cpd;
    cpd_cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const CpdResult coarse = cpd_rigid(centroids(source), centroids(target), cpd_cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return refine_from_coarse(source, target, cfg, seed, coarse, secs);
}

CellTable supercell_cluster(const CellTable& cells, double grid_size) {
    if (cells.cells.empty()) throw EmptyInput("supercell_cluster on empty table");
    if (!(grid_size > 0.0)) throw ConfigError("grid_size must be > 0");

    struct Bin {
        double sx{0.0}, sy{0.0};
        std::size_t count{0};
    };
    std::map<std::pair<long, long>, Bin> bins;
    for (const auto& cell : cells.cells) {
        const auto key = std::make_pair(static_cast<long>(std::floor(cell.centroid.x / grid_size)),
                                        static_cast<long>(std::floor(cell.centroid.y / grid_size)));
        Bin& b = bins[key];
        b.sx += cell.centroid.x;
        b.sy += cell.centroid.y;
        ++b.count;
    }

    CellTable out;
    out.modality = cells.modality;
    out.modality_name = cells.modality_name;
    out.pixel_size = cells.pixel_size;
    for (const auto& [key, b] : bins) {
        CellRecord sc;
        char buf[48];
        std::snprintf(buf, sizeof buf, "sc_%ld_%ld", key.first, key.second);
        sc.cell_id = buf;
        sc.centroid = {b.sx / static_cast<double>(b.count), b.sy / static_cast<double>(b.count)};
        sc.features["weight"] = static_cast<double>(b.count);
        out.cells.push_back(std::move(sc));
    }
    return out;
}

AlignmentResult align_large(const CellTable& source, const CellTable& target,
                            const AlignmentConfig& cfg, std::uint64_t seed) {
    if (!cfg.supercell) throw ConfigError("align_large requires supercell configuration");
    check_sizes(source, target, cfg);

    const CellTable sc_src = supercell_cluster(source, cfg.supercell->grid_size);
    const CellTable sc_tgt = supercell_cluster(target, cfg.supercell->grid_size);
    if (sc_src.cells.size() < 2 || sc_tgt.cells.size() < 2) {
        throw DegenerateConfiguration("supercell grid leaves fewer than 2 clusters");
    }
    auto weights_of = [](const CellTable& t) {
        std::vector<double> w;
        w.reserve(t.cells.size());
        for (const auto& c : t.cells) w.push_back(c.feature("weight").value_or(1.0));
        return w;
    };
    CpdConfig cpd_cfg = cfg.cpd;
    cpd_cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    CpdResult coarse =
        cpd_rigid_weighted(centroids(sc_src), weights_of(sc_src), centroids(sc_tgt),
                           weights_of(sc_tgt), cpd_cfg);

    // Grid super-cells sit near a lattice in each frame, which biases the
    // fitted translation toward grid-commensurate values. Polish on a small
    // downsample of the original centroids, pre-aligned by the super-cell
    // result, and compose; this restores sub-grid accuracy at a fraction of
    // the full-resolution cost.
    constexpr std::size_t kPolishCap = 2000;
    CpdConfig polish_cfg = cfg.cpd;
    polish_cfg.seed = seed;
    polish_cfg.max_points = polish_cfg.max_points
                                ? std::min(*polish_cfg.max_points, kPolishCap)
                                : kPolishCap;
    std::vector<Point2D> pre = centroids(source);
    for (auto& p : pre) p = apply(coarse.transform, p);
    const CpdResult polish = cpd_rigid(pre, centroids(target), polish_cfg);
    coarse.transform = rigid_part(
        compose(to_affine(polish.transform), to_affine(coarse.transform)));
    coarse.sigma2 = polish.sigma2;
    coarse.iterations += polish.iterations;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    return refine_from_coarse(source, target, cfg, seed, coarse, secs);
}

}  // namespace cellalign

// cellalign: cell-scale alignment of two segmentation exports.
// Subcommands map to workflow stages: synth, align, supercell, eval,
// concordance, plus rerun for replaying a recorded manifest.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <limits>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cellalign/csv.hpp"
#include "cellalign/errors.hpp"
#include "cellalign/evaluation.hpp"
#include "cellalign/fit.hpp"
#include "cellalign/io.hpp"
#include "cellalign/pipeline.hpp"
#include "cellalign/svg.hpp"
#include "cellalign/synth.hpp"
#include "cellalign/version.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace cellalign;

namespace {

std::string fnv1a_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::uint64_t h = 14695981039346656037ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char out[32];
    std::snprintf(out, sizeof out, "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::vector<std::string>& argv, std::uint64_t seed,
                    const ordered_json& config, const std::vector<std::string>& inputs) {
    ordered_json m;
    m["command"] = command;
    m["argv"] = argv;
    m["seed"] = seed;
    m["config"] = config;
    ordered_json digests;
    for (const auto& p : inputs) digests[p] = fnv1a_digest(p);
    m["inputs"] = digests;
    m["tool_version"] = kVersion;
    m["timestamp_utc"] = utc_now();
    write_text(m.dump(2) + "\n", (out_dir / "manifest.json").string());
}

// Per-side ingest options; pixel sizes usually differ between modalities.
struct TableArgs {
    std::string path;
    std::string unit{"um"};
    double pixel_size{1.0};
};

struct SchemaArgs {
    std::string id_col{"cell_id"};
    std::string x_col{"x"};
    std::string y_col{"y"};
    std::string class_col;
    std::vector<std::string> aliases;  // from=to

    SchemaConfig build(const TableArgs& table) const {
        SchemaConfig sc;
        sc.id_column = id_col;
        sc.x_column = x_col;
        sc.y_column = y_col;
        sc.class_column = class_col;
        sc.unit = table.unit;
        sc.pixel_size = table.pixel_size;
        for (const auto& a : aliases) {
            const auto eq = a.find('=');
            if (eq == std::string::npos) throw ConfigError("alias must be from=to: " + a);
            sc.feature_aliases[normalize_feature_name(a.substr(0, eq))] = a.substr(eq + 1);
        }
        return sc;
    }
};

void add_schema_flags(CLI::App* cmd, SchemaArgs& schema, TableArgs& src, TableArgs& tgt) {
    cmd->add_option("--id-col", schema.id_col, "cell id column");
    cmd->add_option("--x-col", schema.x_col, "x coordinate column");
    cmd->add_option("--y-col", schema.y_col, "y coordinate column");
    cmd->add_option("--class-col", schema.class_col, "class label column");
    cmd->add_option("--alias", schema.aliases, "feature alias from=to (repeatable)");
    cmd->add_option("--src-unit", src.unit, "source coordinate unit: um|px");
    cmd->add_option("--src-pixel-size", src.pixel_size, "source um per px");
    cmd->add_option("--tgt-unit", tgt.unit, "target coordinate unit: um|px");
    cmd->add_option("--tgt-pixel-size", tgt.pixel_size, "target um per px");
}

struct AlignArgs {
    TableArgs src, tgt;
    SchemaArgs schema;
    std::string out_dir;
    std::uint64_t seed{0};
    AlignmentConfig config;
    double theta_unused{0.0};
    std::size_t max_points{5000};
    double supercell_grid{100.0};
};

void add_align_flags(CLI::App* cmd, AlignArgs& a) {
    cmd->add_option("source", a.src.path, "source cell table CSV")->required();
    cmd->add_option("target", a.tgt.path, "target cell table CSV")->required();
    cmd->add_option("--out", a.out_dir, "output directory")->required();
    cmd->add_option("--seed", a.seed, "random seed");
    add_schema_flags(cmd, a.schema, a.src, a.tgt);
    cmd->add_option("--w", a.config.cpd.outlier_weight, "CPD outlier weight");
    cmd->add_option("--tolerance", a.config.cpd.tolerance, "CPD convergence tolerance");
    cmd->add_option("--max-iterations", a.config.cpd.max_iterations, "CPD max EM iterations");
    cmd->add_option("--max-points", a.max_points, "CPD downsample cap, 0 disables");
    cmd->add_option("--kde-bandwidth", a.config.kde_bandwidth, "KDE bandwidth um");
    cmd->add_option("--density-gate", a.config.density_gate, "density gate in (0,1]");
    cmd->add_option("--windows", a.config.window_count, "number of sampling windows");
    cmd->add_option("--src-window", a.config.src_window, "source window side um");
    cmd->add_option("--tgt-window", a.config.tgt_window, "target window side um");
    cmd->add_option("--edge-threshold", a.config.edge_threshold, "graph edge threshold um");
    cmd->add_option("--features", a.config.affinity.feature_names, "node feature names");
    cmd->add_option("--sigma-feature", a.config.affinity.sigma_feature, "node affinity sigma");
    cmd->add_option("--sigma-edge", a.config.affinity.sigma_edge, "edge affinity sigma um");
    cmd->add_option("--alpha", a.config.rrwm.alpha, "RRWM walk weight");
    cmd->add_option("--beta", a.config.rrwm.beta, "RRWM reweighting sharpness");
    cmd->add_option("--rrwm-max-iter", a.config.rrwm.max_iter, "RRWM iteration cap");
    cmd->add_option("--rrwm-tol", a.config.rrwm.tol, "RRWM convergence tolerance");
    cmd->add_option("--lpm-k", a.config.lpm_k, "LPM neighborhood size");
    cmd->add_option("--lpm-lambda", a.config.lpm_lambda, "LPM cost threshold factor");
    cmd->add_option("--score-floor", a.config.score_floor, "minimum match score");
    cmd->add_option("--min-pooled", a.config.min_pooled_matches, "matches needed for refinement");
    cmd->add_option("--min-cells", a.config.min_cells, "minimum cells per table");
}

ordered_json config_json(const AlignArgs& a) {
    ordered_json j;
    j["w"] = a.config.cpd.outlier_weight;
    j["tolerance"] = a.config.cpd.tolerance;
    j["max_iterations"] = a.config.cpd.max_iterations;
    j["max_points"] = a.max_points;
    j["kde_bandwidth"] = a.config.kde_bandwidth;
    j["density_gate"] = a.config.density_gate;
    j["windows"] = a.config.window_count;
    j["src_window"] = a.config.src_window;
    j["tgt_window"] = a.config.tgt_window;
    j["edge_threshold"] = a.config.edge_threshold;
    j["features"] = a.config.affinity.feature_names;
    j["sigma_feature"] = a.config.affinity.sigma_feature;
    j["sigma_edge"] = a.config.affinity.sigma_edge;
    j["alpha"] = a.config.rrwm.alpha;
    j["beta"] = a.config.rrwm.beta;
    j["rrwm_max_iter"] = a.config.rrwm.max_iter;
    j["rrwm_tol"] = a.config.rrwm.tol;
    j["lpm_k"] = a.config.lpm_k;
    j["lpm_lambda"] = a.config.lpm_lambda;
    j["score_floor"] = a.config.score_floor;
    j["min_pooled"] = a.config.min_pooled_matches;
    j["min_cells"] = a.config.min_cells;
    if (a.config.supercell) j["supercell_grid"] = a.config.supercell->grid_size;
    return j;
}

int run_align(AlignArgs& a, const std::vector<std::string>& argv, bool supercell_mode) {
    if (a.max_points == 0) a.config.cpd.max_points.reset();
    else a.config.cpd.max_points = a.max_points;
    if (supercell_mode) a.config.supercell = SupercellConfig{a.supercell_grid};

    const CellTable source = read_cell_table(a.src.path, a.schema.build(a.src));
    const CellTable target = read_cell_table(a.tgt.path, a.schema.build(a.tgt));

    const AlignmentResult result = supercell_mode
                                       ? align_large(source, target, a.config, a.seed)
                                       : align(source, target, a.config, a.seed);

    fs::create_directories(a.out_dir);
    const fs::path out(a.out_dir);
    write_transform(result.coarse, (out / "coarse.json").string());
    write_transform(result.refined, (out / "refined.json").string());
    write_matches(result.matches, (out / "matches.csv").string());

    ordered_json diag;
    diag["coarse_only"] = result.coarse_only;
    diag["cpd_iterations"] = result.diagnostics.cpd_iterations;
    diag["sigma2_um2"] = result.diagnostics.sigma2;
    diag["windows_used"] = result.diagnostics.windows_used;
    diag["matches_per_window"] = result.diagnostics.matches_per_window;
    diag["pooled_count"] = result.diagnostics.pooled_count;
    diag["lpm_survivors"] = result.matches.size();
    diag["low_confidence"] = result.matches.low_confidence;
    diag["fit_residual_rms_um"] = result.diagnostics.fit_residual_rms;
    write_text(diag.dump(2) + "\n", (out / "diagnostics.json").string());

    write_manifest(out, supercell_mode ? "supercell" : "align", argv, a.seed, config_json(a),
                   {a.src.path, a.tgt.path});
    return result.coarse_only ? 2 : 0;
}

struct SynthArgs {
    SynthScenario scenario;
    double theta_deg{0.0};
    std::string out_dir;
};

int run_synth(SynthArgs& s, const std::vector<std::string>& argv) {
    s.scenario.transform.theta = normalize_angle(s.theta_deg * std::numbers::pi / 180.0);
    const SynthOutput out = generate(s.scenario);

    fs::create_directories(s.out_dir);
    const fs::path dir(s.out_dir);
    write_cell_table(out.source, (dir / "source.csv").string());
    write_cell_table(out.target, (dir / "target.csv").string());
    MatchSet truth;
    for (const auto& [sid, tid] : out.truth_pairs) truth.matches.push_back({sid, tid, 1.0});
    write_matches(truth, (dir / "truth_matches.csv").string());
    write_transform(out.truth_transform, (dir / "truth_transform.json").string());

    ordered_json cfg;
    cfg["n"] = s.scenario.n_points;
    cfg["extent"] = s.scenario.extent;
    cfg["clusters"] = s.scenario.cluster_count;
    cfg["cluster_sigma"] = s.scenario.cluster_sigma;
    cfg["theta_deg"] = s.theta_deg;
    cfg["scale"] = s.scenario.transform.scale;
    cfg["dx"] = s.scenario.transform.dx;
    cfg["dy"] = s.scenario.transform.dy;
    cfg["jitter"] = s.scenario.jitter_sigma;
    cfg["dropout"] = s.scenario.dropout_rate;
    cfg["spurious"] = s.scenario.spurious_rate;
    cfg["feature_jitter"] = s.scenario.feature_jitter;
    write_manifest(dir, "synth", argv, s.scenario.seed, cfg, {});
    return 0;
}

struct EvalArgs {
    std::string landmarks_path;
    std::string estimated_path;
    std::string gt_path;
    std::string out_dir;
};

int run_eval(EvalArgs& e, const std::vector<std::string>& argv) {
    const LandmarkSet landmarks = read_landmarks(e.landmarks_path);

    RigidTransform gt;
    if (!e.gt_path.empty()) {
        gt = read_rigid(e.gt_path);
    } else {
        std::vector<Correspondence> pairs;
        for (const auto& p : landmarks.pairs) pairs.push_back({p.source, p.target, 1.0});
        gt = fit_rigid(pairs, /*estimate_scale=*/false);
    }

    EvaluationReport report;
    if (is_affine_json(e.estimated_path)) {
        report = evaluate(landmarks, read_affine(e.estimated_path), gt);
    } else {
        report = evaluate(landmarks, read_rigid(e.estimated_path), gt);
    }

    const std::string json = to_json(report);
    std::cout << json;
    if (!e.out_dir.empty()) {
        fs::create_directories(e.out_dir);
        write_text(json, (fs::path(e.out_dir) / "report.json").string());
        ordered_json cfg;
        cfg["gt"] = e.gt_path.empty() ? "fitted from landmarks" : e.gt_path;
        std::vector<std::string> inputs{e.landmarks_path, e.estimated_path};
        if (!e.gt_path.empty()) inputs.push_back(e.gt_path);
        write_manifest(e.out_dir, "eval", argv, 0, cfg, inputs);
    }
    return 0;
}

struct ConcordanceArgs {
    TableArgs src, tgt;
    SchemaArgs schema;
    std::string transform_path;
    std::string out_dir;
    double radius{-1.0};  // <0: half median target NN distance; 0: unbounded
    std::vector<std::string> features;
    double regional_grid{0.0};  // >0 enables regional analysis
    std::string positive_label;
};

int run_concordance(ConcordanceArgs& c, const std::vector<std::string>& argv) {
    CellTable source = read_cell_table(c.src.path, c.schema.build(c.src));
    const CellTable target = read_cell_table(c.tgt.path, c.schema.build(c.tgt));

    const bool affine = is_affine_json(c.transform_path);
    const AffineTransform t = affine ? read_affine(c.transform_path)
                                     : to_affine(read_rigid(c.transform_path));
    for (auto& cell : source.cells) cell.centroid = apply(t, cell.centroid);

    double radius = c.radius;
    if (radius < 0.0) radius = default_pairing_radius(target);
    else if (radius == 0.0) radius = std::numeric_limits<double>::infinity();

    const NearestPairing pairing = nearest_pairing(source, target, radius);

    std::vector<std::string> features = c.features;
    if (features.empty()) {
        std::set<std::string> src_names, shared;
        for (const auto& cell : source.cells) {
            for (const auto& [k, v] : cell.features) src_names.insert(k);
        }
        for (const auto& cell : target.cells) {
            for (const auto& [k, v] : cell.features) {
                if (src_names.count(k)) shared.insert(k);
            }
        }
        features.assign(shared.begin(), shared.end());
    }

    fs::create_directories(c.out_dir);
    const fs::path out(c.out_dir);
    ordered_json report;
    ordered_json per_feature;
    for (const auto& name : features) {
        std::vector<double> xs, ys;
        for (const auto& [si, ti] : pairing.unique_pairs) {
            const auto a = source.cells[si].feature(name);
            const auto b = target.cells[ti].feature(name);
            if (a && b) {
                xs.push_back(*a);
                ys.push_back(*b);
            }
        }
        ordered_json f;
        f["n"] = xs.size();
        if (xs.size() >= 3) {
            try {
                const PearsonResult pr = pearson(xs, ys);
                f["r"] = pr.r;
                f["p"] = pr.p;
            } catch (const UndefinedCorrelation&) {
                f["r"] = nullptr;
                f["p"] = nullptr;
            }
            std::string scatter = csv::join_row({"src_" + name, "tgt_" + name});
            for (std::size_t i = 0; i < xs.size(); ++i) {
                scatter += csv::join_row({csv::format_double(xs[i]), csv::format_double(ys[i])});
            }
            write_text(scatter, (out / ("scatter_" + name + ".csv")).string());
            write_text(scatter_svg(xs, ys, name), (out / ("scatter_" + name + ".svg")).string());
        }
        per_feature[name] = f;
    }
    report["features"] = per_feature;
    ordered_json census;
    census["n0"] = pairing.n0;
    census["n1"] = pairing.n1;
    census["n_multi"] = pairing.n_multi;
    report["census"] = census;
    report["radius_um"] = std::isinf(radius) ? ordered_json() : ordered_json(radius);

    if (c.regional_grid > 0.0) {
        if (c.positive_label.empty()) throw ConfigError("--regional-grid requires --label");
        const ProportionGrid pa =
            regional_composition(source, c.regional_grid, c.positive_label);
        const ProportionGrid pb =
            regional_composition(target, c.regional_grid, c.positive_label);
        const ConcordanceGrid sim = regional_concordance(pa, pb);
        std::string rows = csv::join_row({"bin_x", "bin_y", "similarity"});
        for (const auto& [bin, v] : sim.similarity) {
            rows += csv::join_row({std::to_string(bin.first), std::to_string(bin.second),
                                   csv::format_double(v)});
        }
        write_text(rows, (out / "heatmap.csv").string());
        write_text(heatmap_svg(sim, "regional concordance"), (out / "heatmap.svg").string());
        double mean = 0.0;
        for (const auto& [bin, v] : sim.similarity) mean += v;
        report["regional_mean_similarity"] =
            sim.similarity.empty() ? 0.0 : mean / static_cast<double>(sim.similarity.size());
    }

    write_text(report.dump(2) + "\n", (out / "concordance.json").string());
    ordered_json cfg;
    cfg["radius"] = c.radius;
    cfg["features"] = features;
    cfg["regional_grid"] = c.regional_grid;
    cfg["label"] = c.positive_label;
    write_manifest(out, "concordance", argv, 0, cfg,
                   {c.src.path, c.tgt.path, c.transform_path});
    return 0;
}

int run(const std::vector<std::string>& argv);

int run_rerun(const std::string& manifest_path, const std::string& new_out) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open " + manifest_path);
    ordered_json m = ordered_json::parse(in);
    if (!m.contains("argv") || !m["argv"].is_array()) {
        throw SchemaError(manifest_path + ": manifest has no argv");
    }
    std::vector<std::string> argv = m["argv"].get<std::vector<std::string>>();
    if (!new_out.empty()) {
        for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
            if (argv[i] == "--out") argv[i + 1] = new_out;
        }
    }
    return run(argv);
}

int run(const std::vector<std::string>& argv) {
    CLI::App app{"cell-scale alignment of segmentation exports"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    AlignArgs align_args;
    auto* align_cmd = app.add_subcommand("align", "CPD + graph matching alignment");
    add_align_flags(align_cmd, align_args);

    AlignArgs super_args;
    auto* super_cmd = app.add_subcommand("supercell", "alignment with super-cell CPD stage");
    add_align_flags(super_cmd, super_args);
    super_cmd->add_option("--grid", super_args.supercell_grid, "super-cell grid size um");

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "synthetic scenario generator");
    synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth_cmd->add_option("--seed", synth_args.scenario.seed, "random seed");
    synth_cmd->add_option("--n", synth_args.scenario.n_points, "number of source cells");
    synth_cmd->add_option("--extent", synth_args.scenario.extent, "square extent um");
    synth_cmd->add_option("--clusters", synth_args.scenario.cluster_count,
                          "cluster count, 0 = uniform");
    synth_cmd->add_option("--cluster-sigma", synth_args.scenario.cluster_sigma,
                          "cluster spread um");
    synth_cmd->add_option("--theta-deg", synth_args.theta_deg, "rotation degrees");
    synth_cmd->add_option("--scale", synth_args.scenario.transform.scale, "scale factor");
    synth_cmd->add_option("--dx", synth_args.scenario.transform.dx, "x translation um");
    synth_cmd->add_option("--dy", synth_args.scenario.transform.dy, "y translation um");
    synth_cmd->add_option("--jitter", synth_args.scenario.jitter_sigma, "position jitter um");
    synth_cmd->add_option("--dropout", synth_args.scenario.dropout_rate, "dropout fraction");
    synth_cmd->add_option("--spurious", synth_args.scenario.spurious_rate,
                          "spurious cells per source cell");
    synth_cmd->add_option("--feature-jitter", synth_args.scenario.feature_jitter,
                          "feature noise sigma");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "landmark accuracy metrics");
    eval_cmd->add_option("landmarks", eval_args.landmarks_path, "landmark CSV")->required();
    eval_cmd->add_option("estimated", eval_args.estimated_path, "estimated transform JSON")
        ->required();
    eval_cmd->add_option("--gt", eval_args.gt_path,
                         "ground-truth rigid JSON (default: fit from landmarks)");
    eval_cmd->add_option("--out", eval_args.out_dir, "output directory");

    ConcordanceArgs conc_args;
    auto* conc_cmd = app.add_subcommand("concordance", "cross-modality feature concordance");
    conc_cmd->add_option("source", conc_args.src.path, "source cell table CSV")->required();
    conc_cmd->add_option("target", conc_args.tgt.path, "target cell table CSV")->required();
    conc_cmd->add_option("transform", conc_args.transform_path, "transform JSON")->required();
    conc_cmd->add_option("--out", conc_args.out_dir, "output directory")->required();
    add_schema_flags(conc_cmd, conc_args.schema, conc_args.src, conc_args.tgt);
    conc_cmd->add_option("--radius", conc_args.radius,
                         "pairing radius um; 0 = unbounded, default half median NN");
    conc_cmd->add_option("--features", conc_args.features, "features to compare");
    conc_cmd->add_option("--regional-grid", conc_args.regional_grid,
                         "regional grid size um (enables regional analysis)");
    conc_cmd->add_option("--label", conc_args.positive_label, "positive class label");

    std::string rerun_manifest, rerun_out;
    auto* rerun_cmd = app.add_subcommand("rerun", "replay a recorded manifest");
    rerun_cmd->add_option("manifest", rerun_manifest, "manifest.json path")->required();
    rerun_cmd->add_option("--out", rerun_out, "override output directory");

    std::vector<std::string> cli_args(argv.rbegin(), argv.rend());
    try {
        app.parse(cli_args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    if (align_cmd->parsed()) return run_align(align_args, argv, false);
    if (super_cmd->parsed()) return run_align(super_args, argv, true);
    if (synth_cmd->parsed()) return run_synth(synth_args, argv);
    if (eval_cmd->parsed()) return run_eval(eval_args, argv);
    if (conc_cmd->parsed()) return run_concordance(conc_args, argv);
    if (rerun_cmd->parsed()) return run_rerun(rerun_manifest, rerun_out);
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run(args);
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

#include "cellalign/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cellalign/csv.hpp"

namespace cellalign {

namespace {

using ordered_json = nlohmann::ordered_json;

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) return false;
    while (*end != '\0') {
        if (!std::isspace(static_cast<unsigned char>(*end))) return false;
        ++end;
    }
    return true;
}

ordered_json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    try {
        return ordered_json::parse(in);
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

double require_number(const ordered_json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key) || !j[key].is_number()) {
        throw SchemaError(path + ": missing numeric field \"" + key + "\"");
    }
    return j[key].get<double>();
}

}  // namespace

std::string normalize_feature_name(const std::string& raw) {
    std::string out;
    bool pending_sep = false;
    for (char ch : raw) {
        const unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            if (pending_sep && !out.empty()) out.push_back('_');
            pending_sep = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        } else {
            pending_sep = true;
        }
    }
    return out;
}

CellTable read_cell_table(const std::string& path, const SchemaConfig& schema,
                          std::vector<IngestIssue>* issues) {
    const auto rows = csv::parse_file(path);
    if (rows.empty()) throw SchemaError(path + ": empty file");

    const bool from_px = schema.unit == "px";
    if (schema.unit != "um" && schema.unit != "px") {
        throw ConfigError("unit must be \"um\" or \"px\", got \"" + schema.unit + "\"");
    }
    if (from_px && !(schema.pixel_size > 0.0)) {
        throw InvalidPixelSize("pixel_size must be > 0 for px input");
    }

    std::vector<std::string> header;
    header.reserve(rows[0].size());
    for (const auto& h : rows[0]) header.push_back(normalize_feature_name(h));

    auto find_col = [&](const std::string& name) -> long {
        const std::string want = normalize_feature_name(name);
        auto it = std::find(header.begin(), header.end(), want);
        return it == header.end() ? -1 : it - header.begin();
    };

    const long id_col = find_col(schema.id_column);
    const long x_col = find_col(schema.x_column);
    const long y_col = find_col(schema.y_column);
    if (id_col < 0) throw SchemaError(path + ": missing column " + schema.id_column);
    if (x_col < 0) throw SchemaError(path + ": missing column " + schema.x_column);
    if (y_col < 0) throw SchemaError(path + ": missing column " + schema.y_column);
    long class_col = -1;
    if (!schema.class_column.empty()) {
        class_col = find_col(schema.class_column);
        if (class_col < 0) throw SchemaError(path + ": missing column " + schema.class_column);
    }

    // Remaining columns become features, renamed through the alias map.
    std::vector<std::pair<std::size_t, std::string>> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const long lc = static_cast<long>(c);
        if (lc == id_col || lc == x_col || lc == y_col || lc == class_col) continue;
        std::string name = header[c];
        if (auto it = schema.feature_aliases.find(name); it != schema.feature_aliases.end()) {
            name = it->second;
        }
        if (!name.empty()) feature_cols.emplace_back(c, name);
    }

    CellTable table;
    table.modality = schema.modality;
    table.modality_name = schema.modality_name;
    table.pixel_size = from_px ? schema.pixel_size : 1.0;

    std::set<std::string> seen_ids;
    // Generic on the error type: throwing through a base reference would
    // slice the exception and break catch-by-concrete-type.
    auto fail = [&](std::size_t line, auto err) {
        if (schema.strict || issues == nullptr) throw err;
        issues->push_back({line, err.what()});
    };

    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::size_t line = r + 1;
        if (row.size() != header.size()) {
            fail(line, ParseError(path + " line " + std::to_string(line) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(row.size())));
            continue;
        }
        CellRecord cell;
        cell.cell_id = row[id_col];
        if (cell.cell_id.empty()) {
            fail(line, ParseError(path + " line " + std::to_string(line) + ": empty cell id"));
            continue;
        }
        double x = 0.0, y = 0.0;
        if (!parse_number(row[x_col], x) || !parse_number(row[y_col], y) ||
            !std::isfinite(x) || !std::isfinite(y)) {
            fail(line, ParseError(path + " line " + std::to_string(line) +
                                  ": non-numeric coordinate"));
            continue;
        }
        cell.centroid = from_px ? px_to_um({x, y}, schema.pixel_size) : Point2D{x, y};
        if (!seen_ids.insert(cell.cell_id).second) {
            fail(line, DuplicateId(cell.cell_id));
            continue;
        }
        if (class_col >= 0 && !row[class_col].empty()) cell.class_label = row[class_col];
        bool bad = false;
        for (const auto& [c, name] : feature_cols) {
            double v = 0.0;
            if (!parse_number(row[c], v)) continue;  // best effort for extras
            if (name == "solidity" && !(v > 0.0 && v <= 1.0)) {
                fail(line, ParseError(path + " line " + std::to_string(line) +
                                      ": solidity out of (0, 1]"));
                bad = true;
                break;
            }
            if ((name == "area" || name == "perimeter" || name == "min_diameter" ||
                 name == "max_diameter") && !(v > 0.0)) {
                fail(line, ParseError(path + " line " + std::to_string(line) + ": " + name +
                                      " must be > 0"));
                bad = true;
                break;
            }
            cell.features[name] = v;
        }
        if (bad) {
            seen_ids.erase(cell.cell_id);
            continue;
        }
        table.cells.push_back(std::move(cell));
    }
    if (table.cells.empty()) throw EmptyInput(path + ": no valid cells");
    return table;
}

void write_cell_table(const CellTable& table, const std::string& path) {
    std::set<std::string> feature_names;
    bool any_label = false;
    for (const auto& c : table.cells) {
        for (const auto& [k, v] : c.features) feature_names.insert(k);
        any_label |= c.class_label.has_value();
    }
    std::string out;
    std::vector<std::string> head{"cell_id", "x", "y"};
    head.insert(head.end(), feature_names.begin(), feature_names.end());
    if (any_label) head.push_back("class");
    out += csv::join_row(head);
    std::vector<std::string> row;
    for (const auto& c : table.cells) {
        row.clear();
        row.push_back(c.cell_id);
        row.push_back(csv::format_double(c.centroid.x));
        row.push_back(csv::format_double(c.centroid.y));
        for (const auto& name : feature_names) {
            auto v = c.feature(name);
            row.push_back(v ? csv::format_double(*v) : std::string{});
        }
        if (any_label) row.push_back(c.class_label.value_or(""));
        out += csv::join_row(row);
    }
    write_text(out, path);
}

LandmarkSet read_landmarks(const std::string& path) {
    const auto rows = csv::parse_file(path);
    if (rows.empty()) throw SchemaError(path + ": empty file");
    std::vector<std::string> header;
    for (const auto& h : rows[0]) header.push_back(normalize_feature_name(h));
    auto col = [&](const char* name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError(path + ": missing column " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto sx = col("src_x"), sy = col("src_y"), tx = col("tgt_x"), ty = col("tgt_y");
    LandmarkSet set;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != header.size()) {
            throw ParseError(path + " line " + std::to_string(r + 1) + ": wrong field count");
        }
        LandmarkPair p;
        if (!parse_number(row[sx], p.source.x) || !parse_number(row[sy], p.source.y) ||
            !parse_number(row[tx], p.target.x) || !parse_number(row[ty], p.target.y)) {
            throw ParseError(path + " line " + std::to_string(r + 1) + ": non-numeric value");
        }
        set.pairs.push_back(p);
    }
    if (set.pairs.size() < 2) {
        throw TooFewLandmarks("need at least 2 landmark pairs, got " +
                              std::to_string(set.pairs.size()));
    }
    return set;
}

void write_landmarks(const LandmarkSet& landmarks, const std::string& path) {
    std::string out = csv::join_row({"src_x", "src_y", "tgt_x", "tgt_y"});
    for (const auto& p : landmarks.pairs) {
        out += csv::join_row({csv::format_double(p.source.x), csv::format_double(p.source.y),
                              csv::format_double(p.target.x), csv::format_double(p.target.y)});
    }
    write_text(out, path);
}

void write_matches(const MatchSet& matches, const std::string& path) {
    std::string out = csv::join_row({"src_id", "tgt_id", "score"});
    for (const auto& m : matches.matches) {
        out += csv::join_row({m.src_id, m.tgt_id, csv::format_double(m.score)});
    }
    write_text(out, path);
}

MatchSet read_matches(const std::string& path) {
    const auto rows = csv::parse_file(path);
    if (rows.empty() || rows[0].size() < 3) throw SchemaError(path + ": bad matches header");
    MatchSet set;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        Match m;
        m.src_id = rows[r][0];
        m.tgt_id = rows[r][1];
        if (!parse_number(rows[r][2], m.score)) {
            throw ParseError(path + " line " + std::to_string(r + 1) + ": bad score");
        }
        set.matches.push_back(std::move(m));
    }
    return set;
}

std::string to_json(const RigidTransform& t) {
    ordered_json j;
    j["theta_rad"] = t.theta;
    j["scale"] = t.scale;
    j["dx_um"] = t.dx;
    j["dy_um"] = t.dy;
    return j.dump(2) + "\n";
}

std::string to_json(const AffineTransform& t) {
    ordered_json j;
    j["a11"] = t.a11;
    j["a12"] = t.a12;
    j["a21"] = t.a21;
    j["a22"] = t.a22;
    j["tx_um"] = t.tx;
    j["ty_um"] = t.ty;
    return j.dump(2) + "\n";
}

void write_transform(const RigidTransform& t, const std::string& path) {
    write_text(to_json(t), path);
}

void write_transform(const AffineTransform& t, const std::string& path) {
    write_text(to_json(t), path);
}

RigidTransform read_rigid(const std::string& path) {
    const auto j = load_json(path);
    return make_rigid(require_number(j, "theta_rad", path), require_number(j, "scale", path),
                      require_number(j, "dx_um", path), require_number(j, "dy_um", path));
}

AffineTransform read_affine(const std::string& path) {
    const auto j = load_json(path);
    return AffineTransform{require_number(j, "a11", path), require_number(j, "a12", path),
                           require_number(j, "a21", path), require_number(j, "a22", path),
                           require_number(j, "tx_um", path), require_number(j, "ty_um", path)};
}

bool is_affine_json(const std::string& path) {
    return load_json(path).contains("a11");
}

std::string to_json(const EvaluationReport& report) {
    ordered_json j;
    j["delta_d_um"] = report.delta_d;
    j["delta_t_um"] = report.delta_t;
    j["delta_theta_rad"] = report.delta_theta;
    j["delta_theta_deg"] = report.delta_theta * 180.0 / std::numbers::pi;
    auto arr = ordered_json::array();
    for (const auto& lm : report.per_landmark) {
        ordered_json e;
        e["d_gt_um"] = lm.d_gt;
        e["d_est_um"] = lm.d_est;
        arr.push_back(e);
    }
    j["per_landmark"] = arr;
    return j.dump(2) + "\n";
}

void write_report(const EvaluationReport& report, const std::string& path) {
    write_text(to_json(report), path);
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace cellalign

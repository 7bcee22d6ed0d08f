#pragma once

#include <map>
#include <string>
#include <vector>

#include "cellalign/cell_table.hpp"
#include "cellalign/evaluation.hpp"
#include "cellalign/match_set.hpp"

namespace cellalign {

// Maps a segmentation export onto CellTable fields. Column names are
// matched after lower_snake_case normalization, so "Cell ID" == "cell_id".
struct SchemaConfig {
    std::string id_column{"cell_id"};
    std::string x_column{"x"};
    std::string y_column{"y"};
    std::string class_column;       // optional
    std::string unit{"um"};        // "um" or "px"
    double pixel_size{1.0};         // um/px, applied when unit == "px"
    // feature alias: normalized source header -> canonical feature name,
    // e.g. "nucleus_dapi_mean" -> "nucleus_stain_mean".
    std::map<std::string, std::string> feature_aliases;
    Modality modality{Modality::Other};
    std::string modality_name;
    bool strict{true};  // abort on first bad row vs. collect and skip
};

struct IngestIssue {
    std::size_t line;  // 1-based line in the file
    std::string message;
};

// Lowercase, non-alphanumerics collapsed to single underscores.
std::string normalize_feature_name(const std::string& raw);

// Unknown columns become features; rows failing validation throw in strict
// mode, otherwise are skipped and reported through `issues`.
CellTable read_cell_table(const std::string& path, const SchemaConfig& schema,
                          std::vector<IngestIssue>* issues = nullptr);

void write_cell_table(const CellTable& table, const std::string& path);

// CSV columns src_x,src_y,tgt_x,tgt_y in um.
LandmarkSet read_landmarks(const std::string& path);
void write_landmarks(const LandmarkSet& landmarks, const std::string& path);

// CSV with header src_id,tgt_id,score; byte-stable for identical input.
void write_matches(const MatchSet& matches, const std::string& path);
MatchSet read_matches(const std::string& path);

// Transform JSON; field names are part of the contract.
// rigid: {"theta_rad","scale","dx_um","dy_um"}
// affine: {"a11","a12","a21","a22","tx_um","ty_um"}
std::string to_json(const RigidTransform& t);
std::string to_json(const AffineTransform& t);
void write_transform(const RigidTransform& t, const std::string& path);
void write_transform(const AffineTransform& t, const std::string& path);
RigidTransform read_rigid(const std::string& path);
AffineTransform read_affine(const std::string& path);
bool is_affine_json(const std::string& path);

std::string to_json(const EvaluationReport& report);
void write_report(const EvaluationReport& report, const std::string& path);

void write_text(const std::string& text, const std::string& path);

}  // namespace cellalign

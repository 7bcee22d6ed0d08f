#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cellalign/geometry.hpp"

namespace cellalign {

struct CellRecord {
    std::string cell_id;
    Point2D centroid;  // um
    std::map<std::string, double> features;
    std::optional<std::string> class_label;

    std::optional<double> feature(const std::string& name) const {
        auto it = features.find(name);
        if (it == features.end()) return std::nullopt;
        return it->second;
    }
};

enum class Modality { MxIF, HE, Other };

struct CellTable {
    Modality modality{Modality::Other};
    std::string modality_name;  // set when modality == Other
    double pixel_size{1.0};     // um/px as recorded at ingest
    std::vector<CellRecord> cells;
};

struct LandmarkPair {
    Point2D source;
    Point2D target;
};

struct LandmarkSet {
    std::vector<LandmarkPair> pairs;
};

}  // namespace cellalign

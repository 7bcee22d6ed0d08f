#pragma once

#include <span>
#include <string>

#include "cellalign/evaluation.hpp"

namespace cellalign {

// Minimal standalone SVG renderings for quick inspection; not styled for
// publication.
std::string scatter_svg(std::span<const double> x, std::span<const double> y,
                        const std::string& title);

std::string heatmap_svg(const ConcordanceGrid& grid, const std::string& title);

}  // namespace cellalign

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "lsim/layout.hpp"
#include "lsim/model.hpp"

namespace lsim {

enum class TransferMethod : uint8_t { Attention, PixelOverlap };

struct Assignment {
    std::string target_id;
    int32_t target_index = 0;
    std::string source_id;
    int32_t source_index = 0;
    int32_t label = 0;       // category copied from the source element
    double score = 0.0;      // attention weight or overlap/target-area
    bool zero_overlap = false;  // pixel method only: fell back to nearest center
};

struct Matching {
    TransferMethod method = TransferMethod::Attention;
    std::vector<Assignment> assignments;  // one per target element, in order
};

// Matches every target element to the source element with the largest
// final-round attention weight, with semantics masked on both graphs so the
// model sees geometry only. round selects an earlier propagation round
// (0-based); -1 means the final round. Ties go to the lower source index.
Matching attention_match(const Layout& source, const Layout& target, const ModelParams& p,
                         GraphMode mode = GraphMode::FullyConnected, double adjacency_eps = 0.02,
                         int32_t round = -1);

// Baseline: the source element with the largest rasterized overlap with each
// target element (category-agnostic). Targets overlapping nothing fall back
// to the nearest source center and are flagged.
Matching pixel_overlap_match(const Layout& source, const Layout& target, int32_t resolution);

// Fraction of assignments whose transferred label equals the target
// element's own category.
double transfer_accuracy(const Matching& m, const Layout& target);

nlohmann::json matching_to_json(const Matching& m);

// Side-by-side SVG of source and target with transferred labels.
std::string transfer_svg(const Layout& source, const Layout& target, const Matching& m);

}  // namespace lsim

#pragma once

#include <cstdint>
#include <vector>

#include "lsim/layout.hpp"

namespace lsim {

enum class SynthProfile : uint8_t { Floorplan, Ui };

// Seeded synthetic layouts. Floorplan: 256x256 canvas, 9 categories, 2-8
// rooms tiling the square via recursive splits. Ui: 360x640 canvas, 25
// categories, bar/row/grid structure, 3-30 elements. Output is organized in
// clusters (a base plus jittered or shifted variants) so high-IoU pairs
// exist for triplet mining.
std::vector<Layout> synth_generate(int32_t n, uint64_t seed, SynthProfile profile);

}  // namespace lsim

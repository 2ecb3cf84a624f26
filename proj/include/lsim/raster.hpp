#pragma once

#include <cstdint>
#include <vector>

#include "lsim/layout.hpp"

namespace lsim {

enum class IouMode : uint8_t { Micro, Macro };

// One bit per grid cell per category channel. A cell is set when its center
// point falls inside (or on the boundary of) some element of that category.
struct MultiChannelMask {
    int32_t resolution = 0;
    int32_t categories = 0;
    std::vector<uint64_t> bits;  // categories * words_per_channel

    int64_t words_per_channel() const {
        return (int64_t(resolution) * resolution + 63) / 64;
    }
    bool get(int32_t ch, int32_t row, int32_t col) const {
        const int64_t cell = int64_t(row) * resolution + col;
        return (bits[ch * words_per_channel() + cell / 64] >> (cell % 64)) & 1u;
    }
    int64_t count(int32_t ch) const;
};

MultiChannelMask rasterize(const Layout& l, int32_t resolution);

// Micro: total intersection over total union across channels. Macro: mean of
// per-channel IoU over channels whose union is non-empty. Both are 0 when
// every union is empty.
double iou_from_masks(const MultiChannelMask& a, const MultiChannelMask& b, IouMode mode);
double layout_iou(const Layout& a, const Layout& b, int32_t resolution, IouMode mode);

// Shared point-in-box predicate (closed box, boundary cells count).
inline bool point_in_box(double px, double py, const Element& e) {
    return px >= e.x - e.w / 2 && px <= e.x + e.w / 2 && py >= e.y - e.h / 2 &&
           py <= e.y + e.h / 2;
}

}  // namespace lsim

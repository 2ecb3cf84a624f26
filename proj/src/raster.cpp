#include "lsim/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "lsim/common.hpp"

namespace lsim {

int64_t MultiChannelMask::count(int32_t ch) const {
    const int64_t wpc = words_per_channel();
    int64_t n = 0;
    for (int64_t w = 0; w < wpc; ++w) n += std::popcount(bits[ch * wpc + w]);
    return n;
}

MultiChannelMask rasterize(const Layout& l, int32_t resolution) {
    if (resolution < 1) throw DimError("rasterize: resolution must be >= 1");
    MultiChannelMask m;
    m.resolution = resolution;
    m.categories = l.categories;
    m.bits.assign(int64_t(l.categories) * m.words_per_channel(), 0);
    const int64_t wpc = m.words_per_channel();
    const double cw = l.width / resolution, chh = l.height / resolution;
    for (const Element& e : l.elements) {
        // Conservative cell range, then the exact center test per cell.
        int32_t c_lo = std::max<int32_t>(0, int32_t(std::floor(e.x0() / cw)) - 1);
        int32_t c_hi = std::min<int32_t>(resolution - 1, int32_t(std::ceil(e.x1() / cw)) + 1);
        int32_t r_lo = std::max<int32_t>(0, int32_t(std::floor(e.y0() / chh)) - 1);
        int32_t r_hi = std::min<int32_t>(resolution - 1, int32_t(std::ceil(e.y1() / chh)) + 1);
        uint64_t* ch_bits = m.bits.data() + e.category * wpc;
        for (int32_t r = r_lo; r <= r_hi; ++r) {
            const double py = (r + 0.5) * chh;
            for (int32_t c = c_lo; c <= c_hi; ++c) {
                const double px = (c + 0.5) * cw;
                if (point_in_box(px, py, e)) {
                    const int64_t cell = int64_t(r) * resolution + c;
                    ch_bits[cell / 64] |= uint64_t(1) << (cell % 64);
                }
            }
        }
    }
    return m;
}

double iou_from_masks(const MultiChannelMask& a, const MultiChannelMask& b, IouMode mode) {
    if (a.categories != b.categories)
        throw DimError("iou: category count mismatch (" + std::to_string(a.categories) + " vs " +
                       std::to_string(b.categories) + ")");
    if (a.resolution != b.resolution) throw DimError("iou: resolution mismatch");
    const int64_t wpc = a.words_per_channel();
    if (mode == IouMode::Micro) {
        int64_t inter = 0, uni = 0;
        for (size_t w = 0; w < a.bits.size(); ++w) {
            inter += std::popcount(a.bits[w] & b.bits[w]);
            uni += std::popcount(a.bits[w] | b.bits[w]);
        }
        return uni == 0 ? 0.0 : double(inter) / double(uni);
    }
    double sum = 0.0;
    int64_t nonempty = 0;
    for (int32_t ch = 0; ch < a.categories; ++ch) {
        int64_t inter = 0, uni = 0;
        for (int64_t w = 0; w < wpc; ++w) {
            inter += std::popcount(a.bits[ch * wpc + w] & b.bits[ch * wpc + w]);
            uni += std::popcount(a.bits[ch * wpc + w] | b.bits[ch * wpc + w]);
        }
        if (uni > 0) {
            sum += double(inter) / double(uni);
            ++nonempty;
        }
    }
    return nonempty == 0 ? 0.0 : sum / double(nonempty);
}

double layout_iou(const Layout& a, const Layout& b, int32_t resolution, IouMode mode) {
    return iou_from_masks(rasterize(a, resolution), rasterize(b, resolution), mode);
}

}  // namespace lsim

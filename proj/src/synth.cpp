#include "lsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "lsim/common.hpp"
#include "lsim/rng.hpp"

namespace lsim {

namespace {

struct Region {
    double x0, y0, x1, y1;
    double w() const { return x1 - x0; }
    double h() const { return y1 - y0; }
    double area() const { return w() * h(); }
};

// Keep rooms comfortably larger than the raster cell and any jitter the
// variants apply, so near-copies stay unambiguous.
constexpr double kMinSplitSide = 20.0;
constexpr double kRoomInset = 2.0;

// Variant perturbations are sized to spread within-cluster overlaps across
// a band around the mining threshold, so clusters yield easy positives,
// near-threshold positives, and hard same-cluster negatives alike.
constexpr double kJitterCenter = 0.04;
constexpr double kJitterSize = 0.08;
// Shift stays below the smallest room extent so no box leaves the canvas.
constexpr double kShiftLo = 0.03, kShiftHi = 0.05;

void clamp_into(Element& e, double W, double H) {
    double lo = std::max(0.0, e.x0()), hi = std::min(W, e.x1());
    e.x = (lo + hi) / 2;
    e.w = hi - lo;
    lo = std::max(0.0, e.y0());
    hi = std::min(H, e.y1());
    e.y = (lo + hi) / 2;
    e.h = hi - lo;
    if (!(e.w > 0) || !(e.h > 0)) throw DataError("synth: element clamped away entirely");
}

Layout floorplan_base(Rng& rng) {
    Layout l;
    l.width = 256;
    l.height = 256;
    l.categories = 9;
    const int32_t rooms = 2 + int32_t(rng.uniform_int(7));  // 2..8
    std::vector<Region> regions{{0, 0, l.width, l.height}};
    while (int32_t(regions.size()) < rooms) {
        size_t best = regions.size();
        double best_area = -1;
        for (size_t i = 0; i < regions.size(); ++i) {
            const Region& r = regions[i];
            if (std::max(r.w(), r.h()) * 0.35 < kMinSplitSide) continue;
            if (r.area() > best_area) {
                best_area = r.area();
                best = i;
            }
        }
        if (best == regions.size()) break;  // nothing splittable left
        Region r = regions[best];
        const double f = rng.uniform(0.35, 0.65);
        Region a = r, b = r;
        if (r.w() >= r.h()) {
            a.x1 = b.x0 = r.x0 + f * r.w();
        } else {
            a.y1 = b.y0 = r.y0 + f * r.h();
        }
        regions[best] = a;
        regions.push_back(b);
    }
    for (size_t i = 0; i < regions.size(); ++i) {
        const Region& r = regions[i];
        Element e;
        e.id = "e" + std::to_string(i);
        e.category = int32_t(rng.uniform_int(9));
        e.x = (r.x0 + r.x1) / 2;
        e.y = (r.y0 + r.y1) / 2;
        e.w = r.w() - 2 * kRoomInset;
        e.h = r.h() - 2 * kRoomInset;
        l.elements.push_back(std::move(e));
    }
    return l;
}

Layout ui_base(Rng& rng) {
    Layout l;
    l.width = 360;
    l.height = 640;
    l.categories = 25;
    int32_t next = 0;
    auto add = [&](int32_t cat, double x, double y, double w, double h) {
        l.elements.push_back({"e" + std::to_string(next++), cat, x, y, w, h});
    };
    add(0, l.width / 2, 26, l.width - 16, 40);  // top bar
    const bool bottom = rng.next_double() < 0.5;
    if (bottom) add(1, l.width / 2, l.height - 26, l.width - 16, 40);
    const double top = 56, bot = l.height - (bottom ? 56 : 8);
    const int32_t nrows = 2 + int32_t(rng.uniform_int(5));  // 2..6
    const double row_h = (bot - top) / nrows;
    for (int32_t r = 0; r < nrows; ++r) {
        const int32_t cols = 1 + int32_t(rng.uniform_int(3));  // 1..3
        const double col_w = (l.width - 16.0) / cols;
        for (int32_t c = 0; c < cols; ++c) {
            const int32_t cat = 2 + int32_t(rng.uniform_int(23));
            add(cat, 8 + col_w * c + col_w / 2, top + row_h * r + row_h / 2, col_w - 8,
                row_h - 8);
        }
    }
    return l;
}

Layout make_variant(const Layout& base, Rng& rng) {
    Layout v = base;
    if (rng.next_double() < 0.7) {
        // Per-element jitter.
        for (Element& e : v.elements) {
            e.x += rng.uniform(-kJitterCenter, kJitterCenter) * v.width;
            e.y += rng.uniform(-kJitterCenter, kJitterCenter) * v.height;
            e.w *= 1.0 + rng.uniform(-kJitterSize, kJitterSize);
            e.h *= 1.0 + rng.uniform(-kJitterSize, kJitterSize);
            clamp_into(e, v.width, v.height);
        }
    } else {
        // Whole-layout shift; keeps structure, moves every box.
        const double tx = rng.uniform(kShiftLo, kShiftHi) * v.width * (rng.next_double() < 0.5 ? -1 : 1);
        const double ty = rng.uniform(kShiftLo, kShiftHi) * v.height * (rng.next_double() < 0.5 ? -1 : 1);
        for (Element& e : v.elements) {
            e.x += tx;
            e.y += ty;
            clamp_into(e, v.width, v.height);
        }
    }
    return v;
}

}  // namespace

std::vector<Layout> synth_generate(int32_t n, uint64_t seed, SynthProfile profile) {
    if (n < 1) throw DataError("synth_generate: n must be >= 1");
    const char* prefix = profile == SynthProfile::Floorplan ? "fp" : "ui";
    Rng root = Rng(seed).fork(prefix);
    std::vector<Layout> out;
    out.reserve(size_t(n));
    int32_t cluster_index = 0;
    while (int32_t(out.size()) < n) {
        Rng crng = root.fork("cluster" + std::to_string(cluster_index++));
        Layout base = profile == SynthProfile::Floorplan ? floorplan_base(crng) : ui_base(crng);
        const int32_t cluster = 2 + int32_t(crng.uniform_int(3));  // 2..4
        for (int32_t v = 0; v < cluster && int32_t(out.size()) < n; ++v) {
            Layout l = v == 0 ? base : make_variant(base, crng);
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%04d", prefix, int(out.size()));
            l.id = buf;
            out.push_back(std::move(l));
        }
    }
    return out;
}

}  // namespace lsim

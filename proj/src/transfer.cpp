#include "lsim/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>

#include "lsim/common.hpp"
#include "lsim/raster.hpp"

namespace lsim {

Matching attention_match(const Layout& source, const Layout& target, const ModelParams& p,
                         GraphMode mode, double adjacency_eps, int32_t round) {
    if (round < -1 || round >= p.cfg.rounds)
        throw DataError("attention_match: round " + std::to_string(round) + " out of range for " +
                        std::to_string(p.cfg.rounds) + " rounds");
    const LayoutGraph sg = mask_semantics(build_graph(source, mode, adjacency_eps));
    const LayoutGraph tg = mask_semantics(build_graph(target, mode, adjacency_eps));
    const MatchResult r = match_pair(sg, tg, p);
    const size_t use = round < 0 ? r.attention.size() - 1 : size_t(round);
    const Tensor& attn = r.attention[use].second;  // target rows over source columns
    Matching m;
    m.method = TransferMethod::Attention;
    for (int64_t ti = 0; ti < attn.rows(); ++ti) {
        int64_t best = 0;
        for (int64_t si = 1; si < attn.cols(); ++si)
            if (attn.at(ti, si) > attn.at(ti, best)) best = si;
        m.assignments.push_back({target.elements[size_t(ti)].id, int32_t(ti),
                                 source.elements[size_t(best)].id, int32_t(best),
                                 source.elements[size_t(best)].category, attn.at(ti, best),
                                 false});
    }
    return m;
}

Matching pixel_overlap_match(const Layout& source, const Layout& target, int32_t resolution) {
    if (resolution < 1) throw DimError("pixel_overlap_match: resolution must be >= 1");
    if (source.elements.empty() || target.elements.empty())
        throw DataError("pixel_overlap_match: empty layout");
    // Per-element cell masks over each layout's own canvas grid.
    auto element_mask = [resolution](const Layout& l, const Element& e) {
        const int64_t cells = int64_t(resolution) * resolution;
        std::vector<uint64_t> bits((cells + 63) / 64, 0);
        const double cw = l.width / resolution, ch = l.height / resolution;
        for (int32_t r = 0; r < resolution; ++r) {
            const double py = (r + 0.5) * ch;
            for (int32_t c = 0; c < resolution; ++c)
                if (point_in_box((c + 0.5) * cw, py, e)) {
                    const int64_t cell = int64_t(r) * resolution + c;
                    bits[cell / 64] |= uint64_t(1) << (cell % 64);
                }
        }
        return bits;
    };
    std::vector<std::vector<uint64_t>> smasks;
    smasks.reserve(source.elements.size());
    for (const Element& e : source.elements) smasks.push_back(element_mask(source, e));

    Matching m;
    m.method = TransferMethod::PixelOverlap;
    for (size_t ti = 0; ti < target.elements.size(); ++ti) {
        const Element& te = target.elements[ti];
        const std::vector<uint64_t> tmask = element_mask(target, te);
        int64_t tcells = 0;
        for (uint64_t w : tmask) tcells += std::popcount(w);
        int64_t best = -1, best_overlap = 0;
        for (size_t si = 0; si < source.elements.size(); ++si) {
            int64_t overlap = 0;
            for (size_t w = 0; w < tmask.size(); ++w)
                overlap += std::popcount(tmask[w] & smasks[si][w]);
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best = int64_t(si);
            }
        }
        bool fallback = best < 0 || tcells == 0;
        if (fallback) {
            // Nothing overlaps: nearest source center, ties by lower index.
            double best_d = 0;
            best = 0;
            for (size_t si = 0; si < source.elements.size(); ++si) {
                const double dx = source.elements[si].x - te.x;
                const double dy = source.elements[si].y - te.y;
                const double d = dx * dx + dy * dy;
                if (si == 0 || d < best_d) {
                    best_d = d;
                    best = int64_t(si);
                }
            }
        }
        const Element& se = source.elements[size_t(best)];
        m.assignments.push_back({te.id, int32_t(ti), se.id, int32_t(best), se.category,
                                 fallback ? 0.0 : double(best_overlap) / double(tcells),
                                 fallback});
    }
    return m;
}

double transfer_accuracy(const Matching& m, const Layout& target) {
    if (m.assignments.size() != target.elements.size())
        throw DimError("transfer_accuracy: matching does not cover the target layout");
    int64_t good = 0;
    for (size_t i = 0; i < m.assignments.size(); ++i)
        if (m.assignments[i].label == target.elements[i].category) ++good;
    return double(good) / double(target.elements.size());
}

nlohmann::json matching_to_json(const Matching& m) {
    nlohmann::json arr = nlohmann::json::array();
    const char* method = m.method == TransferMethod::Attention ? "attention" : "pixel_overlap";
    for (const Assignment& a : m.assignments) {
        nlohmann::json row = {{"target_id", a.target_id}, {"source_id", a.source_id},
                              {"label", a.label},         {"score", a.score},
                              {"method", method}};
        if (a.zero_overlap) row["zero_overlap"] = true;
        arr.push_back(std::move(row));
    }
    return arr;
}

namespace {

std::string category_color(int32_t cat) {
    // Fixed palette: hue stepped by the golden angle, rendered as HSL.
    char buf[32];
    std::snprintf(buf, sizeof buf, "hsl(%d,65%%,60%%)", int((cat * 137) % 360));
    return buf;
}

void render_elements(std::string& svg, const Layout& l, double ox,
                     const std::vector<int32_t>* labels) {
    char buf[256];
    for (size_t i = 0; i < l.elements.size(); ++i) {
        const Element& e = l.elements[i];
        const int32_t cat = labels ? (*labels)[i] : e.category;
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" "
                      "fill=\"%s\" stroke=\"#333\" stroke-width=\"1\"/>\n",
                      ox + e.x0(), e.y0(), e.w, e.h, category_color(cat).c_str());
        svg += buf;
        std::snprintf(buf, sizeof buf,
                      "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" fill=\"#000\" "
                      "text-anchor=\"middle\">%d</text>\n",
                      ox + e.x, e.y + 4, cat);
        svg += buf;
    }
}

}  // namespace

std::string transfer_svg(const Layout& source, const Layout& target, const Matching& m) {
    if (m.assignments.size() != target.elements.size())
        throw DimError("transfer_svg: matching does not cover the target layout");
    const double gutter = 24;
    const double width = source.width + gutter + target.width;
    const double height = std::max(source.height, target.height);
    char buf[256];
    std::string svg;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 %.2f %.2f\">\n",
                  width, height + 20);
    svg += buf;
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
    render_elements(svg, source, 0, nullptr);
    std::vector<int32_t> transferred(target.elements.size());
    for (const Assignment& a : m.assignments) transferred[size_t(a.target_index)] = a.label;
    render_elements(svg, target, source.width + gutter, &transferred);
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\">source</text>\n", 4.0,
                  height + 14);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\">target (transferred)</text>\n",
                  source.width + gutter + 4, height + 14);
    svg += buf;
    svg += "</svg>\n";
    return svg;
}

}  // namespace lsim

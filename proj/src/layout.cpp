#include "lsim/layout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <unordered_set>

#include "lsim/common.hpp"

namespace lsim {

namespace {

constexpr double kClampTol = 1e-6;

double require_number(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j[key].is_number())
        throw DataError(where + ": missing or non-numeric \"" + key + "\"");
    return j[key].get<double>();
}

// Clamp one axis of a box into [0, limit]; returns true if anything moved.
bool clamp_axis(double& center, double& extent, double limit) {
    double lo = center - extent / 2, hi = center + extent / 2;
    if (lo >= -kClampTol * limit && hi <= limit * (1 + kClampTol)) return false;
    lo = std::max(0.0, lo);
    hi = std::min(limit, hi);
    center = (lo + hi) / 2;
    extent = hi - lo;
    return true;
}

}  // namespace

Layout layout_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("layout: expected a JSON object");
    Layout l;
    if (!j.contains("id") || !j["id"].is_string()) throw DataError("layout: missing string \"id\"");
    l.id = j["id"].get<std::string>();
    const std::string where = "layout \"" + l.id + "\"";
    l.width = require_number(j, "width", where);
    l.height = require_number(j, "height", where);
    if (!(l.width > 0) || !(l.height > 0)) throw DataError(where + ": canvas must be positive");
    if (!j.contains("categories") || !j["categories"].is_number_integer())
        throw DataError(where + ": missing integer \"categories\"");
    l.categories = j["categories"].get<int32_t>();
    if (l.categories < 1) throw DataError(where + ": categories must be >= 1");
    if (!j.contains("elements") || !j["elements"].is_array() || j["elements"].empty())
        throw DataError(where + ": \"elements\" must be a non-empty array");

    std::unordered_set<std::string> seen;
    for (const auto& ej : j["elements"]) {
        Element e;
        if (!ej.is_object() || !ej.contains("id") || !ej["id"].is_string())
            throw DataError(where + ": element missing string \"id\"");
        e.id = ej["id"].get<std::string>();
        const std::string ewhere = where + " element \"" + e.id + "\"";
        if (!seen.insert(e.id).second) throw DataError(ewhere + ": duplicate element id");
        if (!ej.contains("category") || !ej["category"].is_number_integer())
            throw DataError(ewhere + ": missing integer \"category\"");
        e.category = ej["category"].get<int32_t>();
        if (e.category < 0 || e.category >= l.categories)
            throw DataError(ewhere + ": category " + std::to_string(e.category) +
                            " out of range [0, " + std::to_string(l.categories) + ")");
        e.x = require_number(ej, "x", ewhere);
        e.y = require_number(ej, "y", ewhere);
        e.w = require_number(ej, "w", ewhere);
        e.h = require_number(ej, "h", ewhere);
        for (double v : {e.x, e.y, e.w, e.h})
            if (!std::isfinite(v)) throw DataError(ewhere + ": non-finite coordinate");
        if (!(e.w > 0) || !(e.h > 0)) throw DataError(ewhere + ": extent must be positive");

        const bool moved_x = clamp_axis(e.x, e.w, l.width);
        const bool moved_y = clamp_axis(e.y, e.h, l.height);
        if (moved_x || moved_y) {
            if (!(e.w > 0) || !(e.h > 0))
                throw DataError(ewhere + ": lies entirely outside the canvas");
            std::cerr << "warning: " << ewhere << " extended past the canvas; clamped\n";
        }
        l.elements.push_back(std::move(e));
    }
    return l;
}

Layout parse_layout(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataError("layout: invalid JSON");
    return layout_from_json(j);
}

nlohmann::json layout_to_json(const Layout& l) {
    nlohmann::json els = nlohmann::json::array();
    for (const Element& e : l.elements)
        els.push_back({{"id", e.id},
                       {"category", e.category},
                       {"x", e.x},
                       {"y", e.y},
                       {"w", e.w},
                       {"h", e.h}});
    return {{"id", l.id},
            {"width", l.width},
            {"height", l.height},
            {"categories", l.categories},
            {"elements", els}};
}

std::vector<Layout> load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Layout> out;
    std::unordered_set<std::string> ids;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Layout l;
        try {
            l = parse_layout(line);
        } catch (const DataError& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!ids.insert(l.id).second)
            throw DataError(path + ":" + std::to_string(lineno) + ": duplicate layout id \"" +
                            l.id + "\"");
        out.push_back(std::move(l));
    }
    return out;
}

void save_dataset(const std::string& path, const std::vector<Layout>& layouts) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const Layout& l : layouts) out << layout_to_json(l).dump() << "\n";
}

}  // namespace lsim

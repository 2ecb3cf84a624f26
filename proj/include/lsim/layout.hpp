#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace lsim {

// Axis-aligned box; x,y is the center.
struct Element {
    std::string id;
    int32_t category = 0;
    double x = 0, y = 0, w = 0, h = 0;

    double x0() const { return x - w / 2; }
    double x1() const { return x + w / 2; }
    double y0() const { return y - h / 2; }
    double y1() const { return y + h / 2; }
    double area() const { return w * h; }
};

struct Layout {
    std::string id;
    double width = 0, height = 0;
    int32_t categories = 0;
    std::vector<Element> elements;
};

// Parses and validates one layout object. Boxes extending past the canvas
// are clamped back in, with a warning on stderr when the excursion exceeds
// tolerance. Throws DataError naming the offending element otherwise.
Layout layout_from_json(const nlohmann::json& j);
Layout parse_layout(const std::string& text);
nlohmann::json layout_to_json(const Layout& l);

// Datasets are JSON lines, one layout per line. Blank lines are skipped.
// Layout ids must be unique within a dataset.
std::vector<Layout> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<Layout>& layouts);

}  // namespace lsim

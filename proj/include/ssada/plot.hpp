#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssada/tensor.hpp"

namespace ssada::plot {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
    uint8_t r = 0, g = 0, b = 0;
};

// Minimal PNG line chart: axes, ticks, legend, 5x7 bitmap font. Enough for
// the mIoU curves the report command emits.
struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 640;
    int height = 440;
    std::vector<Series> series;

    void add(Series s) { series.push_back(std::move(s)); }
    ImageU8 render() const;
    void save(const std::filesystem::path& path) const;
};

// Distinct color for the i-th series.
void series_color(size_t i, uint8_t& r, uint8_t& g, uint8_t& b);

} // namespace ssada::plot

#include "ssada/plot.hpp"

#include <algorithm>
#include <cmath>

#include "ssada/png_io.hpp"
#include "ssada/strfmt.hpp"

namespace ssada::plot {

namespace {

// 5x7 glyphs, column-major bits; covers what axis labels need.
struct Glyph {
    char ch;
    uint8_t col[5];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}}, {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
    {'.', {0x00, 0x60, 0x60, 0x00, 0x00}}, {'_', {0x40, 0x40, 0x40, 0x40, 0x40}},
    {'%', {0x62, 0x64, 0x08, 0x13, 0x23}}, {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
    {'(', {0x00, 0x1c, 0x22, 0x41, 0x00}}, {')', {0x00, 0x41, 0x22, 0x1c, 0x00}},
    {'0', {0x3e, 0x51, 0x49, 0x45, 0x3e}}, {'1', {0x00, 0x42, 0x7f, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}}, {'3', {0x21, 0x41, 0x45, 0x4b, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7f, 0x10}}, {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3c, 0x4a, 0x49, 0x49, 0x30}}, {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}}, {'9', {0x06, 0x49, 0x49, 0x29, 0x1e}},
    {'a', {0x20, 0x54, 0x54, 0x54, 0x78}}, {'b', {0x7f, 0x48, 0x44, 0x44, 0x38}},
    {'c', {0x38, 0x44, 0x44, 0x44, 0x20}}, {'d', {0x38, 0x44, 0x44, 0x48, 0x7f}},
    {'e', {0x38, 0x54, 0x54, 0x54, 0x18}}, {'f', {0x08, 0x7e, 0x09, 0x01, 0x02}},
    {'g', {0x0c, 0x52, 0x52, 0x52, 0x3e}}, {'h', {0x7f, 0x08, 0x04, 0x04, 0x78}},
    {'i', {0x00, 0x44, 0x7d, 0x40, 0x00}}, {'j', {0x20, 0x40, 0x44, 0x3d, 0x00}},
    {'k', {0x7f, 0x10, 0x28, 0x44, 0x00}}, {'l', {0x00, 0x41, 0x7f, 0x40, 0x00}},
    {'m', {0x7c, 0x04, 0x18, 0x04, 0x78}}, {'n', {0x7c, 0x08, 0x04, 0x04, 0x78}},
    {'o', {0x38, 0x44, 0x44, 0x44, 0x38}}, {'p', {0x7c, 0x14, 0x14, 0x14, 0x08}},
    {'q', {0x08, 0x14, 0x14, 0x18, 0x7c}}, {'r', {0x7c, 0x08, 0x04, 0x04, 0x08}},
    {'s', {0x48, 0x54, 0x54, 0x54, 0x20}}, {'t', {0x04, 0x3f, 0x44, 0x40, 0x20}},
    {'u', {0x3c, 0x40, 0x40, 0x20, 0x7c}}, {'v', {0x1c, 0x20, 0x40, 0x20, 0x1c}},
    {'w', {0x3c, 0x40, 0x30, 0x40, 0x3c}}, {'x', {0x44, 0x28, 0x10, 0x28, 0x44}},
    {'y', {0x0c, 0x50, 0x50, 0x50, 0x3c}}, {'z', {0x44, 0x64, 0x54, 0x4c, 0x44}},
    {'I', {0x00, 0x41, 0x7f, 0x41, 0x00}}, {'U', {0x3f, 0x40, 0x40, 0x40, 0x3f}},
};

const Glyph* find_glyph(char c) {
    if (c >= 'A' && c <= 'Z' && c != 'I' && c != 'U') c = char(c - 'A' + 'a');
    for (const auto& g : kFont)
        if (g.ch == c) return &g;
    return nullptr;
}

void put_px(ImageU8& img, int y, int x, uint8_t r, uint8_t g, uint8_t b) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    uint8_t* p = img.px(y, x);
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

void draw_text(ImageU8& img, int y, int x, const std::string& text, uint8_t r = 30, uint8_t g = 30,
               uint8_t b = 30) {
    for (char c : text) {
        if (const Glyph* gl = find_glyph(c)) {
            for (int cx = 0; cx < 5; ++cx)
                for (int cy = 0; cy < 7; ++cy)
                    if (gl->col[cx] & (1 << cy)) put_px(img, y + cy, x + cx, r, g, b);
        }
        x += 6;
    }
}

void draw_line(ImageU8& img, int y0, int x0, int y1, int x1, uint8_t r, uint8_t g, uint8_t b) {
    const int dx = std::abs(x1 - x0), dy = std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx - dy;
    while (true) {
        put_px(img, y0, x0, r, g, b);
        put_px(img, y0 + 1, x0, r, g, b); // 2px strokes read better at this size
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 > -dy) {
            err -= dy;
            x0 += sx;
        }
        if (e2 < dx) {
            err += dx;
            y0 += sy;
        }
    }
}

} // namespace

void series_color(size_t i, uint8_t& r, uint8_t& g, uint8_t& b) {
    static const uint8_t palette[][3] = {{214, 69, 65},  {31, 119, 180}, {44, 160, 44},
                                         {255, 127, 14}, {148, 103, 189}, {23, 190, 207},
                                         {140, 86, 75},  {227, 119, 194}};
    const auto& c = palette[i % (sizeof(palette) / sizeof(palette[0]))];
    r = c[0];
    g = c[1];
    b = c[2];
}

ImageU8 LinePlot::render() const {
    ImageU8 img(height, width);
    std::fill(img.rgb.begin(), img.rgb.end(), uint8_t(255));

    const int ml = 70, mr = 20, mt = 30, mb = 50;
    const int px0 = ml, px1 = width - mr, py0 = mt, py1 = height - mb;

    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            if (!any) {
                xmin = xmax = x;
                ymin = ymax = y;
                any = true;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmax <= xmin) xmax = xmin + 1;
    if (ymax <= ymin) ymax = ymin + 1e-6;
    const double ypad = 0.06 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto X = [&](double x) { return int(px0 + (x - xmin) / (xmax - xmin) * (px1 - px0)); };
    auto Y = [&](double y) { return int(py1 - (y - ymin) / (ymax - ymin) * (py1 - py0)); };

    draw_line(img, py1, px0, py1, px1, 60, 60, 60);
    draw_line(img, py0, px0, py1, px0, 60, 60, 60);

    for (int t = 0; t <= 4; ++t) {
        const double xv = xmin + (xmax - xmin) * t / 4.0;
        const double yv = ymin + (ymax - ymin) * t / 4.0;
        draw_line(img, py1, X(xv), py1 + 4, X(xv), 60, 60, 60);
        draw_text(img, py1 + 8, X(xv) - 12, fmt_g(xv, 3));
        draw_line(img, Y(yv), px0 - 4, Y(yv), px0, 60, 60, 60);
        draw_text(img, Y(yv) - 3, 8, fmt_g(yv, 3));
    }

    draw_text(img, 8, ml, title);
    draw_text(img, height - 14, (px0 + px1) / 2 - int(x_label.size()) * 3, x_label);
    draw_text(img, py0 - 12, 8, y_label);

    int legend_y = py0 + 6;
    for (size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        std::vector<std::pair<double, double>> pts = s.points;
        std::sort(pts.begin(), pts.end());
        for (size_t j = 1; j < pts.size(); ++j)
            draw_line(img, Y(pts[j - 1].second), X(pts[j - 1].first), Y(pts[j].second),
                      X(pts[j].first), s.r, s.g, s.b);
        for (const auto& [x, y] : pts)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) put_px(img, Y(y) + dy, X(x) + dx, s.r, s.g, s.b);
        for (int dy = 0; dy < 7; ++dy)
            for (int dx = 0; dx < 10; ++dx)
                put_px(img, legend_y + dy, px1 - 150 + dx, s.r, s.g, s.b);
        draw_text(img, legend_y, px1 - 136, s.name);
        legend_y += 12;
    }
    return img;
}

void LinePlot::save(const std::filesystem::path& path) const {
    pngio::write_rgb8(path, render());
}

} // namespace ssada::plot

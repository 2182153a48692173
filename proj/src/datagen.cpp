#include "ssada/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ssada/color.hpp"
#include "ssada/errors.hpp"
#include "ssada/png_io.hpp"
#include "ssada/rng.hpp"

namespace ssada::datagen {

using nlohmann::json;

namespace {

struct Rgb {
    double r, g, b;
};

// Background plus one color per shape class. Classes 4 and 5 sit between the
// primary shape colors on the hue wheel, so predictions on them stay split
// between neighbours until the class gets real labels.
Rgb base_color(int cls, int num_classes) {
    static const Rgb fixed[] = {
        {0.42, 0.45, 0.42}, // 0 background
        {0.85, 0.15, 0.15}, // 1 disc
        {0.15, 0.25, 0.85}, // 2 rectangle
        {0.90, 0.80, 0.10}, // 3 triangle
        {0.87, 0.50, 0.12}, // 4 stripe
        {0.48, 0.18, 0.62}, // 5 cross
    };
    if (cls < 6) return fixed[cls];
    double t = double(cls - 5) / double(std::max(1, num_classes - 5));
    double ang = 6.2831853 * t;
    return {0.5 + 0.4 * std::cos(ang), 0.5 + 0.4 * std::sin(ang), 0.5 - 0.3 * std::cos(ang)};
}

uint8_t quantize(double v) {
    v = std::clamp(v, 0.0, 1.0);
    return uint8_t(v * 255.0 + 0.5);
}

enum class ShapeKind { disc, rectangle, triangle, stripe, cross };

ShapeKind kind_of_class(int cls) {
    switch ((cls - 1) % 5) {
        case 0: return ShapeKind::disc;
        case 1: return ShapeKind::rectangle;
        case 2: return ShapeKind::triangle;
        case 3: return ShapeKind::stripe;
        default: return ShapeKind::cross;
    }
}

struct Shape {
    int cls = 0;
    ShapeKind kind = ShapeKind::disc;
    double cx = 0, cy = 0;   // center, pixel units
    double a = 0, b = 0;     // primary/secondary extent
    double angle = 0;        // stripe normal direction
    Rgb color{0, 0, 0};
};

bool inside(const Shape& s, double x, double y) {
    double dx = x - s.cx;
    double dy = y - s.cy;
    switch (s.kind) {
        case ShapeKind::disc:
            return dx * dx + dy * dy <= s.a * s.a;
        case ShapeKind::rectangle:
            return std::fabs(dx) <= s.a && std::fabs(dy) <= s.b;
        case ShapeKind::triangle: {
            // upright isoceles triangle: apex at cy-a, base at cy+a
            double ty = (y - (s.cy - s.a)) / (2.0 * s.a);
            if (ty < 0 || ty > 1) return false;
            return std::fabs(dx) <= s.b * ty;
        }
        case ShapeKind::stripe: {
            double nx = std::cos(s.angle);
            double ny = std::sin(s.angle);
            return std::fabs(dx * nx + dy * ny) <= s.a;
        }
        case ShapeKind::cross:
            return (std::fabs(dx) <= s.b && std::fabs(dy) <= s.a) ||
                   (std::fabs(dy) <= s.b && std::fabs(dx) <= s.a);
    }
    return false;
}

Shape make_shape(int cls, int h, int w, std::mt19937_64& rng) {
    Shape s;
    s.cls = cls;
    s.kind = kind_of_class(cls);
    const double m = std::min(h, w);
    s.cx = uniform(rng, 0.15 * w, 0.85 * w);
    s.cy = uniform(rng, 0.15 * h, 0.85 * h);
    switch (s.kind) {
        case ShapeKind::disc:
            s.a = uniform(rng, 0.10, 0.20) * m;
            break;
        case ShapeKind::rectangle:
            s.a = uniform(rng, 0.10, 0.22) * m;
            s.b = uniform(rng, 0.08, 0.18) * m;
            break;
        case ShapeKind::triangle:
            // deliberately small: a low-frequency class the model still
            // separates easily by color
            s.a = uniform(rng, 0.07, 0.11) * m;
            s.b = uniform(rng, 0.06, 0.10) * m;
            break;
        case ShapeKind::stripe:
            s.a = uniform(rng, 0.04, 0.08) * m;
            s.angle = uniform(rng, 0.0, 3.14159265);
            break;
        case ShapeKind::cross:
            s.a = uniform(rng, 0.22, 0.34) * m;
            s.b = uniform(rng, 0.045, 0.07) * m;
            break;
    }
    return s;
}

Rgb jitter_color(Rgb c, std::mt19937_64& rng, double sigma) {
    c.r = std::clamp(c.r + gaussian(rng, 0.0, sigma), 0.0, 1.0);
    c.g = std::clamp(c.g + gaussian(rng, 0.0, sigma), 0.0, 1.0);
    c.b = std::clamp(c.b + gaussian(rng, 0.0, sigma), 0.0, 1.0);
    return c;
}

struct Rendered {
    ImageU8 image;
    LabelMap labels;
};

Rendered render_scene(const DatasetSpec& spec, bool with_rare, std::mt19937_64& rng) {
    const int h = spec.image_height;
    const int w = spec.image_width;

    std::vector<int> common, rare;
    for (int c = 1; c < spec.num_classes; ++c) {
        if (std::find(spec.rare_class_ids.begin(), spec.rare_class_ids.end(), c) !=
            spec.rare_class_ids.end())
            rare.push_back(c);
        else
            common.push_back(c);
    }

    int n_shapes = 2 + int(uniform_index(rng, 4)); // 2..5
    std::vector<Shape> shapes;
    for (int i = 0; i < n_shapes && !common.empty(); ++i) {
        int cls = common[uniform_index(rng, common.size())];
        Shape s = make_shape(cls, h, w, rng);
        s.color = jitter_color(base_color(cls, spec.num_classes), rng, 0.05);
        shapes.push_back(s);
    }
    if (with_rare && !rare.empty()) {
        int n_rare = 1 + (uniform01(rng) < 0.3 ? 1 : 0);
        for (int i = 0; i < n_rare; ++i) {
            int cls = rare[uniform_index(rng, rare.size())];
            Shape s = make_shape(cls, h, w, rng);
            s.color = jitter_color(base_color(cls, spec.num_classes), rng, 0.05);
            shapes.push_back(s); // rare shapes render last so they stay visible
        }
    }

    Rgb bg = jitter_color(base_color(0, spec.num_classes), rng, 0.04);

    Rendered out;
    out.image = ImageU8(h, w);
    out.labels = LabelMap(h, w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            Rgb c = bg;
            int cls = 0;
            for (const Shape& s : shapes) {
                if (inside(s, x + 0.5, y + 0.5)) {
                    c = s.color;
                    cls = s.cls;
                }
            }
            double n = gaussian(rng, 0.0, 0.015);
            uint8_t* px = out.image.px(y, x);
            px[0] = quantize(c.r + n);
            px[1] = quantize(c.g + n);
            px[2] = quantize(c.b + n);
            out.labels.at(y, x) = uint8_t(cls);
        }
    }
    return out;
}

ImageU8 box_blur(const ImageU8& img, int radius) {
    if (radius <= 0) return img;
    ImageU8 out(img.height, img.width);
    const int h = img.height, w = img.width;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int sum[3] = {0, 0, 0};
            int cnt = 0;
            for (int dy = -radius; dy <= radius; ++dy) {
                int yy = std::clamp(y + dy, 0, h - 1);
                for (int dx = -radius; dx <= radius; ++dx) {
                    int xx = std::clamp(x + dx, 0, w - 1);
                    const uint8_t* p = img.px(yy, xx);
                    sum[0] += p[0];
                    sum[1] += p[1];
                    sum[2] += p[2];
                    ++cnt;
                }
            }
            uint8_t* q = out.px(y, x);
            q[0] = uint8_t((sum[0] + cnt / 2) / cnt);
            q[1] = uint8_t((sum[1] + cnt / 2) / cnt);
            q[2] = uint8_t((sum[2] + cnt / 2) / cnt);
        }
    }
    return out;
}

} // namespace

DatasetSpec default_spec() { return DatasetSpec{}; }

void validate(const DatasetSpec& spec) {
    if (spec.num_classes < 2) throw validation_error("num_classes must be >= 2");
    if (spec.num_classes > 254)
        throw validation_error("num_classes must leave 255 free as the ignore id");
    if (spec.image_height < 8 || spec.image_width < 8)
        throw validation_error("image dimensions must be >= 8");
    if (spec.source_count < 0 || spec.target_count < 0 || spec.target_val_count < 0)
        throw validation_error("image counts must be non-negative");
    if (spec.rare_fraction < 0.0 || spec.rare_fraction > 1.0)
        throw validation_error("rare_fraction must be in [0, 1]");
    for (int id : spec.rare_class_ids) {
        if (id < 1 || id >= spec.num_classes)
            throw validation_error("rare_class_ids must be shape classes in [1, num_classes)");
    }
    if (spec.shift.noise_sigma < 0) throw validation_error("noise_sigma must be >= 0");
    if (spec.shift.blur_radius < 0) throw validation_error("blur_radius must be >= 0");
}

ImageU8 apply_domain_shift(const ImageU8& img, const ShiftSpec& shift, std::mt19937_64& rng) {
    ImageU8 out(img.height, img.width);
    const size_t n = size_t(img.height) * img.width;
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* p = img.rgb.data() + i * 3;
        double r = p[0] / 255.0, g = p[1] / 255.0, b = p[2] / 255.0;
        color::hue_rotate(r, g, b, shift.hue_offset);
        uint8_t* q = out.rgb.data() + i * 3;
        q[0] = quantize(r);
        q[1] = quantize(g);
        q[2] = quantize(b);
    }
    out = box_blur(out, shift.blur_radius);
    if (shift.noise_sigma > 0) {
        const double sigma = shift.noise_sigma / 255.0;
        for (size_t i = 0; i < n * 3; ++i) {
            double v = out.rgb[i] / 255.0 + gaussian(rng, 0.0, sigma);
            out.rgb[i] = quantize(v);
        }
    }
    return out;
}

std::vector<SampleRecord> generate(const DatasetSpec& spec, const std::filesystem::path& out_dir) {
    validate(spec);

    std::error_code ec;
    std::filesystem::create_directories(out_dir / "images", ec);
    std::filesystem::create_directories(out_dir / "labels", ec);
    if (ec) throw io_error("cannot create dataset directories under " + out_dir.string());

    auto mark_rare = [&](int count, double fraction, uint64_t stream) {
        std::vector<char> rare(count, 0);
        int k = int(std::llround(fraction * count));
        std::vector<int> idx(count);
        std::iota(idx.begin(), idx.end(), 0);
        auto rng = rng_for(spec.seed, "datagen:rare", stream);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int i = 0; i < k && i < count; ++i) rare[idx[i]] = 1;
        return rare;
    };

    std::vector<SampleRecord> records;
    char name[64];

    auto emit = [&](const std::string& id, const Rendered& r) {
        SampleRecord rec;
        rec.sample_id = id;
        rec.image_path = std::filesystem::path("images") / (id + ".png");
        rec.label_path = std::filesystem::path("labels") / (id + ".png");
        pngio::write_rgb8(out_dir / rec.image_path, r.image);
        pngio::write_gray8(out_dir / rec.label_path, r.labels);
        return rec;
    };

    for (int i = 0; i < spec.source_count; ++i) {
        std::snprintf(name, sizeof(name), "src_train_%04d", i);
        auto rng = rng_for(spec.seed, "datagen:source", i);
        Rendered r = render_scene(spec, false, rng);
        SampleRecord rec = emit(name, r);
        rec.domain = Domain::source;
        rec.split = Split::train;
        records.push_back(rec);
    }

    const std::vector<char> rare_train = mark_rare(spec.target_count, spec.rare_fraction, 0);
    for (int i = 0; i < spec.target_count; ++i) {
        std::snprintf(name, sizeof(name), "tgt_train_%04d", i);
        auto rng = rng_for(spec.seed, "datagen:target_train", i);
        Rendered r = render_scene(spec, rare_train[i] != 0, rng);
        auto shift_rng = rng_for(spec.seed, "datagen:shift_train", i);
        r.image = apply_domain_shift(r.image, spec.shift, shift_rng);
        SampleRecord rec = emit(name, r);
        rec.domain = Domain::target;
        rec.split = Split::train;
        records.push_back(rec);
    }

    const std::vector<char> rare_val = mark_rare(spec.target_val_count, spec.rare_fraction, 1);
    for (int i = 0; i < spec.target_val_count; ++i) {
        std::snprintf(name, sizeof(name), "tgt_val_%04d", i);
        auto rng = rng_for(spec.seed, "datagen:target_val", i);
        Rendered r = render_scene(spec, rare_val[i] != 0, rng);
        auto shift_rng = rng_for(spec.seed, "datagen:shift_val", i);
        r.image = apply_domain_shift(r.image, spec.shift, shift_rng);
        SampleRecord rec = emit(name, r);
        rec.domain = Domain::target;
        rec.split = Split::val;
        records.push_back(rec);
    }

    save_manifest(manifest_path(out_dir), records);
    save_spec(spec, spec_path(out_dir));
    return records;
}

void save_spec(const DatasetSpec& spec, const std::filesystem::path& path) {
    json j{{"image_height", spec.image_height},
           {"image_width", spec.image_width},
           {"num_classes", spec.num_classes},
           {"source_count", spec.source_count},
           {"target_count", spec.target_count},
           {"target_val_count", spec.target_val_count},
           {"rare_class_ids", spec.rare_class_ids},
           {"rare_fraction", spec.rare_fraction},
           {"shift", {{"hue_offset", spec.shift.hue_offset},
                      {"noise_sigma", spec.shift.noise_sigma},
                      {"blur_radius", spec.shift.blur_radius}}},
           {"seed", spec.seed}};
    std::ofstream out(path);
    if (!out) throw io_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

DatasetSpec load_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw io_error("dataset spec parse error: " + std::string(e.what()));
    }
    DatasetSpec spec;
    spec.image_height = j.at("image_height").get<int>();
    spec.image_width = j.at("image_width").get<int>();
    spec.num_classes = j.at("num_classes").get<int>();
    spec.source_count = j.at("source_count").get<int>();
    spec.target_count = j.at("target_count").get<int>();
    spec.target_val_count = j.at("target_val_count").get<int>();
    spec.rare_class_ids = j.at("rare_class_ids").get<std::vector<int>>();
    spec.rare_fraction = j.at("rare_fraction").get<double>();
    spec.shift.hue_offset = j.at("shift").at("hue_offset").get<double>();
    spec.shift.noise_sigma = j.at("shift").at("noise_sigma").get<double>();
    spec.shift.blur_radius = j.at("shift").at("blur_radius").get<int>();
    spec.seed = j.at("seed").get<uint64_t>();
    return spec;
}

} // namespace ssada::datagen

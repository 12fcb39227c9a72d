#include "s2vr/features.hpp"

#include "s2vr/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <string>

namespace s2vr::features {

namespace {

using geometry::Point;

// Inside test for a convex quadrilateral given in polygon order.
bool inside(const std::array<Point, 4>& poly, double h, double v) {
    bool pos = false;
    bool neg = false;
    for (std::size_t i = 0; i < 4; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % 4];
        const double cross = (b.h - a.h) * (v - a.v) - (b.v - a.v) * (h - a.h);
        if (cross > 0.0) pos = true;
        if (cross < 0.0) neg = true;
        if (pos && neg) return false;
    }
    return true;
}

constexpr double kNormEps2 = 1e-12;

void normalize(std::span<double> v, double clip) {
    double ss = 0.0;
    for (double x : v) ss += x * x;
    double inv = 1.0 / std::sqrt(ss + kNormEps2);
    ss = 0.0;
    for (double& x : v) {
        x = std::min(x * inv, clip);
        ss += x * x;
    }
    inv = 1.0 / std::sqrt(ss + kNormEps2);
    for (double& x : v) x *= inv;
}

}  // namespace

GrayImage::GrayImage(int w, int h, double fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

GrayImage render(const geometry::SpineAnnotation& annotation, const RenderOptions& o) {
    if (annotation.vertebrae.empty()) throw ShapeError("render: annotation has no vertebrae");
    if (o.width <= 0 || o.height <= 0 || o.supersample <= 0) throw ParameterError("render: bad image size");
    if (!(o.noise_level >= 0.0)) throw ParameterError("render: noise level must be nonnegative");
    for (const auto& vert : annotation.vertebrae) {
        for (const Point& p : vert) {
            if (!(p.h >= 0.0 && p.h <= o.width && p.v >= 0.0 && p.v <= o.height)) {
                throw RenderError("render: landmark (" + std::to_string(p.h) + ", " + std::to_string(p.v) +
                                  ") outside the " + std::to_string(o.width) + "x" + std::to_string(o.height) +
                                  " frame");
            }
        }
    }

    GrayImage img(o.width, o.height, o.background);
    const int ss = o.supersample;
    const double sub = 1.0 / ss;
    const double per_sample = (o.foreground - o.background) / (ss * ss);
    for (const auto& vert : annotation.vertebrae) {
        const std::array<Point, 4> poly = {vert[0], vert[1], vert[3], vert[2]};
        double hmin = 1e300, hmax = -1e300, vmin = 1e300, vmax = -1e300;
        for (const Point& p : poly) {
            hmin = std::min(hmin, p.h);
            hmax = std::max(hmax, p.h);
            vmin = std::min(vmin, p.v);
            vmax = std::max(vmax, p.v);
        }
        const int x0 = std::max(0, static_cast<int>(std::floor(hmin)));
        const int x1 = std::min(o.width - 1, static_cast<int>(std::floor(hmax)));
        const int y0 = std::max(0, static_cast<int>(std::floor(vmin)));
        const int y1 = std::min(o.height - 1, static_cast<int>(std::floor(vmax)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                int hits = 0;
                for (int sy = 0; sy < ss; ++sy)
                    for (int sx = 0; sx < ss; ++sx)
                        if (inside(poly, x + (sx + 0.5) * sub, y + (sy + 0.5) * sub)) ++hits;
                img.at(x, y) += hits * per_sample;
            }
        }
    }

    if (o.noise_level > 0.0) {
        std::mt19937_64 rng(o.seed);
        std::normal_distribution<double> gauss(0.0, o.noise_level);
        for (double& p : img.pixels) p += gauss(rng);
    }
    for (double& p : img.pixels) p = std::clamp(p, 0.0, 1.0);
    return img;
}

HogLayout hog_layout(int width, int height, const HogOptions& o) {
    if (o.cell <= 0 || o.block <= 0 || o.bins <= 0) throw ParameterError("hog: cell, block and bins must be positive");
    if (width % o.cell != 0 || height % o.cell != 0) {
        throw ShapeError("hog: image " + std::to_string(width) + "x" + std::to_string(height) +
                         " is not divisible by the cell size " + std::to_string(o.cell));
    }
    HogLayout l;
    l.cells_x = width / o.cell;
    l.cells_y = height / o.cell;
    l.block = o.block;
    l.bins = o.bins;
    l.blocks_x = l.cells_x - o.block + 1;
    l.blocks_y = l.cells_y - o.block + 1;
    if (l.blocks_x <= 0 || l.blocks_y <= 0) throw ShapeError("hog: image smaller than one block");
    return l;
}

HogDescriptor hog(const GrayImage& image, const HogOptions& o) {
    const HogLayout layout = hog_layout(image.width, image.height, o);
    const int W = image.width;
    const int H = image.height;
    const double bin_width = 180.0 / o.bins;

    // Per-cell orientation histograms, cell-major then bin.
    std::vector<double> cells(static_cast<std::size_t>(layout.cells_x) * layout.cells_y * o.bins, 0.0);
    auto cell_bin = [&](int cx, int cy, int b) -> double& {
        return cells[(static_cast<std::size_t>(cy) * layout.cells_x + cx) * o.bins + b];
    };

    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double gx = image.at(std::min(x + 1, W - 1), y) - image.at(std::max(x - 1, 0), y);
            const double gy = image.at(x, std::min(y + 1, H - 1)) - image.at(x, std::max(y - 1, 0));
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;
            double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
            if (angle < 0.0) angle += 180.0;
            if (angle >= 180.0) angle -= 180.0;
            const double pos = angle / bin_width;
            int b0 = static_cast<int>(std::floor(pos));
            const double fb = pos - b0;
            b0 %= o.bins;
            const int b1 = (b0 + 1) % o.bins;

            const double fx = (x + 0.5) / o.cell - 0.5;
            const double fy = (y + 0.5) / o.cell - 0.5;
            const int cx0 = static_cast<int>(std::floor(fx));
            const int cy0 = static_cast<int>(std::floor(fy));
            const double wx = fx - cx0;
            const double wy = fy - cy0;
            for (int dy = 0; dy < 2; ++dy) {
                const int cy = cy0 + dy;
                if (cy < 0 || cy >= layout.cells_y) continue;
                const double wyy = dy ? wy : 1.0 - wy;
                for (int dx = 0; dx < 2; ++dx) {
                    const int cx = cx0 + dx;
                    if (cx < 0 || cx >= layout.cells_x) continue;
                    const double w = mag * wyy * (dx ? wx : 1.0 - wx);
                    cell_bin(cx, cy, b0) += w * (1.0 - fb);
                    cell_bin(cx, cy, b1) += w * fb;
                }
            }
        }
    }

    HogDescriptor d;
    d.layout = layout;
    d.values.resize(layout.length());
    const std::size_t block_len = static_cast<std::size_t>(o.block) * o.block * o.bins;
    std::size_t offset = 0;
    for (int by = 0; by < layout.blocks_y; ++by) {
        for (int bx = 0; bx < layout.blocks_x; ++bx) {
            std::size_t k = offset;
            for (int cy = by; cy < by + o.block; ++cy)
                for (int cx = bx; cx < bx + o.block; ++cx)
                    for (int b = 0; b < o.bins; ++b) d.values[k++] = cell_bin(cx, cy, b);
            normalize(std::span<double>(d.values.data() + offset, block_len), o.clip);
            offset += block_len;
        }
    }
    return d;
}

}  // namespace s2vr::features

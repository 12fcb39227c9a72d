#pragma once

#include "s2vr/geometry.hpp"

#include <cstdint>
#include <vector>

namespace s2vr::features {

/// Row-major grayscale image with intensities in [0, 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0);

    [[nodiscard]] double at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

struct RenderOptions {
    int width = 64;
    int height = 256;
    double noise_level = 0.02;  ///< std of additive Gaussian pixel noise
    double background = 0.2;
    double foreground = 0.8;
    int supersample = 4;        ///< sub-pixel samples per axis
    std::uint64_t seed = 0;
};

/// Filled vertebra quadrilaterals over a flat background, plus seeded Gaussian noise.
GrayImage render(const geometry::SpineAnnotation& annotation, const RenderOptions& options = {});

struct HogOptions {
    int cell = 8;    ///< pixels per cell side
    int block = 2;   ///< cells per block side (stride one cell)
    int bins = 9;    ///< unsigned orientation bins over [0, 180)
    double clip = 0.2;
};

struct HogLayout {
    int cells_x = 0;
    int cells_y = 0;
    int blocks_x = 0;
    int blocks_y = 0;
    int block = 0;
    int bins = 0;

    [[nodiscard]] std::size_t length() const {
        return static_cast<std::size_t>(blocks_x) * blocks_y * block * block * bins;
    }
};

struct HogDescriptor {
    std::vector<double> values;
    HogLayout layout;
};

/// Throws ShapeError if the image does not tile into whole cells or blocks.
HogLayout hog_layout(int width, int height, const HogOptions& options = {});

/// Histogram of oriented gradients: central-difference gradients, votes split linearly
/// between the two nearest orientation bins and bilinearly between the four nearest cell
/// centers, L2 block normalization with clipping and renormalization.
HogDescriptor hog(const GrayImage& image, const HogOptions& options = {});

}  // namespace s2vr::features

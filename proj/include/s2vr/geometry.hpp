#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace s2vr::geometry {

inline constexpr int kVertebrae = 17;
inline constexpr int kCornersPerVertebra = 4;
inline constexpr int kLandmarks = kVertebrae * kCornersPerVertebra;  // c = 68
inline constexpr int kAngles = 3;
inline constexpr int kLabelSize = 2 * kLandmarks + kAngles;          // q = 2c + 3 = 139

struct Point {
    double h = 0.0;  ///< horizontal image coordinate (pixels)
    double v = 0.0;  ///< vertical image coordinate, increasing downwards
};

/// Corners of one vertebra: top-left, top-right, bottom-left, bottom-right.
using Vertebra = std::array<Point, kCornersPerVertebra>;

/// Thoracic + lumbar Cobb angles in degrees, top to bottom.
struct CobbAngles {
    double ta = 0.0;
    double ma = 0.0;
    double ba = 0.0;

    [[nodiscard]] std::array<double, 3> as_array() const { return {ta, ma, ba}; }
};

struct SpineAnnotation {
    std::vector<Vertebra> vertebrae;  ///< ordered top to bottom
    CobbAngles angles;
};

/// One lateral-offset term A sin(pi * frequency * t + phase), t in [0, 1] along the spine.
struct CurveTerm {
    double amplitude = 0.0;  ///< pixels
    double frequency = 1.0;  ///< half-waves over the spine length
    double phase = 0.0;      ///< radians
};

struct SpineShapeParams {
    std::vector<CurveTerm> curve;      ///< 0 to 3 terms
    double center_h = 32.0;            ///< horizontal position of the straight spine axis
    double top_v = 12.0;               ///< vertical position of the first vertebra's top edge
    double vertebra_height = 10.0;
    double vertebra_width = 20.0;
    double gap = 4.0;                  ///< vertical spacing between consecutive vertebrae
    double rotation_jitter_deg = 0.0;  ///< global rotation drawn uniformly from [-j, j]
    double landmark_noise = 0.0;       ///< std of per-corner Gaussian jitter (pixels)
    std::uint64_t seed = 0;
};

/// Ranges for drawing random spine shapes.
struct SpineSampler {
    int terms = 2;
    double max_amplitude = 10.0;
    double phase_jitter = 0.3;
    double rotation_jitter_deg = 1.0;
    double landmark_noise = 0.0;
    SpineShapeParams base{};
};

/// Deterministic random shape parameters for `seed`. Redraws internally until the spine
/// has no overlapping vertebrae.
SpineShapeParams random_spine_params(std::uint64_t seed, const SpineSampler& sampler = {});

/// Builds the 17 vertebrae from the curve and fills the angles from cobb_from_landmarks.
/// Throws ParameterError if adjacent vertebrae overlap.
SpineAnnotation generate_spine(const SpineShapeParams& params);

/// Signed tilt of one vertebra in degrees: mean of the top-edge and bottom-edge angles
/// versus the horizontal.
double vertebra_slope(const Vertebra& corners);

/// Most-tilted-vertebra rule. MA is the largest pairwise slope difference (i* < j*), TA the
/// largest difference against i* from above it, BA against j* from below it.
CobbAngles cobb_from_landmarks(std::span<const Vertebra> vertebrae);

/// Flattened label vector [h_1..h_68, v_1..v_68, TA, MA, BA].
Eigen::VectorXd to_label(const SpineAnnotation& annotation);
SpineAnnotation from_label(const Eigen::VectorXd& label);

/// |predicted angles - cobb_from_landmarks(predicted landmarks)| for a full label column.
std::array<double, 3> consistency_gap(const Eigen::VectorXd& prediction);

/// True if the two convex quadrilaterals intersect (separating-axis test).
bool quads_overlap(const Vertebra& a, const Vertebra& b);

}  // namespace s2vr::geometry

#include "s2vr/geometry.hpp"

#include "s2vr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace s2vr::geometry {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

// Edge angle versus the horizontal, folded into (-90, 90].
double edge_angle(const Point& from, const Point& to) {
    const double dh = to.h - from.h;
    const double dv = to.v - from.v;
    if (dh == 0.0 && dv == 0.0) throw GeometryError("vertebra_slope: coincident corners");
    double a = std::atan2(dv, dh) * kDegPerRad;
    if (a > 90.0) a -= 180.0;
    if (a <= -90.0) a += 180.0;
    return a;
}

// Corners in polygon order (TL, TR, BR, BL).
std::array<Point, 4> polygon(const Vertebra& v) {
    return {v[0], v[1], v[3], v[2]};
}

bool separated_along_edges(const std::array<Point, 4>& a, const std::array<Point, 4>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const Point& p = a[i];
        const Point& r = a[(i + 1) % a.size()];
        const double nh = -(r.v - p.v);
        const double nv = r.h - p.h;
        double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
        for (const Point& x : a) {
            const double s = x.h * nh + x.v * nv;
            amin = std::min(amin, s);
            amax = std::max(amax, s);
        }
        for (const Point& x : b) {
            const double s = x.h * nh + x.v * nv;
            bmin = std::min(bmin, s);
            bmax = std::max(bmax, s);
        }
        if (amax <= bmin || bmax <= amin) return true;
    }
    return false;
}

}  // namespace

bool quads_overlap(const Vertebra& a, const Vertebra& b) {
    const auto pa = polygon(a);
    const auto pb = polygon(b);
    return !separated_along_edges(pa, pb) && !separated_along_edges(pb, pa);
}

SpineAnnotation generate_spine(const SpineShapeParams& p) {
    if (p.curve.size() > 3) throw ParameterError("generate_spine: at most 3 curve terms");
    if (!(p.vertebra_height > 0.0) || !(p.vertebra_width > 0.0) || !(p.gap >= 0.0)) {
        throw ParameterError("generate_spine: vertebra dimensions must be positive");
    }
    if (p.rotation_jitter_deg < 0.0 || p.landmark_noise < 0.0) {
        throw ParameterError("generate_spine: jitter and noise must be nonnegative");
    }

    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double rotation = p.rotation_jitter_deg * unit(rng) / kDegPerRad;

    const double pitch = p.vertebra_height + p.gap;
    const double length = kVertebrae * p.vertebra_height + (kVertebrae - 1) * p.gap;
    const double pivot_h = p.center_h;
    const double pivot_v = p.top_v + 0.5 * length;
    const double cr = std::cos(rotation);
    const double sr = std::sin(rotation);

    SpineAnnotation out;
    out.vertebrae.resize(kVertebrae);
    for (int k = 0; k < kVertebrae; ++k) {
        const double vc = p.top_v + k * pitch + 0.5 * p.vertebra_height;
        const double t = (vc - p.top_v) / length;
        double offset = 0.0;
        double dxdv = 0.0;
        for (const CurveTerm& term : p.curve) {
            const double arg = std::numbers::pi * term.frequency * t + term.phase;
            offset += term.amplitude * std::sin(arg);
            dxdv += term.amplitude * std::numbers::pi * term.frequency / length * std::cos(arg);
        }
        const double hc = p.center_h + offset;
        // Endplates are perpendicular to the local spine tangent (dx/dv, 1).
        const double tilt = -std::atan(dxdv);
        const double ct = std::cos(tilt);
        const double st = std::sin(tilt);
        const double hw = 0.5 * p.vertebra_width;
        const double hh = 0.5 * p.vertebra_height;
        const std::array<std::array<double, 2>, 4> local = {{{-hw, -hh}, {hw, -hh}, {-hw, hh}, {hw, hh}}};
        for (int c = 0; c < kCornersPerVertebra; ++c) {
            const double lh = ct * local[c][0] - st * local[c][1];
            const double lv = st * local[c][0] + ct * local[c][1];
            double h = hc + lh;
            double v = vc + lv;
            const double dh = h - pivot_h;
            const double dv = v - pivot_v;
            h = pivot_h + cr * dh - sr * dv;
            v = pivot_v + sr * dh + cr * dv;
            if (p.landmark_noise > 0.0) {
                h += p.landmark_noise * gauss(rng);
                v += p.landmark_noise * gauss(rng);
            }
            out.vertebrae[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = {h, v};
        }
    }

    for (int k = 0; k + 1 < kVertebrae; ++k) {
        const auto& a = out.vertebrae[static_cast<std::size_t>(k)];
        const auto& b = out.vertebrae[static_cast<std::size_t>(k + 1)];
        const double va = 0.25 * (a[0].v + a[1].v + a[2].v + a[3].v);
        const double vb = 0.25 * (b[0].v + b[1].v + b[2].v + b[3].v);
        if (!(vb > va)) throw ParameterError("generate_spine: vertebra centers not increasing at " + std::to_string(k));
        if (quads_overlap(a, b)) {
            throw ParameterError("generate_spine: vertebrae " + std::to_string(k) + " and " + std::to_string(k + 1) +
                                 " overlap");
        }
    }
    out.angles = cobb_from_landmarks(out.vertebrae);
    return out;
}

SpineShapeParams random_spine_params(std::uint64_t seed, const SpineSampler& sampler) {
    if (sampler.terms < 0 || sampler.terms > 3) throw ParameterError("random_spine_params: terms must be in [0, 3]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        SpineShapeParams p = sampler.base;
        p.rotation_jitter_deg = sampler.rotation_jitter_deg;
        p.landmark_noise = sampler.landmark_noise;
        p.seed = rng();
        p.curve.clear();
        for (int k = 1; k <= sampler.terms; ++k) {
            CurveTerm term;
            term.frequency = k;
            term.amplitude = sampler.max_amplitude / k * unit(rng);
            term.phase = sampler.phase_jitter * unit(rng);
            p.curve.push_back(term);
        }
        try {
            (void)generate_spine(p);
            return p;
        } catch (const ParameterError&) {
            // overlapping draw; try again
        }
    }
    throw ParameterError("random_spine_params: could not draw a non-overlapping spine");
}

double vertebra_slope(const Vertebra& c) {
    const double top = edge_angle(c[0], c[1]);
    const double bottom = edge_angle(c[2], c[3]);
    return 0.5 * (top + bottom);
}

CobbAngles cobb_from_landmarks(std::span<const Vertebra> vertebrae) {
    if (vertebrae.size() != static_cast<std::size_t>(kVertebrae)) {
        throw ShapeError("cobb_from_landmarks: expected " + std::to_string(kVertebrae) + " vertebrae, got " +
                         std::to_string(vertebrae.size()));
    }
    std::array<double, kVertebrae> s{};
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = vertebra_slope(vertebrae[k]);

    std::size_t top = 0;
    std::size_t bottom = 0;
    double ma = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = i + 1; j < s.size(); ++j) {
            const double d = std::abs(s[i] - s[j]);
            if (d > ma) {
                ma = d;
                top = i;
                bottom = j;
            }
        }
    }
    double ta = 0.0;
    for (std::size_t k = 0; k <= top; ++k) ta = std::max(ta, std::abs(s[k] - s[top]));
    double ba = 0.0;
    for (std::size_t k = bottom; k < s.size(); ++k) ba = std::max(ba, std::abs(s[k] - s[bottom]));
    return {ta, ma, ba};
}

Eigen::VectorXd to_label(const SpineAnnotation& a) {
    if (a.vertebrae.size() != static_cast<std::size_t>(kVertebrae)) throw ShapeError("to_label: need 17 vertebrae");
    Eigen::VectorXd y(kLabelSize);
    for (int k = 0; k < kVertebrae; ++k) {
        for (int c = 0; c < kCornersPerVertebra; ++c) {
            const int l = k * kCornersPerVertebra + c;
            const Point& p = a.vertebrae[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];
            y[l] = p.h;
            y[kLandmarks + l] = p.v;
        }
    }
    y[2 * kLandmarks] = a.angles.ta;
    y[2 * kLandmarks + 1] = a.angles.ma;
    y[2 * kLandmarks + 2] = a.angles.ba;
    return y;
}

SpineAnnotation from_label(const Eigen::VectorXd& y) {
    if (y.size() != kLabelSize) {
        throw ShapeError("from_label: expected " + std::to_string(kLabelSize) + " values, got " +
                         std::to_string(y.size()));
    }
    SpineAnnotation a;
    a.vertebrae.resize(kVertebrae);
    for (int k = 0; k < kVertebrae; ++k) {
        for (int c = 0; c < kCornersPerVertebra; ++c) {
            const int l = k * kCornersPerVertebra + c;
            a.vertebrae[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)] = {y[l], y[kLandmarks + l]};
        }
    }
    a.angles = {y[2 * kLandmarks], y[2 * kLandmarks + 1], y[2 * kLandmarks + 2]};
    return a;
}

std::array<double, 3> consistency_gap(const Eigen::VectorXd& prediction) {
    if (prediction.size() != kLabelSize) {
        throw ModeError("consistency_gap: needs a joint prediction with " + std::to_string(kLabelSize) +
                        " outputs, got " + std::to_string(prediction.size()));
    }
    const SpineAnnotation a = from_label(prediction);
    const CobbAngles measured = cobb_from_landmarks(a.vertebrae);
    return {std::abs(a.angles.ta - measured.ta), std::abs(a.angles.ma - measured.ma),
            std::abs(a.angles.ba - measured.ba)};
}

}  // namespace s2vr::geometry

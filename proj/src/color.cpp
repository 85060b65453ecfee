#include "flowdeid/color.hpp"

#include <algorithm>
#include <cmath>

namespace flowdeid {

namespace {

constexpr double kEps = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

// D65 reference white, Y normalized to 1.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.00000;
constexpr double kZn = 1.08883;

// sRGB D65 linear-light matrices.
constexpr double kRgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};
constexpr double kXyzToRgb[3][3] = {
    {3.2404542, -1.5371385, -0.4985314},
    {-0.9692660, 1.8760108, 0.0415560},
    {0.0556434, -0.2040259, 1.0572252},
};

inline double srgb_decode(double c) {
    return c > 0.04045 ? std::pow((c + 0.055) / 1.055, 2.4) : c / 12.92;
}

inline double srgb_encode(double c) {
    return c > 0.0031308 ? 1.055 * std::pow(c, 1.0 / 2.4) - 0.055 : 12.92 * c;
}

inline double lab_f(double t) {
    return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

inline std::uint8_t quantize8(double v) {
    const double scaled = std::round(v * 255.0);
    return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

}  // namespace

void srgb_pixel_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8,
                       double& L_out, double& a_out, double& b_out) {
    const double r = srgb_decode(r8 / 255.0);
    const double g = srgb_decode(g8 / 255.0);
    const double b = srgb_decode(b8 / 255.0);

    const double x = kRgbToXyz[0][0] * r + kRgbToXyz[0][1] * g + kRgbToXyz[0][2] * b;
    const double y = kRgbToXyz[1][0] * r + kRgbToXyz[1][1] * g + kRgbToXyz[1][2] * b;
    const double z = kRgbToXyz[2][0] * r + kRgbToXyz[2][1] * g + kRgbToXyz[2][2] * b;

    const double fx = lab_f(x / kXn);
    const double fy = lab_f(y / kYn);
    const double fz = lab_f(z / kZn);

    L_out = 116.0 * fy - 16.0;
    a_out = 500.0 * (fx - fy);
    b_out = 200.0 * (fy - fz);
}

void lab_pixel_to_srgb(double L, double a, double b,
                       std::uint8_t& r_out, std::uint8_t& g_out, std::uint8_t& b_out) {
    const double fy = (L + 16.0) / 116.0;
    const double fx = fy + a / 500.0;
    const double fz = fy - b / 200.0;

    const double fx3 = fx * fx * fx;
    const double fz3 = fz * fz * fz;
    const double xr = fx3 > kEps ? fx3 : (116.0 * fx - 16.0) / kKappa;
    const double yr = L > kKappa * kEps ? fy * fy * fy : L / kKappa;
    const double zr = fz3 > kEps ? fz3 : (116.0 * fz - 16.0) / kKappa;

    const double x = xr * kXn;
    const double y = yr * kYn;
    const double z = zr * kZn;

    const double rl = kXyzToRgb[0][0] * x + kXyzToRgb[0][1] * y + kXyzToRgb[0][2] * z;
    const double gl = kXyzToRgb[1][0] * x + kXyzToRgb[1][1] * y + kXyzToRgb[1][2] * z;
    const double bl = kXyzToRgb[2][0] * x + kXyzToRgb[2][1] * y + kXyzToRgb[2][2] * z;

    r_out = quantize8(srgb_encode(rl));
    g_out = quantize8(srgb_encode(gl));
    b_out = quantize8(srgb_encode(bl));
}

LabImage srgb_to_lab(const RgbImage& img) {
    LabImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        double L, a, b;
        srgb_pixel_to_lab(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2], L, a, b);
        out.L[i] = static_cast<float>(L);
        out.a[i] = static_cast<float>(a);
        out.b[i] = static_cast<float>(b);
    }
    return out;
}

RgbImage lab_to_srgb(const LabImage& img) {
    RgbImage out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        lab_pixel_to_srgb(img.L[i], img.a[i], img.b[i],
                          out.data[3 * i], out.data[3 * i + 1], out.data[3 * i + 2]);
    }
    return out;
}

std::uint8_t offset_a_star_value(double a_star) {
    const double shifted = a_star + 128.0;
    // round half away from zero, then clamp
    const double rounded = shifted >= 0.0 ? std::floor(shifted + 0.5) : std::ceil(shifted - 0.5);
    return static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
}

AStarPlane a_star_offset(const LabImage& img) {
    AStarPlane out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        out.values[i] = offset_a_star_value(img.a[i]);
    }
    return out;
}

DiffMap a_diff_map(const RgbImage& path, const RgbImage& healthy) {
    require_same_shape(path, healthy, "a_diff_map");
    DiffMap out(path.width, path.height);
    const std::size_t n = path.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        double Lp, ap, bp, Lh, ah, bh;
        srgb_pixel_to_lab(path.data[3 * i], path.data[3 * i + 1], path.data[3 * i + 2], Lp, ap, bp);
        srgb_pixel_to_lab(healthy.data[3 * i], healthy.data[3 * i + 1], healthy.data[3 * i + 2], Lh, ah, bh);
        out.values[i] = static_cast<float>(std::abs(ap - ah));
    }
    return out;
}

AStarPlane a_star_plane_of(const RgbImage& img) {
    AStarPlane out(img.width, img.height);
    const std::size_t n = img.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        double L, a, b;
        srgb_pixel_to_lab(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2], L, a, b);
        out.values[i] = offset_a_star_value(a);
    }
    return out;
}

}  // namespace flowdeid

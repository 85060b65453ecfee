#pragma once

#include "flowdeid/types.hpp"

namespace flowdeid {

// CIE 1976 L*a*b* under D65 (Xn=95.047, Yn=100.000, Zn=108.883), sRGB
// piecewise transfer with the 0.04045 / 0.0031308 thresholds and the
// eps=216/24389, kappa=24389/27 f-function constants. All math is double
// internally; planes store float.

// Scalar conversion of one pixel; the image kernels map this per pixel.
void srgb_pixel_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b,
                       double& L_out, double& a_out, double& b_out);
void lab_pixel_to_srgb(double L, double a, double b,
                       std::uint8_t& r_out, std::uint8_t& g_out, std::uint8_t& b_out);

LabImage srgb_to_lab(const RgbImage& img);

// Inverse of srgb_to_lab; out-of-gamut channels clamp to [0,255].
RgbImage lab_to_srgb(const LabImage& img);

// round(a* + 128) half away from zero, clamped to [0,255].
AStarPlane a_star_offset(const LabImage& img);

std::uint8_t offset_a_star_value(double a_star);

// Per-pixel |a*(path) - a*(healthy)| on unoffset float a* planes.
// Throws std::invalid_argument on dimension mismatch.
DiffMap a_diff_map(const RgbImage& path, const RgbImage& healthy);

// Convenience: the offset a* plane of an sRGB image.
AStarPlane a_star_plane_of(const RgbImage& img);

}  // namespace flowdeid

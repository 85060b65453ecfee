#pragma once

#include <span>
#include <utility>
#include <vector>

#include "flowdeid/types.hpp"

namespace flowdeid {

// Bit set iff diff(p) > theta, strictly.
BinaryMask threshold_mask(const DiffMap& diff, double theta);

// |intersection| / |union|; two empty masks agree perfectly -> 1.0.
double iou(const BinaryMask& m1, const BinaryMask& m2);

struct CalibrationResult {
    double theta_star = 0.0;
    double best_iou = 0.0;
    std::vector<std::pair<double, double>> curve;  // (theta, iou), grid order
};

// Half-integer grid 0.5, 1.5, ..., 254.5 over the a* difference scale.
std::vector<double> default_theta_grid();

// Evaluates IoU(reference, threshold_mask(diff, theta)) over the whole grid.
// theta_star is the smallest grid point attaining the maximum. The grid must
// be nonempty and strictly increasing.
CalibrationResult calibrate_threshold(const DiffMap& diff, const BinaryMask& reference,
                                      const std::vector<double>& grid);

// Cohort mode: one theta maximizing the mean IoU over all (diff, reference)
// pairs. Same tie-breaking rule.
CalibrationResult calibrate_threshold_cohort(std::span<const DiffMap> diffs,
                                             std::span<const BinaryMask> references,
                                             const std::vector<double>& grid);

// Intersection white, orig-only green, syn-only magenta, rest the base pixel
// dimmed by kOverlayDim.
inline constexpr double kOverlayDim = 0.4;
RgbImage overlay_composite(const BinaryMask& m_orig, const BinaryMask& m_syn, const RgbImage& base);

struct StabilitySummary {
    double mean_iou = 0.0;
    double std_iou = 0.0;  // population std over the pair values
    int pair_count = 0;
};

// Mean and std over all unordered pairs' IoU. Needs >= 2 masks.
StabilitySummary mask_stability(const std::vector<BinaryMask>& masks);

}  // namespace flowdeid

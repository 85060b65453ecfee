#include "flowdeid/mask.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace flowdeid {

namespace {

void validate_grid(const std::vector<double>& grid) {
    if (grid.empty()) throw std::invalid_argument("calibrate_threshold: empty grid");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (!(grid[i] > grid[i - 1]))
            throw std::invalid_argument("calibrate_threshold: grid must be strictly increasing");
}

// Counts for IoU of reference against diff > theta without materializing the mask.
void intersection_union_counts(const DiffMap& diff, const BinaryMask& reference, double theta,
                               std::uint64_t& inter, std::uint64_t& uni) {
    inter = 0;
    uni = 0;
    const std::size_t n = diff.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const bool pred = diff.values[i] > theta;
        const bool ref = reference.bits[i] != 0;
        inter += (pred && ref) ? 1 : 0;
        uni += (pred || ref) ? 1 : 0;
    }
}

}  // namespace

BinaryMask threshold_mask(const DiffMap& diff, double theta) {
    if (theta < 0.0) throw std::invalid_argument("threshold_mask: theta must be >= 0");
    BinaryMask out(diff.width, diff.height);
    const std::size_t n = diff.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        out.bits[i] = diff.values[i] > theta ? 1 : 0;
    }
    return out;
}

double iou(const BinaryMask& m1, const BinaryMask& m2) {
    require_same_shape(m1, m2, "iou");
    std::uint64_t inter = 0, uni = 0;
    const std::size_t n = m1.pixel_count();
#pragma omp parallel for schedule(static) reduction(+ : inter, uni)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const bool a = m1.bits[i] != 0;
        const bool b = m2.bits[i] != 0;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    if (uni == 0) return 1.0;  // agreement on absence
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> default_theta_grid() {
    std::vector<double> grid;
    grid.reserve(255);
    for (int i = 0; i < 255; ++i) grid.push_back(i + 0.5);
    return grid;
}

CalibrationResult calibrate_threshold(const DiffMap& diff, const BinaryMask& reference,
                                      const std::vector<double>& grid) {
    validate_grid(grid);
    require_same_shape(diff, reference, "calibrate_threshold");

    const int g = static_cast<int>(grid.size());
    std::vector<double> ious(g, 0.0);
// Each grid point is independent; counts are integers, so the parallel sweep
// is bit-identical to a serial one.
#pragma omp parallel for schedule(static)
    for (int k = 0; k < g; ++k) {
        std::uint64_t inter, uni;
        intersection_union_counts(diff, reference, grid[k], inter, uni);
        ious[k] = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }

    CalibrationResult res;
    res.curve.reserve(g);
    int best = 0;
    for (int k = 0; k < g; ++k) {
        res.curve.emplace_back(grid[k], ious[k]);
        if (ious[k] > ious[best]) best = k;  // strict: keeps the smallest argmax
    }
    res.theta_star = grid[best];
    res.best_iou = ious[best];
    return res;
}

CalibrationResult calibrate_threshold_cohort(std::span<const DiffMap> diffs,
                                             std::span<const BinaryMask> references,
                                             const std::vector<double>& grid) {
    validate_grid(grid);
    if (diffs.empty() || diffs.size() != references.size())
        throw std::invalid_argument("calibrate_threshold_cohort: need equal, nonempty diff/reference lists");
    for (std::size_t i = 0; i < diffs.size(); ++i)
        require_same_shape(diffs[i], references[i], "calibrate_threshold_cohort");

    const int g = static_cast<int>(grid.size());
    std::vector<double> mean_ious(g, 0.0);
#pragma omp parallel for schedule(static)
    for (int k = 0; k < g; ++k) {
        double sum = 0.0;
        for (std::size_t i = 0; i < diffs.size(); ++i) {
            std::uint64_t inter, uni;
            intersection_union_counts(diffs[i], references[i], grid[k], inter, uni);
            sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        }
        mean_ious[k] = sum / static_cast<double>(diffs.size());
    }

    CalibrationResult res;
    res.curve.reserve(g);
    int best = 0;
    for (int k = 0; k < g; ++k) {
        res.curve.emplace_back(grid[k], mean_ious[k]);
        if (mean_ious[k] > mean_ious[best]) best = k;
    }
    res.theta_star = grid[best];
    res.best_iou = mean_ious[best];
    return res;
}

RgbImage overlay_composite(const BinaryMask& m_orig, const BinaryMask& m_syn, const RgbImage& base) {
    require_same_shape(m_orig, m_syn, "overlay_composite");
    require_same_shape(m_orig, base, "overlay_composite");

    RgbImage out(base.width, base.height);
    const std::size_t n = base.pixel_count();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const bool o = m_orig.bits[i] != 0;
        const bool s = m_syn.bits[i] != 0;
        std::uint8_t* px = out.data.data() + 3 * i;
        if (o && s) {
            px[0] = px[1] = px[2] = 255;  // intersection: white
        } else if (o) {
            px[0] = 0; px[1] = 200; px[2] = 0;  // original-only: green
        } else if (s) {
            px[0] = 230; px[1] = 0; px[2] = 230;  // synthetic-only: magenta
        } else {
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<std::uint8_t>(std::round(base.data[3 * i + c] * kOverlayDim));
        }
    }
    return out;
}

StabilitySummary mask_stability(const std::vector<BinaryMask>& masks) {
    if (masks.size() < 2) throw std::invalid_argument("mask_stability: need at least 2 masks");
    for (std::size_t i = 1; i < masks.size(); ++i)
        require_same_shape(masks[0], masks[i], "mask_stability");

    std::vector<double> pair_ious;
    pair_ious.reserve(masks.size() * (masks.size() - 1) / 2);
    for (std::size_t i = 0; i < masks.size(); ++i)
        for (std::size_t j = i + 1; j < masks.size(); ++j)
            pair_ious.push_back(iou(masks[i], masks[j]));

    double mean = 0.0;
    for (double v : pair_ious) mean += v;
    mean /= static_cast<double>(pair_ious.size());
    double var = 0.0;
    for (double v : pair_ious) var += (v - mean) * (v - mean);
    var /= static_cast<double>(pair_ious.size());

    return {mean, std::sqrt(var), static_cast<int>(pair_ious.size())};
}

}  // namespace flowdeid

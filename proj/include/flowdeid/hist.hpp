#pragma once

#include <array>
#include <optional>

#include "flowdeid/types.hpp"

namespace flowdeid {

// Normalized density over the 256 offset-a* bins.
struct Histogram {
    std::array<double, 256> bins{};
};

// Count per bin / total counted pixels. With a restriction mask only set
// pixels are counted; an empty restriction is an error.
Histogram histogram(const AStarPlane& plane, const BinaryMask* restrict = nullptr);

// sum_i sqrt(p_i * q_i), in [0,1], 1 iff p == q.
double bhattacharyya(const Histogram& p, const Histogram& q);

// max_i |CDF_p(i) - CDF_q(i)| over binned CDFs.
double ks_statistic(const Histogram& p, const Histogram& q);

struct SummaryStats {
    double mean = 0.0;
    double stddev = 0.0;  // population std over bin centers weighted by density
    double peak_density = 0.0;
};

SummaryStats summary_stats(const Histogram& p);

struct DistComparison {
    double bhattacharyya = 0.0;
    double ks = 0.0;
    double mean_p = 0.0, mean_q = 0.0;
    double std_p = 0.0, std_q = 0.0;
    double peak_p = 0.0, peak_q = 0.0;
};

DistComparison compare_distributions(const Histogram& p, const Histogram& q);

// Static comparison figure: two overlaid histogram outlines on white.
RgbImage render_histogram_plot(const Histogram& p, const Histogram& q,
                               int width = 512, int height = 256);

}  // namespace flowdeid

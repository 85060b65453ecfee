#include "flowdeid/hist.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace flowdeid {

Histogram histogram(const AStarPlane& plane, const BinaryMask* restrict) {
    std::array<std::uint64_t, 256> counts{};
    std::uint64_t total = 0;

    const std::size_t n = plane.pixel_count();
    if (restrict) {
        require_same_shape(plane, *restrict, "histogram");
        for (std::size_t i = 0; i < n; ++i) {
            if (restrict->bits[i]) {
                ++counts[plane.values[i]];
                ++total;
            }
        }
        if (total == 0) throw std::invalid_argument("histogram: empty restriction mask");
    } else {
#pragma omp parallel
        {
            std::array<std::uint64_t, 256> local{};
#pragma omp for schedule(static) nowait
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) ++local[plane.values[i]];
#pragma omp critical(flowdeid_hist_merge)
            for (int b = 0; b < 256; ++b) counts[b] += local[b];
        }
        total = n;
        if (total == 0) throw std::invalid_argument("histogram: empty plane");
    }

    Histogram h;
    for (int b = 0; b < 256; ++b)
        h.bins[b] = static_cast<double>(counts[b]) / static_cast<double>(total);
    return h;
}

double bhattacharyya(const Histogram& p, const Histogram& q) {
    double s = 0.0;
    for (int b = 0; b < 256; ++b) s += std::sqrt(p.bins[b] * q.bins[b]);
    return s;
}

double ks_statistic(const Histogram& p, const Histogram& q) {
    double cp = 0.0, cq = 0.0, ks = 0.0;
    for (int b = 0; b < 256; ++b) {
        cp += p.bins[b];
        cq += q.bins[b];
        ks = std::max(ks, std::abs(cp - cq));
    }
    return ks;
}

SummaryStats summary_stats(const Histogram& p) {
    double mean = 0.0, peak = 0.0;
    for (int b = 0; b < 256; ++b) {
        mean += b * p.bins[b];
        peak = std::max(peak, p.bins[b]);
    }
    double var = 0.0;
    for (int b = 0; b < 256; ++b) var += (b - mean) * (b - mean) * p.bins[b];
    return {mean, std::sqrt(var), peak};
}

DistComparison compare_distributions(const Histogram& p, const Histogram& q) {
    const SummaryStats sp = summary_stats(p);
    const SummaryStats sq = summary_stats(q);
    DistComparison c;
    c.bhattacharyya = bhattacharyya(p, q);
    c.ks = ks_statistic(p, q);
    c.mean_p = sp.mean;
    c.mean_q = sq.mean;
    c.std_p = sp.stddev;
    c.std_q = sq.stddev;
    c.peak_p = sp.peak_density;
    c.peak_q = sq.peak_density;
    return c;
}

namespace {

void draw_outline(RgbImage& img, const Histogram& h, double y_scale,
                  std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int w = img.width, hh = img.height;
    auto bin_y = [&](int bin) {
        const double d = std::min(h.bins[bin] * y_scale, 1.0);
        return std::clamp(hh - 1 - static_cast<int>(std::round(d * (hh - 2))), 0, hh - 1);
    };
    auto put = [&](int x, int y) {
        if (x < 0 || x >= w || y < 0 || y >= hh) return;
        std::uint8_t* px = img.pixel(x, y);
        px[0] = r; px[1] = g; px[2] = b;
    };
    for (int bin = 0; bin < 256; ++bin) {
        const int x0 = bin * w / 256;
        const int x1 = std::max(x0 + 1, (bin + 1) * w / 256);
        const int y = bin_y(bin);
        for (int x = x0; x < x1; ++x) put(x, y);
        if (bin > 0) {  // vertical join to the previous bin level
            const int yp = bin_y(bin - 1);
            for (int yy = std::min(y, yp); yy <= std::max(y, yp); ++yy) put(x0, yy);
        }
    }
}

}  // namespace

RgbImage render_histogram_plot(const Histogram& p, const Histogram& q, int width, int height) {
    if (width < 64 || height < 32)
        throw std::invalid_argument("render_histogram_plot: canvas too small");
    RgbImage img(width, height);
    std::fill(img.data.begin(), img.data.end(), std::uint8_t{255});

    double peak = 1e-12;
    for (int b = 0; b < 256; ++b) peak = std::max({peak, p.bins[b], q.bins[b]});
    const double y_scale = 1.0 / peak;

    draw_outline(img, p, y_scale, 30, 60, 220);   // first distribution: blue
    draw_outline(img, q, y_scale, 220, 120, 20);  // second distribution: orange
    return img;
}

}  // namespace flowdeid

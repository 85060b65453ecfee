#pragma once

#include <cstdint>
#include <vector>

#include "flowdeid/flow.hpp"
#include "flowdeid/scene.hpp"
#include "flowdeid/types.hpp"

namespace flowdeid {

struct GuidanceParams {
    double gamma_src = 1.5;
    double gamma_tgt = 2.0;
    int steps = 50;
    double s_max = 0.9;  // starting noise level, in (0, 1]
    std::uint64_t noise_seed = 0;

    void validate() const {
        if (steps < 1) throw std::invalid_argument("GuidanceParams: steps must be >= 1");
        if (gamma_src < 0.0 || gamma_tgt < 0.0)
            throw std::invalid_argument("GuidanceParams: guidance scales must be >= 0");
        if (!(s_max > 0.0 && s_max <= 1.0))
            throw std::invalid_argument("GuidanceParams: s_max must be in (0, 1]");
    }
};

struct EditStep {
    double s = 0.0;                  // noise level at this step
    double displacement_norm = 0.0;  // |D| after the update
    double velocity_diff_norm = 0.0; // |v_tgt_hat - v_src_hat|
};
using EditTrace = std::vector<EditStep>;

// Mixed guidance field, all three velocities evaluated at the same (x, t):
//   v_hat = v_uncond + gamma_src * (v_src - v_uncond) + gamma_tgt * (v_tgt - v_uncond)
std::vector<double> guided_velocity(const VelocityNet& net, std::span<const double> x, double t,
                                    const Condition& c_src, const Condition& c_tgt,
                                    double gamma_src, double gamma_tgt, int identity_count);

struct EditResult {
    RgbImage image;
    EditTrace trace;
};

// Inversion-free edit: integrates the displacement D between the target and
// source branch velocities over descending noise levels. Each branch carries
// its own guidance scale (the source branch omits the target term and vice
// versa); with D = 0 the integrated difference reduces to the two guidance
// terms of the mixed field relative to the source drift. Per-step noise comes
// from substreams of noise_seed keyed by step index.
EditResult flow_edit(const VelocityNet& net, const SceneSpec& spec, const RgbImage& source,
                     const Condition& c_src, const Condition& c_tgt, const GuidanceParams& g);

struct DeidResult {
    RgbImage image;
    LatentCode anchor;  // z for downstream twin synthesis
    EditTrace trace;
};

// Identity edit with health preserved; rejects surrogate == source.
// The returned anchor derives from g.noise_seed.
DeidResult de_identify(const VelocityNet& net, const SceneSpec& spec, const RgbImage& original,
                       const Condition& src, const Condition& surrogate, const GuidanceParams& g);

// The anchor derivation shared by the trained and oracle pipelines.
LatentCode derive_anchor(std::uint64_t noise_seed, int state_dim);

}  // namespace flowdeid

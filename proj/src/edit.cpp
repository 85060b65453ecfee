#include "flowdeid/edit.hpp"

#include <cmath>

#include "flowdeid/rng.hpp"

namespace flowdeid {

std::vector<double> guided_velocity(const VelocityNet& net, std::span<const double> x, double t,
                                    const Condition& c_src, const Condition& c_tgt,
                                    double gamma_src, double gamma_tgt, int identity_count) {
    const std::vector<double> emb_uncond =
        condition_embedding(Condition{0, Health::pathological, true}, identity_count);
    const std::vector<double> emb_src = condition_embedding(c_src, identity_count);
    const std::vector<double> emb_tgt = condition_embedding(c_tgt, identity_count);

    std::vector<double> v_uncond(net.state_dim), v_src(net.state_dim), v_tgt(net.state_dim);
    net.forward(x, t, emb_uncond, v_uncond);
    net.forward(x, t, emb_src, v_src);
    net.forward(x, t, emb_tgt, v_tgt);

    std::vector<double> v(net.state_dim);
    for (int d = 0; d < net.state_dim; ++d) {
        v[d] = v_uncond[d] + gamma_src * (v_src[d] - v_uncond[d]) + gamma_tgt * (v_tgt[d] - v_uncond[d]);
        if (!std::isfinite(v[d])) throw DivergenceError("guided_velocity: non-finite model output");
    }
    return v;
}

EditResult flow_edit(const VelocityNet& net, const SceneSpec& spec, const RgbImage& source,
                     const Condition& c_src, const Condition& c_tgt, const GuidanceParams& g) {
    g.validate();
    if (source.width != spec.image_size || source.height != spec.image_size ||
        static_cast<int>(source.data.size()) != net.state_dim)
        throw std::invalid_argument("flow_edit: source dimensions do not match model");

    const int sd = net.state_dim;
    const std::vector<double> x_src = normalize_image(source);

    std::vector<double> displacement(sd, 0.0);
    std::vector<double> y(sd), z_tgt(sd), noise(sd);
    EditTrace trace;
    trace.reserve(g.steps);

    const double ds = g.s_max / g.steps;
    for (int k = 0; k < g.steps; ++k) {
        const double s = g.s_max - k * ds;
        const double t = 1.0 - s;  // t = 1 is data, s = 0 is data

        RandomStream ns = substream(g.noise_seed, "edit-noise", static_cast<std::uint64_t>(k));
        for (int d = 0; d < sd; ++d) noise[d] = ns.normal();

        for (int d = 0; d < sd; ++d) {
            y[d] = (1.0 - s) * x_src[d] + s * noise[d];
            z_tgt[d] = y[d] + displacement[d];
        }

        // Source branch: gamma_src only. Target branch: gamma_tgt only.
        const std::vector<double> v_src_hat =
            guided_velocity(net, y, t, c_src, c_tgt, g.gamma_src, 0.0, spec.identity_count);
        const std::vector<double> v_tgt_hat =
            guided_velocity(net, z_tgt, t, c_src, c_tgt, 0.0, g.gamma_tgt, spec.identity_count);

        double d_norm = 0.0, dv_norm = 0.0;
        for (int d = 0; d < sd; ++d) {
            const double dv = v_tgt_hat[d] - v_src_hat[d];
            displacement[d] += ds * dv;
            if (!std::isfinite(displacement[d])) throw DivergenceError("flow_edit: displacement diverged");
            d_norm += displacement[d] * displacement[d];
            dv_norm += dv * dv;
        }
        trace.push_back({s, std::sqrt(d_norm), std::sqrt(dv_norm)});
    }

    std::vector<double> result(sd);
    for (int d = 0; d < sd; ++d) result[d] = x_src[d] + displacement[d];

    return {denormalize_image(result, source.width, source.height), std::move(trace)};
}

LatentCode derive_anchor(std::uint64_t noise_seed, int state_dim) {
    return make_latent(derive_seed(noise_seed, "anchor"), state_dim);
}

DeidResult de_identify(const VelocityNet& net, const SceneSpec& spec, const RgbImage& original,
                       const Condition& src, const Condition& surrogate, const GuidanceParams& g) {
    if (surrogate.identity == src.identity)
        throw std::invalid_argument("de_identify: surrogate identity equals source identity");
    EditResult edit = flow_edit(net, spec, original, src, surrogate, g);
    return {std::move(edit.image), derive_anchor(g.noise_seed, net.state_dim), std::move(edit.trace)};
}

}  // namespace flowdeid

#include "flowdeid/scene.hpp"

#include <algorithm>
#include <cmath>

#include "flowdeid/rng.hpp"

namespace flowdeid {

namespace {

constexpr std::array<double, 3> kSkinBase = {204.0, 168.0, 146.0};
constexpr std::array<double, 3> kDotColor = {72.0, 46.0, 40.0};
constexpr std::array<double, 3> kPathologyColor = {212.0, 58.0, 52.0};
constexpr double kPathologyBlend = 0.8;
constexpr double kDotRadius = 0.045;
constexpr double kDotRing = 0.33;

// 4x4 supersampled coverage of a disk, pixel (ix, iy) in an S x S frame.
double disk_coverage(int ix, int iy, int S, double cx, double cy, double radius) {
    if (radius <= 0.0) return 0.0;
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
            const double x = (ix + (sx + 0.5) / 4.0) / S;
            const double y = (iy + (sy + 0.5) / 4.0) / S;
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy <= radius * radius) ++inside;
        }
    }
    return inside / 16.0;
}

double ellipse_coverage(int ix, int iy, int S, const EllipseSpec& e) {
    if (e.rx <= 0.0 || e.ry <= 0.0) return 0.0;
    int inside = 0;
    for (int sy = 0; sy < 4; ++sy) {
        for (int sx = 0; sx < 4; ++sx) {
            const double x = (ix + (sx + 0.5) / 4.0) / S;
            const double y = (iy + (sy + 0.5) / 4.0) / S;
            const double qx = (x - e.cx) / e.rx, qy = (y - e.cy) / e.ry;
            if (qx * qx + qy * qy <= 1.0) ++inside;
        }
    }
    return inside / 16.0;
}

inline void blend(double* px, const std::array<double, 3>& color, double w) {
    for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - w) + color[c] * w;
}

}  // namespace

nlohmann::json SceneSpec::to_json() const {
    return nlohmann::json{
        {"image_size", image_size},
        {"identity_count", identity_count},
        {"pathology", {{"cx", pathology.cx}, {"cy", pathology.cy}, {"rx", pathology.rx}, {"ry", pathology.ry}}},
        {"distractor",
         {{"cx", distractor.cx},
          {"cy", distractor.cy},
          {"radius", distractor.radius},
          {"color", {distractor.color[0], distractor.color[1], distractor.color[2]}}}},
        {"noise_amplitude", noise_amplitude},
    };
}

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
    SceneSpec s;
    s.image_size = j.at("image_size").get<int>();
    s.identity_count = j.at("identity_count").get<int>();
    const auto& p = j.at("pathology");
    s.pathology = {p.at("cx").get<double>(), p.at("cy").get<double>(), p.at("rx").get<double>(),
                   p.at("ry").get<double>()};
    const auto& d = j.at("distractor");
    s.distractor.cx = d.at("cx").get<double>();
    s.distractor.cy = d.at("cy").get<double>();
    s.distractor.radius = d.at("radius").get<double>();
    const auto& col = d.at("color");
    s.distractor.color = {col.at(0).get<std::uint8_t>(), col.at(1).get<std::uint8_t>(),
                          col.at(2).get<std::uint8_t>()};
    s.noise_amplitude = j.at("noise_amplitude").get<double>();
    if (s.image_size < 2) throw std::invalid_argument("SceneSpec: image_size must be >= 2");
    if (s.identity_count < 1) throw std::invalid_argument("SceneSpec: identity_count must be >= 1");
    return s;
}

std::uint64_t SceneSpec::hash() const {
    const std::string enc = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : enc) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

const char* to_string(Health h) { return h == Health::pathological ? "pathological" : "healthy"; }

std::vector<double> condition_embedding(const Condition& c, int identity_count) {
    if (c.identity < 0 || c.identity >= identity_count)
        throw std::invalid_argument("condition_embedding: identity index out of range");
    std::vector<double> emb(identity_count + 2, 0.0);
    if (!c.unconditional) {
        emb[c.identity] = 1.0;
        emb[identity_count + (c.health == Health::pathological ? 0 : 1)] = 1.0;
    }
    return emb;
}

LatentCode make_latent(std::uint64_t seed, int dim) {
    LatentCode z;
    z.seed = seed;
    z.vector.resize(dim);
    RandomStream s = substream(seed, "latent");
    for (int i = 0; i < dim; ++i) z.vector[i] = s.normal();
    return z;
}

double identity_gradient_angle(const SceneSpec& spec, int identity) {
    return 2.0 * M_PI * identity / spec.identity_count + 0.35;
}

std::pair<double, double> identity_dot_center(const SceneSpec& spec, int identity) {
    const double psi = 2.0 * M_PI * identity / spec.identity_count + 0.9;
    return {0.5 + kDotRing * std::cos(psi), 0.5 + kDotRing * std::sin(psi)};
}

RgbImage oracle_generate(const SceneSpec& spec, const LatentCode& z, const Condition& c) {
    if (c.identity < 0 || c.identity >= spec.identity_count)
        throw std::invalid_argument("oracle_generate: identity index out of range");

    const int S = spec.image_size;
    RgbImage img(S, S);

    // Jitter derives solely from z so twin renders share it pixel for pixel.
    std::vector<double> noise(spec.pixel_count() * 3);
    {
        RandomStream ns = substream(z.seed, "scene-noise");
        for (double& v : noise) v = ns.normal() * spec.noise_amplitude;
    }

    const double phi = identity_gradient_angle(spec, c.identity);
    const double gx = std::cos(phi), gy = std::sin(phi);
    const auto [dot_cx, dot_cy] = identity_dot_center(spec, c.identity);

#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < S; ++iy) {
        for (int ix = 0; ix < S; ++ix) {
            const std::size_t idx = static_cast<std::size_t>(iy) * S + ix;
            const double x = (ix + 0.5) / S, y = (iy + 0.5) / S;

            const double t = std::clamp(gx * (x - 0.5) + gy * (y - 0.5) + 0.5, 0.0, 1.0);
            const double shade = 0.82 + 0.36 * t;
            double px[3] = {kSkinBase[0] * shade, kSkinBase[1] * shade, kSkinBase[2] * shade};

            blend(px, kDotColor, disk_coverage(ix, iy, S, dot_cx, dot_cy, kDotRadius));

            const std::array<double, 3> distractor_color = {
                static_cast<double>(spec.distractor.color[0]),
                static_cast<double>(spec.distractor.color[1]),
                static_cast<double>(spec.distractor.color[2])};
            blend(px, distractor_color,
                  disk_coverage(ix, iy, S, spec.distractor.cx, spec.distractor.cy, spec.distractor.radius));

            if (c.health == Health::pathological) {
                blend(px, kPathologyColor, kPathologyBlend * ellipse_coverage(ix, iy, S, spec.pathology));
            }

            for (int ch = 0; ch < 3; ++ch) {
                const double v = std::round(px[ch] + noise[3 * idx + ch]);
                img.data[3 * idx + ch] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
    }
    return img;
}

BinaryMask oracle_ground_truth_mask(const SceneSpec& spec) {
    const int S = spec.image_size;
    BinaryMask m(S, S);
    const EllipseSpec& e = spec.pathology;
    if (e.rx <= 0.0 || e.ry <= 0.0) return m;
    for (int iy = 0; iy < S; ++iy) {
        for (int ix = 0; ix < S; ++ix) {
            const double x = (ix + 0.5) / S, y = (iy + 0.5) / S;
            const double qx = (x - e.cx) / e.rx, qy = (y - e.cy) / e.ry;
            m.bits[static_cast<std::size_t>(iy) * S + ix] = (qx * qx + qy * qy <= 1.0) ? 1 : 0;
        }
    }
    return m;
}

BinaryMask distractor_mask(const SceneSpec& spec) {
    const int S = spec.image_size;
    BinaryMask m(S, S);
    for (int iy = 0; iy < S; ++iy)
        for (int ix = 0; ix < S; ++ix)
            m.bits[static_cast<std::size_t>(iy) * S + ix] =
                disk_coverage(ix, iy, S, spec.distractor.cx, spec.distractor.cy, spec.distractor.radius) > 0.0
                    ? 1
                    : 0;
    return m;
}

BinaryMask identity_dot_mask(const SceneSpec& spec, int identity) {
    const auto [cx, cy] = identity_dot_center(spec, identity);
    const int S = spec.image_size;
    BinaryMask m(S, S);
    for (int iy = 0; iy < S; ++iy)
        for (int ix = 0; ix < S; ++ix)
            m.bits[static_cast<std::size_t>(iy) * S + ix] =
                disk_coverage(ix, iy, S, cx, cy, kDotRadius) > 0.0 ? 1 : 0;
    return m;
}

BinaryMask dilate(const BinaryMask& m, int radius) {
    BinaryMask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            bool any = false;
            for (int dy = -radius; dy <= radius && !any; ++dy) {
                for (int dx = -radius; dx <= radius && !any; ++dx) {
                    const int nx = x + dx, ny = y + dy;
                    if (nx >= 0 && nx < m.width && ny >= 0 && ny < m.height && m.get(nx, ny)) any = true;
                }
            }
            out.set(x, y, any);
        }
    }
    return out;
}

}  // namespace flowdeid

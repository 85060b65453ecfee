#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowdeid/types.hpp"

namespace flowdeid {

struct EllipseSpec {
    double cx = 0.5, cy = 0.5;   // center, normalized coords
    double rx = 0.25, ry = 0.15; // radii, normalized
};

struct DotSpec {
    double cx = 0.82, cy = 0.18;
    double radius = 0.035;
    std::array<std::uint8_t, 3> color{250, 40, 230};
};

// Procedural scene family: identity-dependent background gradient and
// feature dot, a fixed high-contrast distractor dot in every scene, and a
// red pathology ellipse present only in pathological renders. Pixel jitter
// comes solely from the latent code, so twin renders cancel exactly
// outside the ellipse.
struct SceneSpec {
    int image_size = 32;
    int identity_count = 4;
    EllipseSpec pathology;
    DotSpec distractor;
    double noise_amplitude = 2.0;  // 8-bit counts

    std::size_t pixel_count() const { return static_cast<std::size_t>(image_size) * image_size; }
    int state_dim() const { return 3 * image_size * image_size; }
    int condition_dim() const { return identity_count + 2; }

    nlohmann::json to_json() const;
    static SceneSpec from_json(const nlohmann::json& j);

    // FNV-1a over the canonical JSON encoding; embedded in checkpoints so a
    // model is never applied to a scene family it was not trained on.
    std::uint64_t hash() const;
};

enum class Health { pathological, healthy };

const char* to_string(Health h);

struct Condition {
    int identity = 0;
    Health health = Health::pathological;
    bool unconditional = false;
};

// Fixed encoding: one-hot identity concatenated with one-hot health;
// the unconditional flag zeroes everything.
std::vector<double> condition_embedding(const Condition& c, int identity_count);

// Seed-anchored standard-normal vector; reproducible via the documented
// substream rule (seed -> "latent" substream).
struct LatentCode {
    std::uint64_t seed = 0;
    std::vector<double> vector;
};

LatentCode make_latent(std::uint64_t seed, int dim);

// Deterministic identity parameters.
double identity_gradient_angle(const SceneSpec& spec, int identity);
std::pair<double, double> identity_dot_center(const SceneSpec& spec, int identity);

RgbImage oracle_generate(const SceneSpec& spec, const LatentCode& z, const Condition& c);

// Exact pixel-center rasterization of the pathology ellipse.
BinaryMask oracle_ground_truth_mask(const SceneSpec& spec);

// Pixels touched by the distractor dot (any nonzero coverage).
BinaryMask distractor_mask(const SceneSpec& spec);

// Indicator plane of an identity's feature dot, for leakage probes.
BinaryMask identity_dot_mask(const SceneSpec& spec, int identity);

// 8-neighborhood dilation, used for anti-aliased border tolerances.
BinaryMask dilate(const BinaryMask& m, int radius = 1);

}  // namespace flowdeid

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "flowdeid/scene.hpp"
#include "flowdeid/types.hpp"

namespace flowdeid {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fully connected conditional velocity field:
//   input  = [state, (t, sin 2*pi*t, cos 2*pi*t), condition embedding]
//   layers = linear -> silu -> linear -> silu -> linear
// Weights are row-major [out][in]; doubles throughout.
struct VelocityNet {
    int state_dim = 0;
    int cond_dim = 0;
    int width = 0;
    std::vector<double> w1, b1, w2, b2, w3, b3;

    int input_dim() const { return state_dim + 3 + cond_dim; }
    std::size_t param_count() const;

    // Flat parameter order: w1, b1, w2, b2, w3, b3.
    void copy_params_to(std::span<double> flat) const;
    void add_scaled(std::span<const double> delta, double scale);

    void forward(std::span<const double> state, double t, std::span<const double> emb,
                 std::span<double> velocity_out) const;
};

VelocityNet make_velocity_net(int state_dim, int cond_dim, int width, std::uint64_t seed);

// One training batch of the flow-matching objective.
struct FlowBatch {
    int n = 0, state_dim = 0, cond_dim = 0;
    std::vector<double> xt;      // n * state_dim, (1-t)*x0 + t*x1
    std::vector<double> t;       // n
    std::vector<double> emb;     // n * cond_dim
    std::vector<double> target;  // n * state_dim, x1 - x0
};

// Mean squared velocity error over the batch (per-element mean).
double flow_loss(const VelocityNet& net, const FlowBatch& batch);

// Loss plus analytic gradient in flat parameter order. Per-sample terms are
// accumulated in a fixed number of index-ordered chunks, so the result is
// bit-identical for any thread count.
struct GradWorkspace;
double flow_loss_and_gradient(const VelocityNet& net, const FlowBatch& batch,
                              std::vector<double>& grad, GradWorkspace* ws = nullptr);

struct GradWorkspace {
    std::vector<std::vector<double>> chunk_grad;
    std::vector<double> chunk_loss;
};

inline constexpr int kGradChunks = 4;

struct TrainHyperparams {
    int width = 256;
    int batch_size = 32;
    int epochs = 24;
    int dataset_size = 2048;  // samples per epoch
    double learning_rate = 1e-3;
    double cond_dropout = 0.1;  // probability a sample trains unconditionally
    int total_steps() const {
        return epochs * ((dataset_size + batch_size - 1) / batch_size);
    }
};

struct TrainResult {
    VelocityNet model;
    double initial_loss = 0.0;  // on a fixed held-out batch, before training
    double final_loss = 0.0;    // same batch, after training
    std::vector<double> loss_curve;  // per-step training loss
};

// Flow-matching training over scenes synthesized on the fly from the oracle
// generator. Adam optimizer; fully deterministic per seed.
TrainResult train_flow(const SceneSpec& spec, const TrainHyperparams& hp, std::uint64_t seed);

// Image-space batch synthesis (exposed for tests and the training loop).
FlowBatch make_scene_batch(const SceneSpec& spec, int n, double cond_dropout, std::uint64_t seed);

// [0,255] u8 <-> [-1,1] doubles, interleaved RGB order preserved.
std::vector<double> normalize_image(const RgbImage& img);
RgbImage denormalize_image(std::span<const double> state, int width, int height);

// Plain Euler integration of dx/dt = v(x, t, emb) from t=0 to t=1.
std::vector<double> euler_integrate(const VelocityNet& net, std::span<const double> x0,
                                    std::span<const double> emb, int steps);

// Euler sampler from a latent anchor to an 8-bit image.
RgbImage sample(const VelocityNet& net, const SceneSpec& spec, const LatentCode& z,
                const Condition& c, int steps);

// Checkpoint: magic line, one-line JSON header, raw little-endian doubles.
struct Checkpoint {
    VelocityNet net;
    SceneSpec scene;
    std::uint64_t train_seed = 0;
    std::string version;
};

void save_checkpoint(const std::filesystem::path& path, const VelocityNet& net,
                     const SceneSpec& scene, std::uint64_t train_seed);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowdeid

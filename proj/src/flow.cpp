#include "flowdeid/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "flowdeid/rng.hpp"

namespace flowdeid {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
    const double s = sigmoid(x);
    return s * (1.0 + x * (1.0 - s));
}

// y = W x + b, W row-major [rows][cols]
void matvec(const std::vector<double>& w, const std::vector<double>& b, std::span<const double> x,
            std::span<double> y, int rows, int cols) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        const double* wr = w.data() + static_cast<std::size_t>(r) * cols;
        double acc = b[r];
        for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = acc;
    }
}

struct ForwardCache {
    std::vector<double> u;        // assembled input
    std::vector<double> z1, h1;   // first hidden pre/post activation
    std::vector<double> z2, h2;   // second hidden pre/post activation
    std::vector<double> v;        // output velocity
    std::vector<double> r;        // output residual
    std::vector<double> dh1, dh2;

    void resize(const VelocityNet& net) {
        u.resize(net.input_dim());
        z1.resize(net.width);
        h1.resize(net.width);
        z2.resize(net.width);
        h2.resize(net.width);
        v.resize(net.state_dim);
        r.resize(net.state_dim);
        dh1.resize(net.width);
        dh2.resize(net.width);
    }
};

void assemble_input(std::span<const double> state, double t, std::span<const double> emb,
                    std::vector<double>& u) {
    const int sd = static_cast<int>(state.size());
    std::copy(state.begin(), state.end(), u.begin());
    u[sd] = t;
    u[sd + 1] = std::sin(2.0 * M_PI * t);
    u[sd + 2] = std::cos(2.0 * M_PI * t);
    std::copy(emb.begin(), emb.end(), u.begin() + sd + 3);
}

// Serial forward through the cache, used inside the per-sample loops where
// the outer level already owns the threads.
void forward_cached(const VelocityNet& net, std::span<const double> state, double t,
                    std::span<const double> emb, ForwardCache& fc) {
    assemble_input(state, t, emb, fc.u);
    const int in = net.input_dim(), w = net.width, out = net.state_dim;
    for (int r = 0; r < w; ++r) {
        const double* wr = net.w1.data() + static_cast<std::size_t>(r) * in;
        double acc = net.b1[r];
        for (int c = 0; c < in; ++c) acc += wr[c] * fc.u[c];
        fc.z1[r] = acc;
        fc.h1[r] = silu(acc);
    }
    for (int r = 0; r < w; ++r) {
        const double* wr = net.w2.data() + static_cast<std::size_t>(r) * w;
        double acc = net.b2[r];
        for (int c = 0; c < w; ++c) acc += wr[c] * fc.h1[c];
        fc.z2[r] = acc;
        fc.h2[r] = silu(acc);
    }
    for (int r = 0; r < out; ++r) {
        const double* wr = net.w3.data() + static_cast<std::size_t>(r) * w;
        double acc = net.b3[r];
        for (int c = 0; c < w; ++c) acc += wr[c] * fc.h2[c];
        fc.v[r] = acc;
    }
}

// Accumulates one sample's gradient contribution; fc.r must hold dL/dv.
void backward_accumulate(const VelocityNet& net, ForwardCache& fc, double* g) {
    const int in = net.input_dim(), w = net.width, out = net.state_dim;
    const std::size_t off_w1 = 0;
    const std::size_t off_b1 = off_w1 + static_cast<std::size_t>(w) * in;
    const std::size_t off_w2 = off_b1 + w;
    const std::size_t off_b2 = off_w2 + static_cast<std::size_t>(w) * w;
    const std::size_t off_w3 = off_b2 + w;
    const std::size_t off_b3 = off_w3 + static_cast<std::size_t>(out) * w;

    std::fill(fc.dh2.begin(), fc.dh2.end(), 0.0);
    for (int r = 0; r < out; ++r) {
        const double rr = fc.r[r];
        double* gw3 = g + off_w3 + static_cast<std::size_t>(r) * w;
        const double* w3r = net.w3.data() + static_cast<std::size_t>(r) * w;
        for (int c = 0; c < w; ++c) {
            gw3[c] += rr * fc.h2[c];
            fc.dh2[c] += rr * w3r[c];
        }
        g[off_b3 + r] += rr;
    }

    std::fill(fc.dh1.begin(), fc.dh1.end(), 0.0);
    for (int r = 0; r < w; ++r) {
        const double dz = fc.dh2[r] * silu_grad(fc.z2[r]);
        double* gw2 = g + off_w2 + static_cast<std::size_t>(r) * w;
        const double* w2r = net.w2.data() + static_cast<std::size_t>(r) * w;
        for (int c = 0; c < w; ++c) {
            gw2[c] += dz * fc.h1[c];
            fc.dh1[c] += dz * w2r[c];
        }
        g[off_b2 + r] += dz;
    }

    for (int r = 0; r < w; ++r) {
        const double dz = fc.dh1[r] * silu_grad(fc.z1[r]);
        double* gw1 = g + off_w1 + static_cast<std::size_t>(r) * in;
        for (int c = 0; c < in; ++c) gw1[c] += dz * fc.u[c];
        g[off_b1 + r] += dz;
    }
}

}  // namespace

std::size_t VelocityNet::param_count() const {
    return static_cast<std::size_t>(width) * input_dim() + width +
           static_cast<std::size_t>(width) * width + width +
           static_cast<std::size_t>(state_dim) * width + state_dim;
}

void VelocityNet::copy_params_to(std::span<double> flat) const {
    double* p = flat.data();
    auto put = [&p](const std::vector<double>& v) {
        std::memcpy(p, v.data(), v.size() * sizeof(double));
        p += v.size();
    };
    put(w1), put(b1), put(w2), put(b2), put(w3), put(b3);
}

void VelocityNet::add_scaled(std::span<const double> delta, double scale) {
    const double* p = delta.data();
    auto take = [&p, scale](std::vector<double>& v) {
        for (double& x : v) x += scale * *p++;
    };
    take(w1), take(b1), take(w2), take(b2), take(w3), take(b3);
}

void VelocityNet::forward(std::span<const double> state, double t, std::span<const double> emb,
                          std::span<double> velocity_out) const {
    if (static_cast<int>(state.size()) != state_dim || static_cast<int>(emb.size()) != cond_dim)
        throw std::invalid_argument("VelocityNet::forward: dimension mismatch");
    std::vector<double> u(input_dim());
    assemble_input(state, t, emb, u);
    std::vector<double> h1(width), h2(width);
    matvec(w1, b1, u, h1, width, input_dim());
    for (double& x : h1) x = silu(x);
    matvec(w2, b2, h1, h2, width, width);
    for (double& x : h2) x = silu(x);
    matvec(w3, b3, h2, velocity_out, state_dim, width);
}

VelocityNet make_velocity_net(int state_dim, int cond_dim, int width, std::uint64_t seed) {
    if (state_dim < 1 || cond_dim < 1 || width < 1)
        throw std::invalid_argument("make_velocity_net: dimensions must be positive");
    VelocityNet net;
    net.state_dim = state_dim;
    net.cond_dim = cond_dim;
    net.width = width;
    const int in = net.input_dim();
    RandomStream rs = substream(seed, "net-init");
    auto init = [&rs](std::vector<double>& w, int rows, int cols) {
        w.resize(static_cast<std::size_t>(rows) * cols);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        for (double& x : w) x = rs.normal() * scale;
    };
    init(net.w1, width, in);
    net.b1.assign(width, 0.0);
    init(net.w2, width, width);
    net.b2.assign(width, 0.0);
    init(net.w3, state_dim, width);
    net.b3.assign(state_dim, 0.0);
    return net;
}

double flow_loss(const VelocityNet& net, const FlowBatch& batch) {
    const int sd = net.state_dim;
    double total = 0.0;
    ForwardCache fc;
    fc.resize(net);
    for (int i = 0; i < batch.n; ++i) {
        forward_cached(net,
                       std::span<const double>(batch.xt.data() + static_cast<std::size_t>(i) * sd, sd),
                       batch.t[i],
                       std::span<const double>(batch.emb.data() + static_cast<std::size_t>(i) * net.cond_dim,
                                               net.cond_dim),
                       fc);
        const double* tgt = batch.target.data() + static_cast<std::size_t>(i) * sd;
        for (int d = 0; d < sd; ++d) {
            const double e = fc.v[d] - tgt[d];
            total += e * e;
        }
    }
    return total / (static_cast<double>(batch.n) * sd);
}

double flow_loss_and_gradient(const VelocityNet& net, const FlowBatch& batch,
                              std::vector<double>& grad, GradWorkspace* ws) {
    if (batch.n < 1) throw std::invalid_argument("flow_loss_and_gradient: empty batch");
    if (batch.state_dim != net.state_dim || batch.cond_dim != net.cond_dim)
        throw std::invalid_argument("flow_loss_and_gradient: batch/net dimension mismatch");

    const std::size_t np = net.param_count();
    grad.assign(np, 0.0);

    GradWorkspace local;
    GradWorkspace& w = ws ? *ws : local;
    w.chunk_grad.resize(kGradChunks);
    w.chunk_loss.assign(kGradChunks, 0.0);
    for (auto& cg : w.chunk_grad) cg.assign(np, 0.0);

    const int per_chunk = (batch.n + kGradChunks - 1) / kGradChunks;
    const int sd = net.state_dim, cd = net.cond_dim;
    const double inv = 1.0 / (static_cast<double>(batch.n) * sd);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < kGradChunks; ++c) {
        ForwardCache fc;
        fc.resize(net);
        double* g = w.chunk_grad[c].data();
        const int lo = c * per_chunk;
        const int hi = std::min(batch.n, lo + per_chunk);
        for (int i = lo; i < hi; ++i) {
            forward_cached(net,
                           std::span<const double>(batch.xt.data() + static_cast<std::size_t>(i) * sd, sd),
                           batch.t[i],
                           std::span<const double>(batch.emb.data() + static_cast<std::size_t>(i) * cd, cd),
                           fc);
            const double* tgt = batch.target.data() + static_cast<std::size_t>(i) * sd;
            for (int d = 0; d < sd; ++d) {
                const double e = fc.v[d] - tgt[d];
                w.chunk_loss[c] += e * e;
                fc.r[d] = 2.0 * e * inv;
            }
            backward_accumulate(net, fc, g);
        }
    }

// Chunk buffers summed in chunk order per parameter: thread-count independent.
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(np); ++j) {
        double acc = 0.0;
        for (int c = 0; c < kGradChunks; ++c) acc += w.chunk_grad[c][j];
        grad[j] = acc;
    }

    double loss = 0.0;
    for (int c = 0; c < kGradChunks; ++c) loss += w.chunk_loss[c];
    return loss * inv;
}

std::vector<double> normalize_image(const RgbImage& img) {
    std::vector<double> x(img.data.size());
    for (std::size_t i = 0; i < img.data.size(); ++i) x[i] = img.data[i] / 127.5 - 1.0;
    return x;
}

RgbImage denormalize_image(std::span<const double> state, int width, int height) {
    if (static_cast<std::size_t>(width) * height * 3 != state.size())
        throw std::invalid_argument("denormalize_image: dimension mismatch");
    RgbImage img(width, height);
    for (std::size_t i = 0; i < state.size(); ++i) {
        const double v = std::round((state[i] + 1.0) * 127.5);
        img.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return img;
}

FlowBatch make_scene_batch(const SceneSpec& spec, int n, double cond_dropout, std::uint64_t seed) {
    const int sd = spec.state_dim();
    const int cd = spec.condition_dim();
    FlowBatch b;
    b.n = n;
    b.state_dim = sd;
    b.cond_dim = cd;
    b.xt.resize(static_cast<std::size_t>(n) * sd);
    b.t.resize(n);
    b.emb.resize(static_cast<std::size_t>(n) * cd);
    b.target.resize(static_cast<std::size_t>(n) * sd);

    // All random decisions are drawn serially up front; the heavy rendering
    // below is then order-free.
    struct SampleDraw {
        std::uint64_t z_seed, x0_seed;
        int identity;
        Health health;
        bool drop;
        double t;
    };
    std::vector<SampleDraw> draws(n);
    RandomStream rs = substream(seed, "batch");
    for (auto& d : draws) {
        d.z_seed = rs.next_u64();
        d.x0_seed = rs.next_u64();
        d.identity = rs.uniform_int(0, spec.identity_count - 1);
        d.health = rs.uniform() < 0.5 ? Health::pathological : Health::healthy;
        d.drop = rs.uniform() < cond_dropout;
        d.t = rs.uniform();
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const SampleDraw& d = draws[i];
        Condition c{d.identity, d.health, d.drop};
        const RgbImage img = oracle_generate(spec, make_latent(d.z_seed, sd), Condition{d.identity, d.health, false});
        const std::vector<double> x1 = normalize_image(img);

        RandomStream xs = substream(d.x0_seed, "flow-x0");
        double* xt = b.xt.data() + static_cast<std::size_t>(i) * sd;
        double* tgt = b.target.data() + static_cast<std::size_t>(i) * sd;
        for (int k = 0; k < sd; ++k) {
            const double x0 = xs.normal();
            xt[k] = (1.0 - d.t) * x0 + d.t * x1[k];
            tgt[k] = x1[k] - x0;
        }
        b.t[i] = d.t;
        const std::vector<double> emb = condition_embedding(c, spec.identity_count);
        std::copy(emb.begin(), emb.end(), b.emb.begin() + static_cast<std::size_t>(i) * cd);
    }
    return b;
}

TrainResult train_flow(const SceneSpec& spec, const TrainHyperparams& hp, std::uint64_t seed) {
    if (hp.width < 1 || hp.batch_size < 1 || hp.epochs < 1 || hp.dataset_size < 1 ||
        hp.learning_rate <= 0.0)
        throw std::invalid_argument("train_flow: hyperparameters must be positive");

    VelocityNet net = make_velocity_net(spec.state_dim(), spec.condition_dim(), hp.width,
                                        derive_seed(seed, "init"));
    const std::size_t np = net.param_count();

    // Fixed evaluation batch, conditioned, never trained on.
    const FlowBatch eval_batch = make_scene_batch(spec, hp.batch_size, 0.0, derive_seed(seed, "eval"));

    TrainResult result;
    result.initial_loss = flow_loss(net, eval_batch);

    std::vector<double> grad(np), m(np, 0.0), v(np, 0.0), update(np);
    GradWorkspace ws;

    const int steps = hp.total_steps();
    result.loss_curve.reserve(steps);

    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    for (int step = 0; step < steps; ++step) {
        const FlowBatch batch =
            make_scene_batch(spec, hp.batch_size, hp.cond_dropout, derive_seed(seed, "step", step));
        const double loss = flow_loss_and_gradient(net, batch, grad, &ws);
        if (!std::isfinite(loss)) throw TrainingError("train_flow: non-finite loss at step " + std::to_string(step));
        result.loss_curve.push_back(loss);

        const double bc1 = 1.0 - std::pow(beta1, step + 1);
        const double bc2 = 1.0 - std::pow(beta2, step + 1);
#pragma omp parallel for schedule(static)
        for (std::int64_t j = 0; j < static_cast<std::int64_t>(np); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
            update[j] = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps);
        }
        net.add_scaled(update, -hp.learning_rate);
    }

    result.final_loss = flow_loss(net, eval_batch);
    result.model = std::move(net);
    return result;
}

std::vector<double> euler_integrate(const VelocityNet& net, std::span<const double> x0,
                                    std::span<const double> emb, int steps) {
    if (steps < 1) throw std::invalid_argument("euler_integrate: steps must be >= 1");
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> v(net.state_dim);
    const double dt = 1.0 / steps;
    for (int k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        net.forward(x, t, emb, v);
        for (int d = 0; d < net.state_dim; ++d) x[d] += dt * v[d];
        for (int d = 0; d < net.state_dim; ++d)
            if (!std::isfinite(x[d])) throw DivergenceError("euler_integrate: non-finite state");
    }
    return x;
}

RgbImage sample(const VelocityNet& net, const SceneSpec& spec, const LatentCode& z,
                const Condition& c, int steps) {
    if (static_cast<int>(z.vector.size()) != net.state_dim)
        throw std::invalid_argument("sample: latent dimension does not match model");
    const std::vector<double> emb = condition_embedding(c, spec.identity_count);
    const std::vector<double> x = euler_integrate(net, z.vector, emb, steps);
    return denormalize_image(x, spec.image_size, spec.image_size);
}

void save_checkpoint(const std::filesystem::path& path, const VelocityNet& net,
                     const SceneSpec& scene, std::uint64_t train_seed) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());

    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(scene.hash()));
    nlohmann::json header{
        {"format", "flowdeid-ckpt"},
        {"state_dim", net.state_dim},
        {"cond_dim", net.cond_dim},
        {"width", net.width},
        {"scene", scene.to_json()},
        {"scene_hash", hash_hex},
        {"train_seed", train_seed},
        {"version", "1.0.0"},
    };
    out << "FLOWDEID-CKPT v1\n" << header.dump() << "\n";

    std::vector<double> flat(net.param_count());
    net.copy_params_to(flat);
    out.write(reinterpret_cast<const char*>(flat.data()),
              static_cast<std::streamsize>(flat.size() * sizeof(double)));
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());

    std::string magic, header_line;
    std::getline(in, magic);
    if (magic != "FLOWDEID-CKPT v1")
        throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
    std::getline(in, header_line);
    const nlohmann::json header = nlohmann::json::parse(header_line);

    Checkpoint ck;
    ck.scene = SceneSpec::from_json(header.at("scene"));
    ck.train_seed = header.at("train_seed").get<std::uint64_t>();
    ck.version = header.at("version").get<std::string>();

    VelocityNet& net = ck.net;
    net.state_dim = header.at("state_dim").get<int>();
    net.cond_dim = header.at("cond_dim").get<int>();
    net.width = header.at("width").get<int>();

    const int in_dim = net.input_dim();
    net.w1.resize(static_cast<std::size_t>(net.width) * in_dim);
    net.b1.resize(net.width);
    net.w2.resize(static_cast<std::size_t>(net.width) * net.width);
    net.b2.resize(net.width);
    net.w3.resize(static_cast<std::size_t>(net.state_dim) * net.width);
    net.b3.resize(net.state_dim);

    auto read_block = [&in, &path](std::vector<double>& v) {
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
        if (!in) throw std::runtime_error("load_checkpoint: truncated weights in " + path.string());
    };
    read_block(net.w1);
    read_block(net.b1);
    read_block(net.w2);
    read_block(net.b2);
    read_block(net.w3);
    read_block(net.b3);

    for (const auto* block : {&net.w1, &net.b1, &net.w2, &net.b2, &net.w3, &net.b3})
        for (double x : *block)
            if (!std::isfinite(x)) throw std::runtime_error("load_checkpoint: non-finite weight");
    return ck;
}

}  // namespace flowdeid

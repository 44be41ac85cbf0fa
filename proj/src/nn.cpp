#include "siggame/nn.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace siggame {

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += layer.weights.data.size() + layer.biases.size();
    return n;
}

void Mlp::validate() const {
    if (layers.empty()) throw std::invalid_argument("mlp: no layers");
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& layer = layers[k];
        if (layer.in_dim() == 0 || layer.out_dim() == 0)
            throw std::invalid_argument("mlp: layer " + std::to_string(k) + " has zero dimension");
        if (layer.biases.size() != layer.out_dim())
            throw std::invalid_argument("mlp: layer " + std::to_string(k) + " bias size mismatch");
        if (k > 0 && layers[k - 1].out_dim() != layer.in_dim())
            throw std::invalid_argument("mlp: layer " + std::to_string(k) +
                                        " in_dim incompatible with previous out_dim");
    }
}

Mlp make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output dims");
    if (acts.size() != dims.size() - 1)
        throw std::invalid_argument("make_mlp: one activation per layer required");
    for (std::size_t d : dims)
        if (d == 0) throw std::invalid_argument("make_mlp: non-positive dimension");

    Mlp net;
    net.layers.resize(dims.size() - 1);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        DenseLayer& layer = net.layers[k];
        layer.weights = Matrix(dims[k + 1], dims[k]);
        layer.biases.assign(dims[k + 1], 0.0);
        layer.activation = acts[k];
        const double limit = std::sqrt(6.0 / static_cast<double>(dims[k] + dims[k + 1]));
        for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
    }
    return net;
}

std::vector<double> relu(std::span<const double> x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

namespace {

void affine(const DenseLayer& layer, std::span<const double> input, std::vector<double>& out) {
    const std::size_t rows = layer.out_dim(), cols = layer.in_dim();
    out.resize(rows);
    const double* w = layer.weights.data.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = layer.biases[r];
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * input[c];
        out[r] = acc;
    }
}

void apply_activation(Activation act, const std::vector<double>& pre, std::vector<double>& out) {
    out.resize(pre.size());
    if (act == Activation::Relu) {
        for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
    } else {
        out = pre;
    }
}

void check_input_dim(const Mlp& net, std::span<const double> input) {
    if (input.size() != net.input_dim())
        throw std::invalid_argument("mlp_forward: input length " + std::to_string(input.size()) +
                                    " != layer in_dim " + std::to_string(net.input_dim()));
}

}  // namespace

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input) {
    check_input_dim(net, input);
    std::vector<double> cur(input.begin(), input.end());
    std::vector<double> pre;
    for (const auto& layer : net.layers) {
        affine(layer, cur, pre);
        apply_activation(layer.activation, pre, cur);
    }
    return cur;
}

void mlp_forward_cached(const Mlp& net, std::span<const double> input, ForwardCache& cache) {
    check_input_dim(net, input);
    const std::size_t n_layers = net.layers.size();
    cache.inputs.resize(n_layers);
    cache.pre_acts.resize(n_layers);
    cache.inputs[0].assign(input.begin(), input.end());
    for (std::size_t k = 0; k < n_layers; ++k) {
        const auto& layer = net.layers[k];
        affine(layer, cache.inputs[k], cache.pre_acts[k]);
        auto& out = (k + 1 < n_layers) ? cache.inputs[k + 1] : cache.output;
        apply_activation(layer.activation, cache.pre_acts[k], out);
    }
}

double mse(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size() || prediction.empty())
        throw std::invalid_argument("mse: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        acc += d * d;
    }
    return acc / static_cast<double>(prediction.size());
}

std::vector<double> mse_gradient(std::span<const double> prediction, std::span<const double> target) {
    if (prediction.size() != target.size() || prediction.empty())
        throw std::invalid_argument("mse_gradient: length mismatch");
    std::vector<double> g(prediction.size());
    const double scale = 2.0 / static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) g[i] = scale * (prediction[i] - target[i]);
    return g;
}

Gradients make_zero_gradients(const Mlp& net) {
    Gradients g;
    g.weights.reserve(net.layers.size());
    g.biases.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.weights.emplace_back(layer.out_dim(), layer.in_dim());
        g.biases.emplace_back(layer.out_dim(), 0.0);
    }
    return g;
}

void zero_gradients(Gradients& grads) {
    for (auto& w : grads.weights) w.data.assign(w.data.size(), 0.0);
    for (auto& b : grads.biases) b.assign(b.size(), 0.0);
}

void scale_gradients(Gradients& grads, double factor) {
    for (auto& w : grads.weights)
        for (double& v : w.data) v *= factor;
    for (auto& b : grads.biases)
        for (double& v : b) v *= factor;
}

std::vector<double> mlp_backward_accumulate(const Mlp& net, const ForwardCache& cache,
                                            std::span<const double> output_grad, Gradients& grads) {
    if (cache.inputs.size() != net.layers.size() || cache.pre_acts.size() != net.layers.size())
        throw std::invalid_argument("mlp_backward: cache does not match network");
    if (output_grad.size() != net.output_dim())
        throw std::invalid_argument("mlp_backward: output_grad length mismatch");
    if (grads.weights.size() != net.layers.size())
        throw std::invalid_argument("mlp_backward: gradient shapes mismatch");

    std::vector<double> delta(output_grad.begin(), output_grad.end());
    std::vector<double> prev_delta;
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const auto& layer = net.layers[k];
        const auto& pre = cache.pre_acts[k];
        if (layer.activation == Activation::Relu) {
            for (std::size_t r = 0; r < delta.size(); ++r)
                if (pre[r] <= 0.0) delta[r] = 0.0;
        }
        const auto& in = cache.inputs[k];
        const std::size_t rows = layer.out_dim(), cols = layer.in_dim();
        double* wg = grads.weights[k].data.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = delta[r];
            grads.biases[k][r] += d;
            double* wgr = wg + r * cols;
            for (std::size_t c = 0; c < cols; ++c) wgr[c] += d * in[c];
        }
        // propagate to the layer input: W^T delta
        prev_delta.assign(cols, 0.0);
        const double* w = layer.weights.data.data();
        for (std::size_t r = 0; r < rows; ++r) {
            const double d = delta[r];
            const double* wr = w + r * cols;
            for (std::size_t c = 0; c < cols; ++c) prev_delta[c] += wr[c] * d;
        }
        delta.swap(prev_delta);
    }
    return delta;
}

Gradients mlp_backward(const Mlp& net, const ForwardCache& cache,
                       std::span<const double> output_grad) {
    Gradients grads = make_zero_gradients(net);
    mlp_backward_accumulate(net, cache, output_grad, grads);
    return grads;
}

AdamState make_adam_state(const Mlp& net, const AdamConfig& config) {
    AdamState state;
    state.config = config;
    for (const auto& layer : net.layers) {
        state.weight_m.emplace_back(layer.out_dim(), layer.in_dim());
        state.weight_v.emplace_back(layer.out_dim(), layer.in_dim());
        state.bias_m.emplace_back(layer.out_dim(), 0.0);
        state.bias_v.emplace_back(layer.out_dim(), 0.0);
    }
    return state;
}

namespace {

void adam_update_tensor(std::span<double> params, std::span<const double> grads,
                        std::span<double> m, std::span<double> v, const AdamConfig& cfg,
                        double bias1, double bias2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / bias1;
        const double v_hat = v[i] / bias2;
        params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

}  // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
    if (grads.weights.size() != net.layers.size() || state.weight_m.size() != net.layers.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bias1 = 1.0 - std::pow(state.config.beta1, t);
    const double bias2 = 1.0 - std::pow(state.config.beta2, t);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = net.layers[k];
        if (grads.weights[k].data.size() != layer.weights.data.size() ||
            grads.biases[k].size() != layer.biases.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(k));
        adam_update_tensor(layer.weights.data, grads.weights[k].data, state.weight_m[k].data,
                           state.weight_v[k].data, state.config, bias1, bias2);
        adam_update_tensor(layer.biases, grads.biases[k], state.bias_m[k], state.bias_v[k],
                           state.config, bias1, bias2);
    }
}

}  // namespace siggame

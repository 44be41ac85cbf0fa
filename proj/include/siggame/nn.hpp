#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "siggame/rng.hpp"

namespace siggame {

// Row-major dense matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<const double> row(std::size_t r) const {
        return {data.data() + r * cols, cols};
    }
};

enum class Activation { Relu, Identity };

struct DenseLayer {
    Matrix weights;              // out_dim x in_dim
    std::vector<double> biases;  // out_dim
    Activation activation = Activation::Identity;

    std::size_t in_dim() const { return weights.cols; }
    std::size_t out_dim() const { return weights.rows; }
};

struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t parameter_count() const;

    // throws std::invalid_argument if consecutive layer dims are incompatible
    void validate() const;
};

// dims = {in, h1, ..., out}; acts has one entry per layer.
// Weights are Glorot-uniform, biases zero.
Mlp make_mlp(const std::vector<std::size_t>& dims, const std::vector<Activation>& acts, Rng& rng);

// Per-layer intermediates kept by the cached forward pass; backward needs
// the layer inputs and pre-activations.
struct ForwardCache {
    std::vector<std::vector<double>> inputs;    // input to layer k
    std::vector<std::vector<double>> pre_acts;  // W x + b at layer k
    std::vector<double> output;                 // activation of the last layer
};

std::vector<double> relu(std::span<const double> x);

std::vector<double> mlp_forward(const Mlp& net, std::span<const double> input);
void mlp_forward_cached(const Mlp& net, std::span<const double> input, ForwardCache& cache);

double mse(std::span<const double> prediction, std::span<const double> target);
// d mse / d prediction
std::vector<double> mse_gradient(std::span<const double> prediction, std::span<const double> target);

// One tensor per parameter tensor of the Mlp it differentiates.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
};

Gradients make_zero_gradients(const Mlp& net);
void zero_gradients(Gradients& grads);
void scale_gradients(Gradients& grads, double factor);

// Adds this example's parameter gradients into `grads` and returns the
// gradient of the loss w.r.t. the network input (needed to chain the
// receiver's input gradient into the sender).
std::vector<double> mlp_backward_accumulate(const Mlp& net, const ForwardCache& cache,
                                            std::span<const double> output_grad, Gradients& grads);

Gradients mlp_backward(const Mlp& net, const ForwardCache& cache,
                       std::span<const double> output_grad);

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig config;
    std::vector<Matrix> weight_m, weight_v;
    std::vector<std::vector<double>> bias_m, bias_v;
    std::uint64_t step_count = 0;
};

AdamState make_adam_state(const Mlp& net, const AdamConfig& config);

// Standard bias-corrected Adam update; increments step_count.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

}  // namespace siggame

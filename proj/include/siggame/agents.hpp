#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "siggame/game.hpp"
#include "siggame/nn.hpp"

namespace siggame {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t steps = 5000;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

// Sender: flattened context ++ one-hot selector -> 64 ReLU -> 64 ReLU ->
// latent (identity bottleneck). Receiver: message ++ flattened context ->
// 64 ReLU -> 64 ReLU -> object features (identity).
struct TrainedModel {
    GameConfig game;
    TrainConfig train;
    Mlp sender;
    Mlp receiver;
    double final_loss = 0.0;
    std::vector<double> loss_history;  // batch MSE per step; not serialized
};

std::size_t sender_input_dim(const GameConfig& cfg);
std::size_t receiver_input_dim(const GameConfig& cfg);

TrainedModel make_untrained_model(const GameConfig& game, const TrainConfig& train);

std::vector<double> sender_forward(const TrainedModel& model, const Context& c,
                                   const FunctionSpec& f);
std::vector<double> receiver_forward(const TrainedModel& model, std::span<const double> message,
                                     const Context& c_prime);

// Full training run: `steps` Adam updates on fresh batches of (c, f, c')
// triples, backpropagating through receiver and sender jointly.
// Deterministic given train.seed.
TrainedModel train_trial(const GameConfig& game, const TrainConfig& train);

// Fraction of (context x function) plays where the receiver's output is
// strictly closest to the target object.
double evaluate_accuracy(const TrainedModel& model, std::size_t n_eval_contexts, Rng& rng);

// Text checkpoint with hexfloat parameters; round-trips bit-exactly.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace siggame

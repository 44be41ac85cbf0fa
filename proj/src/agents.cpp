#include "siggame/agents.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace siggame {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("train config: learning_rate must be > 0");
    if (beta1 <= 0.0 || beta1 >= 1.0) throw std::invalid_argument("train config: beta1 must be in (0,1)");
    if (beta2 <= 0.0 || beta2 >= 1.0) throw std::invalid_argument("train config: beta2 must be in (0,1)");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
}

std::size_t sender_input_dim(const GameConfig& cfg) {
    return cfg.n_objects * cfg.n_dims + cfg.n_functions();
}

std::size_t receiver_input_dim(const GameConfig& cfg) {
    return cfg.latent_dim + cfg.n_objects * cfg.n_dims;
}

namespace {

constexpr std::size_t kHiddenDim = 64;

TrainedModel make_model_with_rng(const GameConfig& game, const TrainConfig& train, Rng& rng) {
    TrainedModel model;
    model.game = game;
    model.train = train;
    model.sender = make_mlp({sender_input_dim(game), kHiddenDim, kHiddenDim, game.latent_dim},
                            {Activation::Relu, Activation::Relu, Activation::Identity}, rng);
    model.receiver = make_mlp({receiver_input_dim(game), kHiddenDim, kHiddenDim, game.n_dims},
                              {Activation::Relu, Activation::Relu, Activation::Identity}, rng);
    return model;
}

void fill_sender_input(const Context& c, const FunctionSpec& f, std::size_t n_functions,
                       std::vector<double>& input) {
    input.assign(c.features.begin(), c.features.end());
    input.resize(c.features.size() + n_functions, 0.0);
    input[c.features.size() + f.selector_index] = 1.0;
}

void fill_receiver_input(std::span<const double> message, const Context& c_prime,
                         std::vector<double>& input) {
    input.assign(message.begin(), message.end());
    input.insert(input.end(), c_prime.features.begin(), c_prime.features.end());
}

}  // namespace

TrainedModel make_untrained_model(const GameConfig& game, const TrainConfig& train) {
    game.validate();
    train.validate();
    Rng rng(train.seed);
    return make_model_with_rng(game, train, rng);
}

std::vector<double> sender_forward(const TrainedModel& model, const Context& c,
                                   const FunctionSpec& f) {
    std::vector<double> input;
    fill_sender_input(c, f, model.game.n_functions(), input);
    return mlp_forward(model.sender, input);
}

std::vector<double> receiver_forward(const TrainedModel& model, std::span<const double> message,
                                     const Context& c_prime) {
    if (message.size() != model.game.latent_dim)
        throw std::invalid_argument("receiver_forward: message length != latent_dim");
    std::vector<double> input;
    fill_receiver_input(message, c_prime, input);
    return mlp_forward(model.receiver, input);
}

TrainedModel train_trial(const GameConfig& game, const TrainConfig& train) {
    game.validate();
    train.validate();
    Rng rng(train.seed);
    TrainedModel model = make_model_with_rng(game, train, rng);

    const AdamConfig adam_cfg{train.learning_rate, train.beta1, train.beta2, 1e-8};
    AdamState sender_state = make_adam_state(model.sender, adam_cfg);
    AdamState receiver_state = make_adam_state(model.receiver, adam_cfg);
    Gradients sender_grads = make_zero_gradients(model.sender);
    Gradients receiver_grads = make_zero_gradients(model.receiver);

    const std::size_t n_funcs = game.n_functions();
    const double batch = static_cast<double>(train.batch_size);
    std::vector<double> sender_input, receiver_input, output_grad;
    ForwardCache sender_cache, receiver_cache;
    model.loss_history.reserve(train.steps);

    for (std::size_t step = 0; step < train.steps; ++step) {
        zero_gradients(sender_grads);
        zero_gradients(receiver_grads);
        double batch_loss = 0.0;

        for (std::size_t b = 0; b < train.batch_size; ++b) {
            const Context c = sample_context(game, rng);
            const FunctionSpec f = function_from_selector(rng.below(n_funcs), game.n_dims);
            const Context c_prime = make_receiver_context(c, game, rng);
            const std::size_t target = apply_function(f, c_prime);

            fill_sender_input(c, f, n_funcs, sender_input);
            mlp_forward_cached(model.sender, sender_input, sender_cache);
            fill_receiver_input(sender_cache.output, c_prime, receiver_input);
            mlp_forward_cached(model.receiver, receiver_input, receiver_cache);

            const auto target_row = c_prime.row(target);
            batch_loss += mse(receiver_cache.output, target_row) / batch;

            // d(batch MSE)/d(prediction): 2 / (n_dims * batch) * (pred - target)
            output_grad.resize(game.n_dims);
            const double scale = 2.0 / (static_cast<double>(game.n_dims) * batch);
            for (std::size_t d = 0; d < game.n_dims; ++d)
                output_grad[d] = scale * (receiver_cache.output[d] - target_row[d]);

            const std::vector<double> receiver_input_grad =
                mlp_backward_accumulate(model.receiver, receiver_cache, output_grad, receiver_grads);
            const std::span<const double> message_grad{receiver_input_grad.data(),
                                                       game.latent_dim};
            mlp_backward_accumulate(model.sender, sender_cache, message_grad, sender_grads);
        }

        adam_step(model.receiver, receiver_grads, receiver_state);
        adam_step(model.sender, sender_grads, sender_state);
        model.loss_history.push_back(batch_loss);
    }

    model.final_loss = model.loss_history.empty() ? 0.0 : model.loss_history.back();
    return model;
}

double evaluate_accuracy(const TrainedModel& model, std::size_t n_eval_contexts, Rng& rng) {
    const auto functions = all_functions(model.game.n_dims);
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < n_eval_contexts; ++i) {
        const Context c = sample_context(model.game, rng);
        const Context c_prime = make_receiver_context(c, model.game, rng);
        for (const FunctionSpec& f : functions) {
            const std::vector<double> message = sender_forward(model, c, f);
            const std::vector<double> output = receiver_forward(model, message, c_prime);
            if (recovery_correct(output, c_prime, apply_function(f, c_prime))) ++correct;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

std::string hex(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%a", v);
    return buf;
}

void write_net(std::ostream& os, const char* name, const Mlp& net) {
    os << "net " << name << ' ' << net.layers.size() << '\n';
    for (const auto& layer : net.layers) {
        os << "layer " << layer.out_dim() << ' ' << layer.in_dim() << ' '
           << (layer.activation == Activation::Relu ? "relu" : "identity") << '\n';
        for (std::size_t r = 0; r < layer.out_dim(); ++r) {
            os << 'w';
            for (double v : layer.weights.row(r)) os << ' ' << hex(v);
            os << '\n';
        }
        os << 'b';
        for (double v : layer.biases) os << ' ' << hex(v);
        os << '\n';
    }
}

double read_double(std::istream& is, const char* what) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error(std::string("checkpoint: missing ") + what);
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw std::runtime_error(std::string("checkpoint: bad number for ") + what + ": " + tok);
    return v;
}

std::string expect(std::istream& is, const char* what) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error(std::string("checkpoint: missing ") + what);
    return tok;
}

void expect_tag(std::istream& is, const std::string& tag) {
    const std::string tok = expect(is, tag.c_str());
    if (tok != tag) throw std::runtime_error("checkpoint: expected '" + tag + "', got '" + tok + "'");
}

Mlp read_net(std::istream& is, const std::string& name) {
    expect_tag(is, "net");
    expect_tag(is, name);
    std::size_t n_layers = 0;
    is >> n_layers;
    Mlp net;
    net.layers.resize(n_layers);
    for (auto& layer : net.layers) {
        expect_tag(is, "layer");
        std::size_t out = 0, in = 0;
        is >> out >> in;
        const std::string act = expect(is, "activation");
        if (act == "relu")
            layer.activation = Activation::Relu;
        else if (act == "identity")
            layer.activation = Activation::Identity;
        else
            throw std::runtime_error("checkpoint: unknown activation '" + act + "'");
        layer.weights = Matrix(out, in);
        for (std::size_t r = 0; r < out; ++r) {
            expect_tag(is, "w");
            for (std::size_t c = 0; c < in; ++c) layer.weights(r, c) = read_double(is, "weight");
        }
        expect_tag(is, "b");
        layer.biases.resize(out);
        for (std::size_t r = 0; r < out; ++r) layer.biases[r] = read_double(is, "bias");
    }
    net.validate();
    return net;
}

}  // namespace

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    os << "siggame-checkpoint v1\n";
    os << "game " << model.game.n_dims << ' ' << model.game.n_objects << ' '
       << (model.game.strictness == Strictness::Strict ? "strict" : "nonstrict") << ' '
       << (model.game.sharing == Sharing::Shared ? "shared" : "nonshared") << ' '
       << model.game.latent_dim << '\n';
    os << "train " << hex(model.train.learning_rate) << ' ' << hex(model.train.beta1) << ' '
       << hex(model.train.beta2) << ' ' << model.train.steps << ' ' << model.train.batch_size
       << ' ' << model.train.seed << '\n';
    os << "final_loss " << hex(model.final_loss) << '\n';
    write_net(os, "sender", model.sender);
    write_net(os, "receiver", model.receiver);
    if (!os) throw std::runtime_error("checkpoint write failed: " + path.string());
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
    expect_tag(is, "siggame-checkpoint");
    expect_tag(is, "v1");

    TrainedModel model;
    expect_tag(is, "game");
    is >> model.game.n_dims >> model.game.n_objects;
    const std::string strictness = expect(is, "strictness");
    if (strictness == "strict")
        model.game.strictness = Strictness::Strict;
    else if (strictness == "nonstrict")
        model.game.strictness = Strictness::NonStrict;
    else
        throw std::runtime_error("checkpoint: unknown strictness '" + strictness + "'");
    const std::string sharing = expect(is, "sharing");
    if (sharing == "shared")
        model.game.sharing = Sharing::Shared;
    else if (sharing == "nonshared")
        model.game.sharing = Sharing::NonShared;
    else
        throw std::runtime_error("checkpoint: unknown sharing '" + sharing + "'");
    is >> model.game.latent_dim;

    expect_tag(is, "train");
    model.train.learning_rate = read_double(is, "learning_rate");
    model.train.beta1 = read_double(is, "beta1");
    model.train.beta2 = read_double(is, "beta2");
    is >> model.train.steps >> model.train.batch_size >> model.train.seed;

    expect_tag(is, "final_loss");
    model.final_loss = read_double(is, "final_loss");

    model.sender = read_net(is, "sender");
    model.receiver = read_net(is, "receiver");
    model.game.validate();
    model.train.validate();
    if (model.sender.input_dim() != sender_input_dim(model.game) ||
        model.receiver.input_dim() != receiver_input_dim(model.game) ||
        model.sender.output_dim() != model.game.latent_dim ||
        model.receiver.output_dim() != model.game.n_dims)
        throw std::runtime_error("checkpoint: network shapes inconsistent with game config");
    return model;
}

}  // namespace siggame

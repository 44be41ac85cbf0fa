#include "siggame/game.hpp"

#include <numeric>
#include <stdexcept>
#include <utility>

namespace siggame {

void GameConfig::validate() const {
    if (n_dims < 1) throw std::invalid_argument("game config: n_dims must be >= 1");
    if (n_objects < 1) throw std::invalid_argument("game config: n_objects must be >= 1");
    if (latent_dim < 1) throw std::invalid_argument("game config: latent_dim must be >= 1");
    if (strictness == Strictness::Strict && n_objects != 2 * n_dims)
        throw std::invalid_argument("game config: n_objects must equal 2*n_dims in strict contexts");
}

FunctionSpec argmax_of(std::size_t dim, std::size_t n_dims) {
    if (dim >= n_dims) throw std::invalid_argument("argmax_of: dim out of range");
    return {Direction::ArgMax, dim, dim};
}

FunctionSpec argmin_of(std::size_t dim, std::size_t n_dims) {
    if (dim >= n_dims) throw std::invalid_argument("argmin_of: dim out of range");
    return {Direction::ArgMin, dim, n_dims + dim};
}

FunctionSpec function_from_selector(std::size_t selector, std::size_t n_dims) {
    if (selector >= 2 * n_dims) throw std::invalid_argument("function_from_selector: out of range");
    return selector < n_dims ? argmax_of(selector, n_dims) : argmin_of(selector - n_dims, n_dims);
}

std::vector<FunctionSpec> all_functions(std::size_t n_dims) {
    std::vector<FunctionSpec> fs;
    fs.reserve(2 * n_dims);
    for (std::size_t s = 0; s < 2 * n_dims; ++s) fs.push_back(function_from_selector(s, n_dims));
    return fs;
}

std::string function_name(const FunctionSpec& f) {
    return (f.direction == Direction::ArgMax ? "argmax" : "argmin") + std::to_string(f.dim);
}

namespace {

Context sample_plain(std::size_t n_objects, std::size_t n_dims, Rng& rng) {
    Context c(n_objects, n_dims);
    for (double& v : c.features) v = rng.uniform();
    return c;
}

void permute_rows(Context& c, Rng& rng) {
    std::vector<std::size_t> perm(c.n_objects);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    std::vector<double> out(c.features.size());
    for (std::size_t r = 0; r < c.n_objects; ++r)
        for (std::size_t d = 0; d < c.n_dims; ++d) out[r * c.n_dims + d] = c.at(perm[r], d);
    c.features = std::move(out);
}

}  // namespace

Context sample_context(const GameConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.strictness == Strictness::Strict) return sample_strict_context(cfg, rng);
    return sample_plain(cfg.n_objects, cfg.n_dims, rng);
}

void make_strict(Context& c, Rng& rng) {
    const std::size_t n = c.n_dims;
    if (c.n_objects != 2 * n)
        throw std::invalid_argument("make_strict: n_objects must equal 2*n_dims");
    // Per column d: swap the max into row d, then the min into row n + d.
    // Swaps touch only column d, so other columns keep their values.
    for (std::size_t d = 0; d < n; ++d) {
        std::size_t max_row = 0;
        for (std::size_t r = 1; r < c.n_objects; ++r)
            if (c.at(r, d) > c.at(max_row, d)) max_row = r;
        std::swap(c.at(d, d), c.at(max_row, d));

        std::size_t min_row = 0;
        for (std::size_t r = 1; r < c.n_objects; ++r)
            if (c.at(r, d) < c.at(min_row, d)) min_row = r;
        std::swap(c.at(n + d, d), c.at(min_row, d));
    }
    permute_rows(c, rng);
}

Context sample_strict_context(const GameConfig& cfg, Rng& rng) {
    if (cfg.n_objects != 2 * cfg.n_dims)
        throw std::invalid_argument("sample_strict_context: n_objects must equal 2*n_dims");
    Context c = sample_plain(cfg.n_objects, cfg.n_dims, rng);
    make_strict(c, rng);
    return c;
}

bool is_strict(const Context& c) {
    if (c.n_objects == 0 || c.n_dims == 0) return false;
    std::vector<bool> taken(c.n_objects, false);
    for (const FunctionSpec& f : all_functions(c.n_dims)) {
        const std::size_t idx = apply_function(f, c);
        if (taken[idx]) return false;
        taken[idx] = true;
    }
    return true;
}

std::size_t apply_function(const FunctionSpec& f, const Context& c) {
    if (c.n_objects == 0) throw std::invalid_argument("apply_function: empty context");
    if (f.dim >= c.n_dims) throw std::invalid_argument("apply_function: dim out of range");
    std::size_t best = 0;
    if (f.direction == Direction::ArgMax) {
        for (std::size_t r = 1; r < c.n_objects; ++r)
            if (c.at(r, f.dim) > c.at(best, f.dim)) best = r;
    } else {
        for (std::size_t r = 1; r < c.n_objects; ++r)
            if (c.at(r, f.dim) < c.at(best, f.dim)) best = r;
    }
    return best;
}

Context make_receiver_context(const Context& c, const GameConfig& cfg, Rng& rng) {
    if (cfg.sharing == Sharing::Shared) {
        Context shuffled = c;
        permute_rows(shuffled, rng);
        return shuffled;
    }
    return sample_context(cfg, rng);
}

std::vector<double> one_hot(const FunctionSpec& f, std::size_t size) {
    if (f.selector_index >= size) throw std::invalid_argument("one_hot: selector index out of range");
    std::vector<double> v(size, 0.0);
    v[f.selector_index] = 1.0;
    return v;
}

bool recovery_correct(std::span<const double> output, const Context& c_prime,
                      std::size_t target_index) {
    if (output.size() != c_prime.n_dims)
        throw std::invalid_argument("recovery_correct: output length != n_dims");
    if (target_index >= c_prime.n_objects)
        throw std::invalid_argument("recovery_correct: target index out of range");
    double target_d2 = 0.0;
    for (std::size_t d = 0; d < c_prime.n_dims; ++d) {
        const double diff = output[d] - c_prime.at(target_index, d);
        target_d2 += diff * diff;
    }
    for (std::size_t r = 0; r < c_prime.n_objects; ++r) {
        if (r == target_index) continue;
        double d2 = 0.0;
        for (std::size_t d = 0; d < c_prime.n_dims; ++d) {
            const double diff = output[d] - c_prime.at(r, d);
            d2 += diff * diff;
        }
        if (d2 <= target_d2) return false;
    }
    return true;
}

}  // namespace siggame

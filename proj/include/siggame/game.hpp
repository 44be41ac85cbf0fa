#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "siggame/rng.hpp"

namespace siggame {

enum class Strictness { Strict, NonStrict };
enum class Sharing { Shared, NonShared };

struct GameConfig {
    std::size_t n_dims = 5;
    std::size_t n_objects = 10;
    Strictness strictness = Strictness::Strict;
    Sharing sharing = Sharing::Shared;
    std::size_t latent_dim = 2;

    std::size_t n_functions() const { return 2 * n_dims; }

    // throws std::invalid_argument naming the offending field
    void validate() const;
};

// Objects x features, row-major. Rows are objects, entries in [0, 1).
struct Context {
    std::size_t n_objects = 0;
    std::size_t n_dims = 0;
    std::vector<double> features;

    Context() = default;
    Context(std::size_t objects, std::size_t dims)
        : n_objects(objects), n_dims(dims), features(objects * dims, 0.0) {}

    double& at(std::size_t obj, std::size_t dim) { return features[obj * n_dims + dim]; }
    double at(std::size_t obj, std::size_t dim) const { return features[obj * n_dims + dim]; }
    std::span<const double> row(std::size_t obj) const {
        return {features.data() + obj * n_dims, n_dims};
    }
};

enum class Direction { ArgMax, ArgMin };

// One element of the function family: extremize one feature dimension.
// selector_index is the fixed one-hot encoding: argmax block first, then
// the argmin block (argmax_d -> d, argmin_d -> n_dims + d).
struct FunctionSpec {
    Direction direction = Direction::ArgMax;
    std::size_t dim = 0;
    std::size_t selector_index = 0;
};

FunctionSpec argmax_of(std::size_t dim, std::size_t n_dims);
FunctionSpec argmin_of(std::size_t dim, std::size_t n_dims);
FunctionSpec function_from_selector(std::size_t selector, std::size_t n_dims);
// All 2*n_dims functions in selector order.
std::vector<FunctionSpec> all_functions(std::size_t n_dims);
std::string function_name(const FunctionSpec& f);

// n_objects i.i.d. objects with uniform [0,1) features; delegates to
// sample_strict_context when the config is strict.
Context sample_context(const GameConfig& cfg, Rng& rng);

// Rearranges values within each column so that each object is the extremum
// of exactly one (direction, dimension), then permutes the rows. Requires
// n_objects == 2 * n_dims. Column multisets are preserved.
void make_strict(Context& c, Rng& rng);
Context sample_strict_context(const GameConfig& cfg, Rng& rng);

// True iff f -> apply_function(f, c) is injective over all 2*n_dims functions.
bool is_strict(const Context& c);

// Index of the row extremizing column f.dim; ties break to the lowest index.
std::size_t apply_function(const FunctionSpec& f, const Context& c);

// Shared: uniformly random row permutation of c. NonShared: fresh sample.
Context make_receiver_context(const Context& c, const GameConfig& cfg, Rng& rng);

std::vector<double> one_hot(const FunctionSpec& f, std::size_t size);

// True iff output is strictly closer (Euclidean) to the target row than to
// every other row. Ties count as incorrect.
bool recovery_correct(std::span<const double> output, const Context& c_prime,
                      std::size_t target_index);

}  // namespace siggame

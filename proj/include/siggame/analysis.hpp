#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "siggame/agents.hpp"

namespace siggame {

// Messages produced by the sender for n_contexts sampled contexts x all
// functions, with the source function selector as ground-truth label.
struct LabeledMessageSet {
    std::vector<std::vector<double>> messages;
    std::vector<std::size_t> labels;       // selector index per message
    std::vector<std::size_t> context_ids;  // per message, into `contexts`
    std::vector<Context> contexts;
};

LabeledMessageSet collect_messages(const TrainedModel& model, std::size_t n_contexts, Rng& rng);

inline constexpr int kNoise = -1;

// Clustering/probe defaults used by the experiment runner.
inline constexpr double kDbscanEps = 0.5;
inline constexpr std::size_t kDbscanMinPts = 5;
inline constexpr std::size_t kArtificialMessageK = 10;
inline constexpr std::size_t kCpDraws = 10;

// Standard density-based clustering (Euclidean); returns one cluster id
// per point, kNoise for noise. Deterministic: points are scanned in index
// order and clusters numbered by discovery.
std::vector<int> dbscan(const std::vector<std::vector<double>>& points, double eps,
                        std::size_t min_pts);

struct Clustering {
    std::vector<int> assignment;              // cluster id or kNoise per point
    std::vector<std::size_t> majority_label;  // per cluster id, ground-truth majority
    std::vector<std::size_t> sizes;           // per cluster id
    std::size_t n_clusters() const { return majority_label.size(); }
};

// Labels each cluster with the most frequent ground-truth function among
// its members (ties to the lowest selector).
Clustering label_clusters(const std::vector<int>& assignment,
                          const std::vector<std::size_t>& labels, std::size_t n_classes);

// Macro F1 over the n_classes functions. Each point predicts its cluster's
// majority label; noise predicts nothing and counts as a false negative.
double cluster_f1(const Clustering& clustering, const std::vector<std::size_t>& labels,
                  std::size_t n_classes);

// Componentwise mean of k members sampled without replacement (all members
// when the cluster is smaller than k).
std::vector<double> artificial_message(const std::vector<std::vector<double>>& members,
                                       std::size_t k, Rng& rng);

struct PerceptionResult {
    double accuracy = 0.0;
    std::size_t functions_covered = 0;  // functions that had at least one cluster
    bool undersized_cluster = false;    // some cluster had fewer than k members
};

// Builds one artificial message per function (from its largest cluster) and
// scores receiver recovery over n_contexts fresh contexts. Functions with
// no cluster are skipped and reported via functions_covered.
PerceptionResult perception_accuracy(const TrainedModel& model, const LabeledMessageSet& set,
                                     const Clustering& clustering, std::size_t k,
                                     std::size_t n_contexts, Rng& rng);

struct AnalogyResult {
    double accuracy = 0.0;               // mean over ordered pairs i != j and contexts
    std::vector<double> per_dim;         // per target dimension i
    double identity_accuracy = 0.0;      // i == j control: m_i - m_i + m_i
    double exact_accuracy = 0.0;         // same plays scored with the raw message
};

// Vector-offset probe: does m(c,argmax_j) - m(c,argmin_j) + m(c,argmin_i)
// behave like m(c,argmax_i)?
AnalogyResult analogy_probe(const TrainedModel& model, std::size_t n_contexts, Rng& rng);

// Maps (m(c,argmax_j), m(c,argmin_j), m(c,argmin_i0)) to a predicted
// m(c,argmax_i0); the last argument is the true message, available so tests
// can substitute an oracle.
using CompositionPredictor = std::function<std::vector<double>(
    std::span<const double>, std::span<const double>, std::span<const double>,
    std::span<const double>)>;

struct CompositionConfig {
    std::size_t n_train_contexts = 100;
    std::size_t n_test_contexts = 100;
    std::size_t steps = 2000;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
};

struct CompositionResult {
    double accuracy = 0.0;            // mean of per_holdout
    std::vector<double> per_holdout;  // per held-out dimension i0
};

// Trains a composition network (2x64 ReLU) per held-out dimension i0 on
// tuples from all pairs with i != i0, j not in {i, i0}, then scores receiver
// recovery of argmax_i0 from the predicted message.
CompositionResult composition_probe(const TrainedModel& model, const CompositionConfig& cfg,
                                    Rng& rng);

// Single hold-out evaluated with an injected predictor (test hook).
double composition_holdout_accuracy(const TrainedModel& model, std::size_t held_out_dim,
                                    std::size_t n_test_contexts, Rng& rng,
                                    const CompositionPredictor& predictor);

struct CpCurve {
    std::vector<double> t;
    std::vector<double> acc_f_minus;
    std::vector<double> acc_f_plus;
};

// 81-point grid over [-2, 2] with exact -1, 0, +1 entries.
std::vector<double> default_cp_grid();

// One draw: sample a context, take the two endpoint messages, and score the
// interpolated message M_t = ((1-t) M_minus + (1+t) M_plus) / 2 against both
// functions' targets over n_contexts fresh receiver contexts (fixed across t).
CpCurve cp_sweep_pair(const TrainedModel& model, const FunctionSpec& f_minus,
                      const FunctionSpec& f_plus, const std::vector<double>& t_grid,
                      std::size_t n_contexts, Rng& rng);

struct CpSweepResult {
    CpCurve mean;
    std::vector<CpCurve> draws;
    std::vector<std::pair<FunctionSpec, FunctionSpec>> pairs;
};

// Averages cp_sweep_pair over n_draws (context, function-pair) draws with
// the pair sampled uniformly without replacement.
CpSweepResult cp_sweep(const TrainedModel& model, const std::vector<double>& t_grid,
                       std::size_t n_draws, std::size_t n_contexts, Rng& rng);

}  // namespace siggame

#include "siggame/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace siggame {

LabeledMessageSet collect_messages(const TrainedModel& model, std::size_t n_contexts, Rng& rng) {
    const auto functions = all_functions(model.game.n_dims);
    LabeledMessageSet set;
    set.contexts.reserve(n_contexts);
    set.messages.reserve(n_contexts * functions.size());
    for (std::size_t i = 0; i < n_contexts; ++i) {
        set.contexts.push_back(sample_context(model.game, rng));
        for (const FunctionSpec& f : functions) {
            set.messages.push_back(sender_forward(model, set.contexts.back(), f));
            set.labels.push_back(f.selector_index);
            set.context_ids.push_back(i);
        }
    }
    return set;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

std::vector<std::size_t> region_query(const std::vector<std::vector<double>>& points,
                                      std::size_t p, double eps2) {
    std::vector<std::size_t> neighbors;
    for (std::size_t q = 0; q < points.size(); ++q)
        if (sq_dist(points[p], points[q]) <= eps2) neighbors.push_back(q);
    return neighbors;
}

}  // namespace

std::vector<int> dbscan(const std::vector<std::vector<double>>& points, double eps,
                        std::size_t min_pts) {
    if (eps <= 0.0) throw std::invalid_argument("dbscan: eps must be > 0");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    constexpr int kUnclassified = -2;
    const double eps2 = eps * eps;
    std::vector<int> labels(points.size(), kUnclassified);
    int cluster = 0;
    for (std::size_t p = 0; p < points.size(); ++p) {
        if (labels[p] != kUnclassified) continue;
        std::vector<std::size_t> neighbors = region_query(points, p, eps2);
        if (neighbors.size() < min_pts) {
            labels[p] = kNoise;
            continue;
        }
        labels[p] = cluster;
        std::deque<std::size_t> seeds(neighbors.begin(), neighbors.end());
        while (!seeds.empty()) {
            const std::size_t q = seeds.front();
            seeds.pop_front();
            if (labels[q] == kNoise) labels[q] = cluster;  // border point
            if (labels[q] != kUnclassified) continue;
            labels[q] = cluster;
            std::vector<std::size_t> q_neighbors = region_query(points, q, eps2);
            if (q_neighbors.size() >= min_pts)
                seeds.insert(seeds.end(), q_neighbors.begin(), q_neighbors.end());
        }
        ++cluster;
    }
    return labels;
}

Clustering label_clusters(const std::vector<int>& assignment,
                          const std::vector<std::size_t>& labels, std::size_t n_classes) {
    if (assignment.size() != labels.size())
        throw std::invalid_argument("label_clusters: assignment/labels length mismatch");
    Clustering clustering;
    clustering.assignment = assignment;
    int max_id = -1;
    for (int id : assignment) max_id = std::max(max_id, id);
    const std::size_t n_clusters = static_cast<std::size_t>(max_id + 1);
    std::vector<std::vector<std::size_t>> counts(n_clusters,
                                                 std::vector<std::size_t>(n_classes, 0));
    clustering.sizes.assign(n_clusters, 0);
    for (std::size_t p = 0; p < assignment.size(); ++p) {
        if (assignment[p] == kNoise) continue;
        if (labels[p] >= n_classes) throw std::invalid_argument("label_clusters: label out of range");
        counts[static_cast<std::size_t>(assignment[p])][labels[p]] += 1;
        clustering.sizes[static_cast<std::size_t>(assignment[p])] += 1;
    }
    clustering.majority_label.resize(n_clusters);
    for (std::size_t cl = 0; cl < n_clusters; ++cl) {
        std::size_t best = 0;
        for (std::size_t g = 1; g < n_classes; ++g)
            if (counts[cl][g] > counts[cl][best]) best = g;
        clustering.majority_label[cl] = best;
    }
    return clustering;
}

double cluster_f1(const Clustering& clustering, const std::vector<std::size_t>& labels,
                  std::size_t n_classes) {
    if (clustering.assignment.size() != labels.size())
        throw std::invalid_argument("cluster_f1: assignment/labels length mismatch");
    std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
        const std::size_t truth = labels[p];
        if (clustering.assignment[p] == kNoise) {
            fn[truth] += 1;
            continue;
        }
        const std::size_t pred =
            clustering.majority_label[static_cast<std::size_t>(clustering.assignment[p])];
        if (pred == truth) {
            tp[truth] += 1;
        } else {
            fp[pred] += 1;
            fn[truth] += 1;
        }
    }
    double sum = 0.0;
    for (std::size_t g = 0; g < n_classes; ++g) {
        const double denom = static_cast<double>(2 * tp[g] + fp[g] + fn[g]);
        sum += denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp[g]) / denom;
    }
    return sum / static_cast<double>(n_classes);
}

std::vector<double> artificial_message(const std::vector<std::vector<double>>& members,
                                       std::size_t k, Rng& rng) {
    if (members.empty()) throw std::invalid_argument("artificial_message: empty cluster");
    std::vector<std::size_t> order(members.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const std::size_t take = std::min(k, members.size());
    std::vector<double> mean(members.front().size(), 0.0);
    for (std::size_t i = 0; i < take; ++i)
        for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += members[order[i]][d];
    for (double& v : mean) v /= static_cast<double>(take);
    return mean;
}

PerceptionResult perception_accuracy(const TrainedModel& model, const LabeledMessageSet& set,
                                     const Clustering& clustering, std::size_t k,
                                     std::size_t n_contexts, Rng& rng) {
    const std::size_t n_classes = model.game.n_functions();
    // largest cluster per function label (ties to the lower cluster id)
    std::vector<int> cluster_for_function(n_classes, kNoise);
    for (std::size_t cl = 0; cl < clustering.n_clusters(); ++cl) {
        const std::size_t g = clustering.majority_label[cl];
        if (clustering.sizes[cl] == 0) continue;
        if (cluster_for_function[g] == kNoise ||
            clustering.sizes[cl] > clustering.sizes[static_cast<std::size_t>(cluster_for_function[g])])
            cluster_for_function[g] = static_cast<int>(cl);
    }

    PerceptionResult result;
    std::vector<std::vector<double>> message_for_function(n_classes);
    for (std::size_t g = 0; g < n_classes; ++g) {
        if (cluster_for_function[g] == kNoise) continue;
        std::vector<std::vector<double>> members;
        for (std::size_t p = 0; p < set.messages.size(); ++p)
            if (clustering.assignment[p] == cluster_for_function[g])
                members.push_back(set.messages[p]);
        if (members.size() < k) result.undersized_cluster = true;
        message_for_function[g] = artificial_message(members, k, rng);
        result.functions_covered += 1;
    }
    if (result.functions_covered == 0) return result;

    const auto functions = all_functions(model.game.n_dims);
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < n_contexts; ++i) {
        const Context c_prime = sample_context(model.game, rng);
        for (const FunctionSpec& f : functions) {
            if (message_for_function[f.selector_index].empty()) continue;
            const auto output = receiver_forward(model, message_for_function[f.selector_index], c_prime);
            if (recovery_correct(output, c_prime, apply_function(f, c_prime))) ++correct;
            ++total;
        }
    }
    result.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    return result;
}

AnalogyResult analogy_probe(const TrainedModel& model, std::size_t n_contexts, Rng& rng) {
    const std::size_t n = model.game.n_dims;
    AnalogyResult result;
    result.per_dim.assign(n, 0.0);
    std::vector<std::size_t> per_dim_total(n, 0);
    std::size_t correct = 0, total = 0;
    std::size_t identity_correct = 0, identity_total = 0;
    std::size_t exact_correct = 0, exact_total = 0;
    std::vector<std::vector<double>> msgs(2 * n);
    std::vector<double> rhs(model.game.latent_dim);

    for (std::size_t ctx = 0; ctx < n_contexts; ++ctx) {
        const Context c = sample_context(model.game, rng);
        const Context c_prime = make_receiver_context(c, model.game, rng);
        for (const FunctionSpec& f : all_functions(n))
            msgs[f.selector_index] = sender_forward(model, c, f);

        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t target = apply_function(argmax_of(i, n), c_prime);
            const auto& max_i = msgs[argmax_of(i, n).selector_index];
            const auto& min_i = msgs[argmin_of(i, n).selector_index];
            for (std::size_t j = 0; j < n; ++j) {
                const auto& max_j = msgs[argmax_of(j, n).selector_index];
                const auto& min_j = msgs[argmin_of(j, n).selector_index];
                for (std::size_t d = 0; d < rhs.size(); ++d)
                    rhs[d] = max_j[d] - min_j[d] + min_i[d];
                const bool ok =
                    recovery_correct(receiver_forward(model, rhs, c_prime), c_prime, target);
                if (i == j) {
                    identity_correct += ok;
                    ++identity_total;
                } else {
                    correct += ok;
                    ++total;
                    result.per_dim[i] += ok;
                    per_dim_total[i] += 1;
                }
            }
            const bool exact_ok =
                recovery_correct(receiver_forward(model, max_i, c_prime), c_prime, target);
            exact_correct += exact_ok;
            ++exact_total;
        }
    }
    result.accuracy = total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
    for (std::size_t i = 0; i < n; ++i)
        result.per_dim[i] = per_dim_total[i] == 0 ? 0.0 : result.per_dim[i] / per_dim_total[i];
    result.identity_accuracy =
        identity_total == 0 ? 0.0 : static_cast<double>(identity_correct) / identity_total;
    result.exact_accuracy =
        exact_total == 0 ? 0.0 : static_cast<double>(exact_correct) / exact_total;
    return result;
}

namespace {

struct CompositionSample {
    std::vector<double> input;   // max_j ++ min_j ++ min_i
    std::vector<double> target;  // max_i
};

}  // namespace

double composition_holdout_accuracy(const TrainedModel& model, std::size_t held_out_dim,
                                    std::size_t n_test_contexts, Rng& rng,
                                    const CompositionPredictor& predictor) {
    const std::size_t n = model.game.n_dims;
    if (held_out_dim >= n) throw std::invalid_argument("composition probe: held-out dim out of range");
    std::vector<std::vector<double>> msgs(2 * n);
    std::size_t correct = 0, total = 0;
    for (std::size_t ctx = 0; ctx < n_test_contexts; ++ctx) {
        const Context c = sample_context(model.game, rng);
        const Context c_prime = make_receiver_context(c, model.game, rng);
        for (const FunctionSpec& f : all_functions(n))
            msgs[f.selector_index] = sender_forward(model, c, f);
        const std::size_t target = apply_function(argmax_of(held_out_dim, n), c_prime);
        const auto& min_i0 = msgs[argmin_of(held_out_dim, n).selector_index];
        const auto& max_i0 = msgs[argmax_of(held_out_dim, n).selector_index];
        for (std::size_t j = 0; j < n; ++j) {
            if (j == held_out_dim) continue;
            const auto predicted = predictor(msgs[argmax_of(j, n).selector_index],
                                             msgs[argmin_of(j, n).selector_index], min_i0, max_i0);
            const bool ok =
                recovery_correct(receiver_forward(model, predicted, c_prime), c_prime, target);
            correct += ok;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

CompositionResult composition_probe(const TrainedModel& model, const CompositionConfig& cfg,
                                    Rng& rng) {
    const std::size_t n = model.game.n_dims;
    const std::size_t latent = model.game.latent_dim;
    CompositionResult result;
    result.per_holdout.reserve(n);

    for (std::size_t i0 = 0; i0 < n; ++i0) {
        // training tuples over fresh contexts; the held-out dimension never
        // appears, neither as i nor as j
        std::vector<CompositionSample> samples;
        std::vector<std::vector<double>> msgs(2 * n);
        for (std::size_t ctx = 0; ctx < cfg.n_train_contexts; ++ctx) {
            const Context c = sample_context(model.game, rng);
            for (const FunctionSpec& f : all_functions(n))
                msgs[f.selector_index] = sender_forward(model, c, f);
            for (std::size_t i = 0; i < n; ++i) {
                if (i == i0) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i || j == i0) continue;
                    CompositionSample s;
                    s.input = msgs[argmax_of(j, n).selector_index];
                    const auto& min_j = msgs[argmin_of(j, n).selector_index];
                    const auto& min_i = msgs[argmin_of(i, n).selector_index];
                    s.input.insert(s.input.end(), min_j.begin(), min_j.end());
                    s.input.insert(s.input.end(), min_i.begin(), min_i.end());
                    s.target = msgs[argmax_of(i, n).selector_index];
                    samples.push_back(std::move(s));
                }
            }
        }
        if (samples.empty())
            throw std::invalid_argument("composition probe: need n_dims >= 3 for training pairs");

        Mlp comp = make_mlp({3 * latent, 64, 64, latent},
                            {Activation::Relu, Activation::Relu, Activation::Identity}, rng);
        AdamState state = make_adam_state(comp, {cfg.learning_rate, 0.9, 0.999, 1e-8});
        Gradients grads = make_zero_gradients(comp);
        ForwardCache cache;
        const double batch = static_cast<double>(cfg.batch_size);
        std::vector<double> output_grad(latent);
        for (std::size_t step = 0; step < cfg.steps; ++step) {
            zero_gradients(grads);
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                const CompositionSample& s = samples[rng.below(samples.size())];
                mlp_forward_cached(comp, s.input, cache);
                const double scale = 2.0 / (static_cast<double>(latent) * batch);
                for (std::size_t d = 0; d < latent; ++d)
                    output_grad[d] = scale * (cache.output[d] - s.target[d]);
                mlp_backward_accumulate(comp, cache, output_grad, grads);
            }
            adam_step(comp, grads, state);
        }

        const CompositionPredictor predictor =
            [&comp](std::span<const double> max_j, std::span<const double> min_j,
                    std::span<const double> min_i0, std::span<const double>) {
                std::vector<double> input(max_j.begin(), max_j.end());
                input.insert(input.end(), min_j.begin(), min_j.end());
                input.insert(input.end(), min_i0.begin(), min_i0.end());
                return mlp_forward(comp, input);
            };
        result.per_holdout.push_back(
            composition_holdout_accuracy(model, i0, cfg.n_test_contexts, rng, predictor));
    }

    double sum = 0.0;
    for (double a : result.per_holdout) sum += a;
    result.accuracy = sum / static_cast<double>(result.per_holdout.size());
    return result;
}

std::vector<double> default_cp_grid() {
    std::vector<double> grid(81);
    for (int k = 0; k < 81; ++k) grid[static_cast<std::size_t>(k)] = (k - 40) / 20.0;
    return grid;
}

CpCurve cp_sweep_pair(const TrainedModel& model, const FunctionSpec& f_minus,
                      const FunctionSpec& f_plus, const std::vector<double>& t_grid,
                      std::size_t n_contexts, Rng& rng) {
    if (f_minus.selector_index == f_plus.selector_index)
        throw std::invalid_argument("cp_sweep_pair: functions must differ");
    const Context c = sample_context(model.game, rng);
    const std::vector<double> m_minus = sender_forward(model, c, f_minus);
    const std::vector<double> m_plus = sender_forward(model, c, f_plus);

    std::vector<Context> receiver_contexts;
    std::vector<std::size_t> targets_minus, targets_plus;
    receiver_contexts.reserve(n_contexts);
    for (std::size_t i = 0; i < n_contexts; ++i) {
        receiver_contexts.push_back(sample_context(model.game, rng));
        targets_minus.push_back(apply_function(f_minus, receiver_contexts.back()));
        targets_plus.push_back(apply_function(f_plus, receiver_contexts.back()));
    }

    CpCurve curve;
    curve.t = t_grid;
    curve.acc_f_minus.resize(t_grid.size());
    curve.acc_f_plus.resize(t_grid.size());
    std::vector<double> message(model.game.latent_dim);
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        const double t = t_grid[k];
        for (std::size_t d = 0; d < message.size(); ++d)
            message[d] = ((1.0 - t) * m_minus[d] + (1.0 + t) * m_plus[d]) / 2.0;
        std::size_t hit_minus = 0, hit_plus = 0;
        for (std::size_t i = 0; i < n_contexts; ++i) {
            const auto output = receiver_forward(model, message, receiver_contexts[i]);
            hit_minus += recovery_correct(output, receiver_contexts[i], targets_minus[i]);
            hit_plus += recovery_correct(output, receiver_contexts[i], targets_plus[i]);
        }
        curve.acc_f_minus[k] = static_cast<double>(hit_minus) / static_cast<double>(n_contexts);
        curve.acc_f_plus[k] = static_cast<double>(hit_plus) / static_cast<double>(n_contexts);
    }
    return curve;
}

CpSweepResult cp_sweep(const TrainedModel& model, const std::vector<double>& t_grid,
                       std::size_t n_draws, std::size_t n_contexts, Rng& rng) {
    const std::size_t n_funcs = model.game.n_functions();
    if (n_funcs < 2) throw std::invalid_argument("cp_sweep: need at least two functions");
    CpSweepResult result;
    result.mean.t = t_grid;
    result.mean.acc_f_minus.assign(t_grid.size(), 0.0);
    result.mean.acc_f_plus.assign(t_grid.size(), 0.0);
    for (std::size_t draw = 0; draw < n_draws; ++draw) {
        const std::size_t a = rng.below(n_funcs);
        std::size_t b = rng.below(n_funcs - 1);
        if (b >= a) ++b;
        const FunctionSpec f_minus = function_from_selector(a, model.game.n_dims);
        const FunctionSpec f_plus = function_from_selector(b, model.game.n_dims);
        result.pairs.emplace_back(f_minus, f_plus);
        result.draws.push_back(cp_sweep_pair(model, f_minus, f_plus, t_grid, n_contexts, rng));
        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            result.mean.acc_f_minus[k] += result.draws.back().acc_f_minus[k];
            result.mean.acc_f_plus[k] += result.draws.back().acc_f_plus[k];
        }
    }
    const double d = static_cast<double>(n_draws);
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        result.mean.acc_f_minus[k] /= d;
        result.mean.acc_f_plus[k] /= d;
    }
    return result;
}

}  // namespace siggame

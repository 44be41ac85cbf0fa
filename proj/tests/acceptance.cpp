// End-to-end acceptance suite: trains the full battery of game settings and
// checks every reproduction target, printing one PASS/FAIL line per
// criterion. Runtime is dominated by 8 settings x 10 seeds of full training
// (roughly 15 minutes single-threaded).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "siggame/report.hpp"
#include "test_util.hpp"

using namespace siggame;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int n, bool ok, const std::string& text) {
    std::printf("[%s] criterion %2d: %s\n", ok ? "PASS" : "FAIL", n, text.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string pct(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point start = clock::now();
    return std::chrono::duration<double>(clock::now() - start).count();
}

struct CellMeans {
    double accuracy = 0.0;
    double f1 = 0.0;
    double perception = 0.0;
    double analogy = 0.0;
    double composition = 0.0;
    std::size_t n = 0;
};

CellMeans cell_means(const std::vector<TrialReport>& reports, std::size_t cell) {
    CellMeans m;
    for (const auto& r : reports) {
        if (r.cell != cell) continue;
        m.accuracy += r.accuracy;
        m.f1 += r.f1.value_or(0.0);
        m.perception += r.perception.value_or(0.0);
        m.analogy += r.analogy.value_or(0.0);
        m.composition += r.composition.value_or(0.0);
        m.n += 1;
    }
    if (m.n > 0) {
        const double d = static_cast<double>(m.n);
        m.accuracy /= d;
        m.f1 /= d;
        m.perception /= d;
        m.analogy /= d;
        m.composition /= d;
    }
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void criterion_1_gradient_oracle() {
    Rng meta(101);
    double worst_rel = 0.0, worst_abs = 0.0;
    const double t0 = now_seconds();
    for (int net_idx = 0; net_idx < 50; ++net_idx) {
        const std::size_t n_layers = 1 + meta.below(3);
        std::vector<std::size_t> dims{2 + meta.below(7)};
        std::vector<Activation> acts;
        for (std::size_t k = 0; k < n_layers; ++k) {
            dims.push_back(2 + meta.below(7));
            acts.push_back(k + 1 < n_layers ? Activation::Relu : Activation::Identity);
        }
        if (net_idx % 3 == 0) acts.back() = Activation::Relu;
        Rng rng(500 + static_cast<std::uint64_t>(net_idx));
        Mlp net = make_mlp(dims, acts, rng);
        // random biases keep pre-activations off the exact relu kink, where
        // central differences do not estimate a derivative
        for (auto& layer : net.layers)
            for (double& b : layer.biases) b = rng.uniform(-0.3, 0.3);
        std::vector<double> input(dims.front()), target(dims.back());
        for (double& v : input) v = rng.uniform(-1.5, 1.5);
        for (double& v : target) v = rng.uniform(-1.0, 1.0);
        const auto fd = testutil::fd_gradient_check(net, input, target);
        worst_rel = std::max(worst_rel, fd.max_rel_err);
        worst_abs = std::max(worst_abs, fd.max_abs_err_small);
    }
    const bool ok = worst_rel < 1e-4 && worst_abs < 1e-8;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "gradient oracle: 50 nets, max rel err %.2e (< 1e-4), %.1fs", worst_rel,
                  now_seconds() - t0);
    report(1, ok, buf);
}

void criterion_2_chance_baseline() {
    TrainConfig tc;
    tc.steps = 0;
    tc.seed = 202;
    const TrainedModel model =
        make_untrained_model({5, 10, Strictness::Strict, Sharing::Shared, 2}, tc);
    Rng rng(203);
    const double acc = evaluate_accuracy(model, 100, rng);  // 1000 plays
    report(2, std::abs(acc - 0.10) <= 0.03,
           "untrained accuracy " + pct(acc) + "% vs 10% +- 3 (1000 plays)");
}

void criterion_9_dbscan_oracle() {
    const double t0 = now_seconds();
    Rng meta(909);
    bool all_ok = true;
    for (int ds = 0; ds < 100; ++ds) {
        const std::size_t n = 50 + meta.below(251);  // up to 300 points
        const double span = 0.8 + meta.uniform(0.0, 4.0);
        const double eps = 0.2 + meta.uniform(0.0, 0.25);
        const std::size_t min_pts = 3 + meta.below(4);
        std::vector<std::vector<double>> pts(n, std::vector<double>(2));
        for (auto& p : pts)
            for (double& v : p) v = meta.uniform(0.0, span);
        const auto labels = dbscan(pts, eps, min_pts);
        if (!testutil::dbscan_matches_oracle(pts, labels, eps, min_pts)) all_ok = false;
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "dbscan equals reachability oracle on 100 datasets, %.1fs",
                  now_seconds() - t0);
    report(9, all_ok, buf);
}

void criterion_10_strictness() {
    GameConfig cfg{5, 10, Strictness::Strict, Sharing::Shared, 2};
    bool all_strict = true, multisets_ok = true;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed);
        if (!is_strict(sample_strict_context(cfg, rng))) all_strict = false;
    }
    GameConfig plain{5, 10, Strictness::NonStrict, Sharing::Shared, 2};
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(7000 + seed);
        const Context before = sample_context(plain, rng);
        Context after = before;
        make_strict(after, rng);
        for (std::size_t d = 0; d < before.n_dims; ++d) {
            std::vector<double> a, b;
            for (std::size_t r = 0; r < before.n_objects; ++r) {
                a.push_back(before.at(r, d));
                b.push_back(after.at(r, d));
            }
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            if (a != b) multisets_ok = false;
        }
    }
    report(10, all_strict && multisets_ok,
           std::string("1000 strict contexts: is_strict ") + (all_strict ? "all true" : "VIOLATED") +
               ", column multisets " + (multisets_ok ? "preserved" : "BROKEN"));
}

std::vector<TrialReport> run_battery(const fs::path& out) {
    ExperimentPlan plan;
    plan.cells = default_cells();
    plan.trials_per_cell = 10;
    plan.master_seed = 1;
    plan.analysis_contexts = 100;
    plan.out_dir = out;
    plan.verbose = true;
    std::fprintf(stderr, "training %zu cells x %zu trials (full 5000-step runs)...\n",
                 plan.cells.size(), plan.trials_per_cell);
    return run(plan);
}

void criterion_3_table1(const std::vector<CellMeans>& means) {
    const double strict_shared = 100.0 * means[0].accuracy;
    const double strict_nonshared = 100.0 * means[1].accuracy;
    const double ns15_shared = 100.0 * means[6].accuracy;
    const bool ok = std::abs(strict_shared - 63.78) <= 8.0 &&
                    std::abs(strict_nonshared - 60.22) <= 8.0 &&
                    std::abs(ns15_shared - 27.58) <= 6.0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "communicative success: strict/shared %.2f%% (63.78+-8), strict/non-shared %.2f%% (60.22+-8), "
                  "non-strict/shared-15 %.2f%% (27.58+-6)",
                  strict_shared, strict_nonshared, ns15_shared);
    report(3, ok, buf);
}

void criterion_4_ordering(const std::vector<CellMeans>& means) {
    // cells: 0 strict/sh, 1 strict/nonsh, 2 ns5/sh, 3 ns5/nonsh,
    //        4 ns10/sh, 5 ns10/nonsh, 6 ns15/sh, 7 ns15/nonsh
    const bool strict_tops_shared = means[0].accuracy > means[2].accuracy &&
                                    means[0].accuracy > means[4].accuracy &&
                                    means[0].accuracy > means[6].accuracy;
    const bool strict_tops_nonshared = means[1].accuracy > means[3].accuracy &&
                                       means[1].accuracy > means[5].accuracy &&
                                       means[1].accuracy > means[7].accuracy;
    const bool shared_monotone =
        means[2].accuracy > means[4].accuracy && means[4].accuracy > means[6].accuracy;
    const bool nonshared_monotone =
        means[3].accuracy > means[5].accuracy && means[5].accuracy > means[7].accuracy;
    char buf[240];
    std::snprintf(buf, sizeof buf,
                  "ordering: strict tops non-strict (sh %d, nonsh %d); non-strict falls with "
                  "objects (sh %.1f>%.1f>%.1f, nonsh %.1f>%.1f>%.1f)",
                  strict_tops_shared, strict_tops_nonshared, 100 * means[2].accuracy,
                  100 * means[4].accuracy, 100 * means[6].accuracy, 100 * means[3].accuracy,
                  100 * means[5].accuracy, 100 * means[7].accuracy);
    report(4, strict_tops_shared && strict_tops_nonshared && shared_monotone && nonshared_monotone,
           buf);
}

void criterion_5_table2(const std::vector<TrialReport>& reports,
                        const std::vector<CellMeans>& means) {
    const bool trained_ok = means[0].f1 >= 0.90 && means[4].f1 >= 0.90 && means[6].f1 >= 0.90;
    double max_untrained = 0.0;
    for (const auto& r : reports) max_untrained = std::max(max_untrained, r.untrained_f1.value_or(0.0));
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "production clustering: F1 strict/shared %.3f, ns10/shared %.3f, ns15/shared %.3f (all >= "
                  "0.90); untrained F1 max %.3f (<= 0.3)",
                  means[0].f1, means[4].f1, means[6].f1, max_untrained);
    report(5, trained_ok && max_untrained <= 0.3, buf);
}

void criterion_6_table3(const std::vector<CellMeans>& means) {
    const double gap = 100.0 * std::abs(means[0].perception - means[0].accuracy);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "perception: strict/shared artificial-message accuracy %.2f%% vs %.2f%% (gap %.2f "
                  "<= 6 points)",
                  100 * means[0].perception, 100 * means[0].accuracy, gap);
    report(6, gap <= 6.0, buf);
}

void criterion_7_table4(const std::vector<CellMeans>& means) {
    bool ok = true;
    std::string detail;
    for (std::size_t cell = 0; cell < means.size(); ++cell) {
        const double analogy_drop = 100.0 * (means[cell].accuracy - means[cell].analogy);
        const double comp_drop = 100.0 * (means[cell].accuracy - means[cell].composition);
        if (analogy_drop < 24.0 || comp_drop < 24.0) ok = false;
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s%zu:%.1f/%.1f", cell ? " " : "", cell, analogy_drop,
                      comp_drop);
        detail += buf;
    }
    const bool strict_shared_low = means[0].analogy <= 0.20;
    if (!strict_shared_low) ok = false;
    report(7, ok,
           "probe drops (analogy/composition, >= 24 points per cell) " + detail +
               "; strict/shared analogy " + pct(means[0].analogy) + "% (<= 20%)");
}

void criterion_8_cp(const std::vector<TrialReport>& reports, const fs::path& out) {
    const TrialReport* strict_nonshared = nullptr;
    for (const auto& r : reports)
        if (r.cell == 1) {
            strict_nonshared = &r;
            break;
        }
    if (!strict_nonshared || strict_nonshared->checkpoint_path.empty()) {
        report(8, false, "cp sweep: no strict/non-shared checkpoint available");
        return;
    }
    const TrainedModel model = load_checkpoint(out / strict_nonshared->checkpoint_path);
    const auto grid = default_cp_grid();
    const std::size_t minus_end = 20, plus_end = 60;  // t = -1, +1
    bool endpoints_exact = true;
    std::size_t crossings = 0;
    double minus_acc_at_plus1 = 0.0;
    Rng pair_rng(808);
    const std::size_t n_draws = 10, n_contexts = 100;
    for (std::size_t draw = 0; draw < n_draws; ++draw) {
        const std::size_t a = pair_rng.below(10);
        std::size_t b = pair_rng.below(9);
        if (b >= a) ++b;
        const FunctionSpec f_minus = function_from_selector(a, 5);
        const FunctionSpec f_plus = function_from_selector(b, 5);
        const std::uint64_t stream = derive_seed(818, draw);

        Rng sweep_rng(stream);
        const CpCurve curve = cp_sweep_pair(model, f_minus, f_plus, grid, n_contexts, sweep_rng);

        // replay the identical sampling stream to score the raw endpoint messages
        Rng replay(stream);
        const Context c = sample_context(model.game, replay);
        const auto m_minus = sender_forward(model, c, f_minus);
        const auto m_plus = sender_forward(model, c, f_plus);
        std::size_t hit_minus = 0, hit_plus = 0;
        for (std::size_t i = 0; i < n_contexts; ++i) {
            const Context cp = sample_context(model.game, replay);
            hit_minus += recovery_correct(receiver_forward(model, m_minus, cp), cp,
                                          apply_function(f_minus, cp));
            hit_plus += recovery_correct(receiver_forward(model, m_plus, cp), cp,
                                         apply_function(f_plus, cp));
        }
        if (curve.acc_f_minus[minus_end] != static_cast<double>(hit_minus) / n_contexts ||
            curve.acc_f_plus[plus_end] != static_cast<double>(hit_plus) / n_contexts)
            endpoints_exact = false;

        const double d_start = curve.acc_f_minus[minus_end] - curve.acc_f_plus[minus_end];
        const double d_end = curve.acc_f_minus[plus_end] - curve.acc_f_plus[plus_end];
        if (d_start > 0.0 && d_end < 0.0) ++crossings;
        minus_acc_at_plus1 += curve.acc_f_minus[plus_end];
    }
    minus_acc_at_plus1 /= static_cast<double>(n_draws);
    const double chance = 1.0 / static_cast<double>(model.game.n_objects);
    const bool ok = endpoints_exact && minus_acc_at_plus1 <= chance + 0.05 && crossings * 10 >= 8 * n_draws;
    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "cp sweep: endpoints %s, f_minus accuracy at t=+1 %.2f%% (<= %.0f%%), curves "
                  "cross in (-1,+1) for %zu/%zu pairs (>= 8)",
                  endpoints_exact ? "exact" : "MISMATCH", 100 * minus_acc_at_plus1,
                  100 * (chance + 0.05), crossings, n_draws);
    report(8, ok, buf);
}

void criterion_11_determinism() {
    const double t0 = now_seconds();
    const fs::path base = fs::temp_directory_path() / "siggame_acceptance_det";
    fs::remove_all(base);
    ExperimentPlan plan;
    plan.cells = {GameConfig{5, 10, Strictness::Strict, Sharing::Shared, 2},
                  GameConfig{5, 5, Strictness::NonStrict, Sharing::NonShared, 2}};
    plan.trials_per_cell = 2;
    plan.train.steps = 300;
    plan.master_seed = 424242;
    plan.analysis_contexts = 50;
    plan.out_dir = base / "a";
    run(plan);
    plan.out_dir = base / "b";
    run(plan);
    bool identical = true;
    std::string first_diff;
    for (const char* name :
         {"trials.jsonl", "table1_accuracy.csv", "table2_f1.csv", "table3_perception.csv",
          "table4_composition.csv", "messages_pre.csv", "messages_post.csv", "cp_curve.csv"}) {
        if (slurp(base / "a" / name) != slurp(base / "b" / name)) {
            identical = false;
            if (first_diff.empty()) first_diff = name;
        }
    }
    fs::remove_all(base);
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "repeated run with one master seed: outputs %s%s (%.0fs, 300-step pipeline)",
                  identical ? "byte-identical" : "DIFFER at ",
                  identical ? "" : first_diff.c_str(), now_seconds() - t0);
    report(11, identical, buf);
}

}  // namespace

int main() {
    std::printf("acceptance suite started\n");
    std::fflush(stdout);

    criterion_1_gradient_oracle();
    criterion_2_chance_baseline();
    criterion_9_dbscan_oracle();
    criterion_10_strictness();

    const fs::path out = fs::temp_directory_path() / "siggame_acceptance_run";
    fs::remove_all(out);
    const std::vector<TrialReport> reports = run_battery(out);
    std::vector<CellMeans> means;
    for (std::size_t cell = 0; cell < 8; ++cell) means.push_back(cell_means(reports, cell));

    criterion_3_table1(means);
    criterion_4_ordering(means);
    criterion_5_table2(reports, means);
    criterion_6_table3(means);
    criterion_7_table4(means);
    criterion_8_cp(reports, out);
    criterion_11_determinism();

    std::printf("acceptance suite finished: %d criterion(s) failed, %.0f s total\n", g_failures,
                now_seconds());
    return g_failures == 0 ? 0 : 1;
}

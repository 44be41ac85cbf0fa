// Command-line driver for signaling-game training sweeps and analyses.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "siggame/report.hpp"

namespace {

using namespace siggame;

std::size_t default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t master_seed = 1;
    std::size_t trials = 20;
    std::size_t steps = 5000;
    std::size_t workers = default_workers();
    std::size_t analysis_contexts = 100;
    bool no_clustering = false;
    bool no_perception = false;
    bool no_analogy = false;
    bool no_composition = false;
    bool no_cp = false;
    bool no_checkpoints = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_config) {
    if (with_config) cmd->add_option("--config", opts.config_path, "JSON experiment plan");
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--master-seed", opts.master_seed, "master seed for trial derivation");
    cmd->add_option("--trials", opts.trials, "trials per cell");
    cmd->add_option("--steps", opts.steps, "training steps per trial");
    cmd->add_option("--workers", opts.workers, "concurrent trial workers");
    cmd->add_option("--analysis-contexts", opts.analysis_contexts,
                    "contexts per evaluation/analysis");
    cmd->add_flag("--no-clustering", opts.no_clustering, "skip DBSCAN/F1 analysis");
    cmd->add_flag("--no-perception", opts.no_perception, "skip artificial-message perception");
    cmd->add_flag("--no-analogy", opts.no_analogy, "skip the vector-analogy probe");
    cmd->add_flag("--no-composition", opts.no_composition, "skip the composition-network probe");
    cmd->add_flag("--no-cp", opts.no_cp, "skip the categorical-perception sweep");
    cmd->add_flag("--no-checkpoints", opts.no_checkpoints, "do not write model checkpoints");
}

void apply_common(ExperimentPlan& plan, const CommonOpts& opts, const CLI::App* cmd) {
    if (cmd->count("--out")) plan.out_dir = opts.out_dir;
    if (cmd->count("--master-seed")) plan.master_seed = opts.master_seed;
    if (cmd->count("--trials")) plan.trials_per_cell = opts.trials;
    if (cmd->count("--steps")) plan.train.steps = opts.steps;
    if (cmd->count("--workers")) plan.workers = opts.workers;
    if (cmd->count("--analysis-contexts")) plan.analysis_contexts = opts.analysis_contexts;
    if (opts.no_clustering) plan.analyses.clustering = false;
    if (opts.no_perception) plan.analyses.perception = false;
    if (opts.no_analogy) plan.analyses.analogy = false;
    if (opts.no_composition) plan.analyses.composition = false;
    if (opts.no_cp) plan.analyses.cp = false;
    if (opts.no_checkpoints) plan.write_checkpoints = false;
}

void print_summary(const std::vector<TrialReport>& reports, const ExperimentPlan& plan) {
    std::cout << "wrote " << reports.size() << " trials to " << plan.out_dir.string() << "\n";
    std::size_t n_cells = 0;
    for (const auto& r : reports) n_cells = std::max(n_cells, r.cell + 1);
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        double sum = 0.0;
        std::size_t n = 0;
        const TrialReport* any = nullptr;
        for (const auto& r : reports)
            if (r.cell == cell) {
                sum += r.accuracy;
                ++n;
                any = &r;
            }
        if (!any) continue;
        std::cout << "  cell " << cell << " ("
                  << (any->game.strictness == Strictness::Strict ? "strict" : "nonstrict") << "/"
                  << (any->game.sharing == Sharing::Shared ? "shared" : "nonshared") << "/"
                  << any->game.n_objects << " objects): mean accuracy "
                  << sum / static_cast<double>(n) << " over " << n << " trials\n";
    }
}

int cmd_train_or_sweep(const CommonOpts& opts, const CLI::App* cmd,
                       const std::optional<GameConfig>& single_cell) {
    ExperimentPlan plan;
    if (!opts.config_path.empty())
        plan = plan_from_json_file(opts.config_path);
    else
        plan.cells = default_cells();
    if (single_cell) plan.cells = {*single_cell};
    apply_common(plan, opts, cmd);
    plan.verbose = true;
    const auto reports = run(plan);
    print_summary(reports, plan);
    return 0;
}

nlohmann::json analyze_model(const TrainedModel& model, std::size_t contexts, std::uint64_t seed,
                             const AnalysisToggles& toggles) {
    nlohmann::json out;
    {
        Rng rng(derive_seed(seed, 1));
        out["accuracy"] = evaluate_accuracy(model, contexts, rng);
    }
    if (toggles.clustering) {
        Rng rng(derive_seed(seed, 2));
        const LabeledMessageSet set = collect_messages(model, contexts, rng);
        const Clustering clustering = label_clusters(
            dbscan(set.messages, kDbscanEps, kDbscanMinPts), set.labels, model.game.n_functions());
        out["f1"] = cluster_f1(clustering, set.labels, model.game.n_functions());
        out["n_clusters"] = clustering.n_clusters();
        if (toggles.perception) {
            Rng prng(derive_seed(seed, 3));
            const PerceptionResult p =
                perception_accuracy(model, set, clustering, kArtificialMessageK, contexts, prng);
            out["perception"] = p.accuracy;
            out["perception_covered"] = p.functions_covered;
        }
    }
    if (toggles.analogy) {
        Rng rng(derive_seed(seed, 4));
        const AnalogyResult a = analogy_probe(model, contexts, rng);
        out["analogy"] = a.accuracy;
        out["analogy_per_dim"] = a.per_dim;
    }
    if (toggles.composition && model.game.n_dims >= 3) {
        Rng rng(derive_seed(seed, 5));
        CompositionConfig cfg;
        cfg.n_train_contexts = contexts;
        cfg.n_test_contexts = contexts;
        const CompositionResult c = composition_probe(model, cfg, rng);
        out["composition"] = c.accuracy;
        out["composition_per_holdout"] = c.per_holdout;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sender-receiver signaling game with a continuous 2-D message space"};
    app.require_subcommand(1);

    CommonOpts train_opts, sweep_opts;
    bool strict = true, shared = true;
    std::size_t objects = 10;

    CLI::App* train = app.add_subcommand("train", "train one game setting");
    add_common(train, train_opts, false);
    train->add_flag("--strict,!--non-strict", strict, "strict contexts (default strict)");
    train->add_flag("--shared,!--non-shared", shared, "shared receiver context (default shared)");
    train->add_option("--objects", objects, "objects per context")
        ->check(CLI::IsMember({5, 10, 15}));

    CLI::App* sweep = app.add_subcommand("sweep", "run the full experiment plan");
    add_common(sweep, sweep_opts, true);

    std::string checkpoint_path, analyze_out;
    std::size_t analyze_contexts = 100;
    std::uint64_t analyze_seed = 1;
    bool an_no_clustering = false, an_no_perception = false, an_no_analogy = false,
         an_no_composition = false;
    CLI::App* analyze = app.add_subcommand("analyze", "run probes on a saved checkpoint");
    analyze->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    analyze->add_option("--out", analyze_out, "also write the JSON report here");
    analyze->add_option("--contexts", analyze_contexts, "contexts per analysis");
    analyze->add_option("--master-seed", analyze_seed, "seed for analysis sampling");
    analyze->add_flag("--no-clustering", an_no_clustering, "skip DBSCAN/F1");
    analyze->add_flag("--no-perception", an_no_perception, "skip perception");
    analyze->add_flag("--no-analogy", an_no_analogy, "skip the analogy probe");
    analyze->add_flag("--no-composition", an_no_composition, "skip the composition probe");

    std::string cp_checkpoint, cp_out = "cp_curve.csv";
    std::size_t cp_draws = kCpDraws, cp_contexts = 100;
    std::uint64_t cp_seed = 1;
    CLI::App* cp = app.add_subcommand("cp", "categorical-perception interpolation sweep");
    cp->add_option("--checkpoint", cp_checkpoint, "model checkpoint")->required();
    cp->add_option("--out", cp_out, "output CSV path");
    cp->add_option("--draws", cp_draws, "(context, function-pair) draws to average");
    cp->add_option("--contexts", cp_contexts, "receiver contexts per draw");
    cp->add_option("--master-seed", cp_seed, "seed for sweep sampling");

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "re-aggregate CSVs from trials.jsonl");
    report->add_option("--out", report_dir, "directory holding trials.jsonl")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            GameConfig cell;
            cell.strictness = strict ? Strictness::Strict : Strictness::NonStrict;
            cell.sharing = shared ? Sharing::Shared : Sharing::NonShared;
            cell.n_objects = train->count("--objects") ? objects : (strict ? 10 : cell.n_objects);
            return cmd_train_or_sweep(train_opts, train, cell);
        }
        if (sweep->parsed()) return cmd_train_or_sweep(sweep_opts, sweep, std::nullopt);
        if (analyze->parsed()) {
            const TrainedModel model = load_checkpoint(checkpoint_path);
            AnalysisToggles toggles;
            toggles.clustering = !an_no_clustering;
            toggles.perception = !an_no_perception;
            toggles.analogy = !an_no_analogy;
            toggles.composition = !an_no_composition;
            const nlohmann::json out = analyze_model(model, analyze_contexts, analyze_seed, toggles);
            std::cout << out.dump(2) << "\n";
            if (!analyze_out.empty()) {
                std::ofstream os(analyze_out);
                if (!os) throw IoError("cannot write " + analyze_out);
                os << out.dump(2) << "\n";
            }
            return 0;
        }
        if (cp->parsed()) {
            const TrainedModel model = load_checkpoint(cp_checkpoint);
            Rng rng(derive_seed(cp_seed, 7));
            const CpSweepResult sweep_result =
                cp_sweep(model, default_cp_grid(), cp_draws, cp_contexts, rng);
            export_cp_curve(sweep_result.mean, cp_out);
            std::cout << "wrote " << cp_out << "\n";
            return 0;
        }
        if (report->parsed()) {
            const auto trials = read_trials(std::filesystem::path(report_dir) / "trials.jsonl");
            write_aggregates(report_dir, trials);
            std::cout << "re-aggregated " << trials.size() << " trials in " << report_dir << "\n";
            return 0;
        }
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

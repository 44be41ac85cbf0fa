#include "siggame/report.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace siggame {

namespace fs = std::filesystem;
using nlohmann::json;

void ExperimentPlan::validate() const {
    if (cells.empty()) throw ConfigError("plan: cells must be non-empty");
    for (const auto& cell : cells) {
        try {
            cell.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    try {
        train.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (trials_per_cell < 1) throw ConfigError("plan: trials_per_cell must be >= 1");
    if (workers < 1) throw ConfigError("plan: workers must be >= 1");
    if (analysis_contexts < 1) throw ConfigError("plan: analysis_contexts must be >= 1");
}

std::vector<GameConfig> default_cells() {
    std::vector<GameConfig> cells;
    for (Sharing sharing : {Sharing::Shared, Sharing::NonShared})
        cells.push_back({5, 10, Strictness::Strict, sharing, 2});
    for (std::size_t n_objects : {std::size_t{5}, std::size_t{10}, std::size_t{15}})
        for (Sharing sharing : {Sharing::Shared, Sharing::NonShared})
            cells.push_back({5, n_objects, Strictness::NonStrict, sharing, 2});
    return cells;
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t cell, std::size_t trial) {
    return derive_seed(master_seed, cell, trial);
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string strictness_name(Strictness s) {
    return s == Strictness::Strict ? "strict" : "nonstrict";
}
std::string sharing_name(Sharing s) { return s == Sharing::Shared ? "shared" : "nonshared"; }

void atomic_write(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        os << content;
        if (!os) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

json game_to_json(const GameConfig& g) {
    return json{{"n_dims", g.n_dims},
                {"n_objects", g.n_objects},
                {"strictness", strictness_name(g.strictness)},
                {"sharing", sharing_name(g.sharing)},
                {"latent_dim", g.latent_dim}};
}

Strictness strictness_from_string(const std::string& s) {
    if (s == "strict") return Strictness::Strict;
    if (s == "nonstrict" || s == "non-strict") return Strictness::NonStrict;
    throw ConfigError("unknown strictness '" + s + "' (expected strict|nonstrict)");
}

Sharing sharing_from_string(const std::string& s) {
    if (s == "shared") return Sharing::Shared;
    if (s == "nonshared" || s == "non-shared") return Sharing::NonShared;
    throw ConfigError("unknown sharing '" + s + "' (expected shared|nonshared)");
}

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& item : obj.items()) {
        bool ok = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
}

GameConfig game_from_json(const json& j) {
    check_keys(j, {"n_dims", "n_objects", "strictness", "sharing", "latent_dim"}, "cell");
    GameConfig g;
    g.n_dims = j.value("n_dims", g.n_dims);
    g.n_objects = j.value("n_objects", g.n_objects);
    if (j.contains("strictness")) g.strictness = strictness_from_string(j.at("strictness"));
    if (j.contains("sharing")) g.sharing = sharing_from_string(j.at("sharing"));
    g.latent_dim = j.value("latent_dim", g.latent_dim);
    return g;
}

}  // namespace

std::string trial_to_json(const TrialReport& r) {
    json j = game_to_json(r.game);
    j["cell"] = r.cell;
    j["seed"] = r.seed;
    j["accuracy"] = r.accuracy;
    j["final_loss"] = r.final_loss;
    j["f1"] = r.f1 ? json(*r.f1) : json(nullptr);
    j["untrained_f1"] = r.untrained_f1 ? json(*r.untrained_f1) : json(nullptr);
    j["perception"] = r.perception ? json(*r.perception) : json(nullptr);
    j["perception_covered"] = r.perception_covered;
    j["perception_undersized"] = r.perception_undersized;
    j["analogy"] = r.analogy ? json(*r.analogy) : json(nullptr);
    j["analogy_per_dim"] = r.analogy_per_dim;
    j["composition"] = r.composition ? json(*r.composition) : json(nullptr);
    j["composition_per_holdout"] = r.composition_per_holdout;
    j["checkpoint"] = r.checkpoint_path;
    j["messages_pre"] = r.messages_pre_path;
    j["messages_post"] = r.messages_post_path;
    j["cp_curve"] = r.cp_curve_path;
    return j.dump();
}

TrialReport trial_from_json(const std::string& line) {
    const json j = json::parse(line);
    TrialReport r;
    r.cell = j.at("cell").get<std::size_t>();
    r.game.n_dims = j.at("n_dims").get<std::size_t>();
    r.game.n_objects = j.at("n_objects").get<std::size_t>();
    r.game.strictness = strictness_from_string(j.at("strictness"));
    r.game.sharing = sharing_from_string(j.at("sharing"));
    r.game.latent_dim = j.at("latent_dim").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.final_loss = j.at("final_loss").get<double>();
    if (!j.at("f1").is_null()) r.f1 = j.at("f1").get<double>();
    if (!j.at("untrained_f1").is_null()) r.untrained_f1 = j.at("untrained_f1").get<double>();
    if (!j.at("perception").is_null()) r.perception = j.at("perception").get<double>();
    r.perception_covered = j.at("perception_covered").get<std::size_t>();
    r.perception_undersized = j.at("perception_undersized").get<bool>();
    if (!j.at("analogy").is_null()) r.analogy = j.at("analogy").get<double>();
    r.analogy_per_dim = j.at("analogy_per_dim").get<std::vector<double>>();
    if (!j.at("composition").is_null()) r.composition = j.at("composition").get<double>();
    r.composition_per_holdout = j.at("composition_per_holdout").get<std::vector<double>>();
    r.checkpoint_path = j.at("checkpoint").get<std::string>();
    r.messages_pre_path = j.at("messages_pre").get<std::string>();
    r.messages_post_path = j.at("messages_post").get<std::string>();
    r.cp_curve_path = j.at("cp_curve").get<std::string>();
    return r;
}

void export_messages(const TrainedModel& model, std::size_t n_contexts, Rng& rng,
                     const fs::path& path) {
    const LabeledMessageSet set = collect_messages(model, n_contexts, rng);
    std::ostringstream os;
    if (model.game.latent_dim == 2) {
        os << "msg_x,msg_y,function_label,context_id\n";
    } else {
        for (std::size_t d = 0; d < model.game.latent_dim; ++d) os << "msg_" << d << ',';
        os << "function_label,context_id\n";
    }
    for (std::size_t p = 0; p < set.messages.size(); ++p) {
        for (double v : set.messages[p]) os << fmt(v) << ',';
        os << set.labels[p] << ',' << set.context_ids[p] << '\n';
    }
    atomic_write(path, os.str());
}

void export_cp_curve(const CpCurve& curve, const fs::path& path) {
    std::ostringstream os;
    os << "t,acc_f_minus,acc_f_plus\n";
    for (std::size_t k = 0; k < curve.t.size(); ++k)
        os << fmt(curve.t[k]) << ',' << fmt(curve.acc_f_minus[k]) << ','
           << fmt(curve.acc_f_plus[k]) << '\n';
    atomic_write(path, os.str());
}

namespace {

struct CellStats {
    std::size_t n = 0;
    double mean = 0.0, sd = 0.0, se = 0.0;
};

CellStats stats_of(const std::vector<double>& values) {
    CellStats s;
    s.n = values.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
        s.se = s.sd / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

void write_metric_csv(const fs::path& path, const std::vector<TrialReport>& reports,
                      std::size_t n_cells, const std::function<std::optional<double>(const TrialReport&)>& metric) {
    std::ostringstream os;
    os << "strictness,sharing,n_objects,n_trials,mean,sd,se\n";
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        std::vector<double> values;
        const TrialReport* any = nullptr;
        for (const auto& r : reports) {
            if (r.cell != cell) continue;
            any = &r;
            if (const auto v = metric(r)) values.push_back(*v);
        }
        if (!any || values.empty()) continue;
        const CellStats s = stats_of(values);
        os << strictness_name(any->game.strictness) << ',' << sharing_name(any->game.sharing)
           << ',' << any->game.n_objects << ',' << s.n << ',' << fmt(s.mean) << ',' << fmt(s.sd)
           << ',' << fmt(s.se) << '\n';
    }
    atomic_write(path, os.str());
}

}  // namespace

void write_aggregates(const fs::path& out_dir, const std::vector<TrialReport>& reports) {
    std::size_t n_cells = 0;
    for (const auto& r : reports) n_cells = std::max(n_cells, r.cell + 1);

    write_metric_csv(out_dir / "table1_accuracy.csv", reports, n_cells,
                     [](const TrialReport& r) { return std::optional<double>(r.accuracy); });
    write_metric_csv(out_dir / "table2_f1.csv", reports, n_cells,
                     [](const TrialReport& r) { return r.f1; });
    write_metric_csv(out_dir / "table3_perception.csv", reports, n_cells,
                     [](const TrialReport& r) { return r.perception; });

    // table 4 carries both probes side by side
    std::ostringstream os;
    os << "strictness,sharing,n_objects,n_trials,analogy_mean,analogy_sd,analogy_se,"
          "composition_mean,composition_sd,composition_se\n";
    for (std::size_t cell = 0; cell < n_cells; ++cell) {
        std::vector<double> analogy, composition;
        const TrialReport* any = nullptr;
        for (const auto& r : reports) {
            if (r.cell != cell) continue;
            any = &r;
            if (r.analogy) analogy.push_back(*r.analogy);
            if (r.composition) composition.push_back(*r.composition);
        }
        if (!any || (analogy.empty() && composition.empty())) continue;
        const CellStats a = stats_of(analogy);
        const CellStats c = stats_of(composition);
        os << strictness_name(any->game.strictness) << ',' << sharing_name(any->game.sharing)
           << ',' << any->game.n_objects << ',' << std::max(a.n, c.n) << ',' << fmt(a.mean) << ','
           << fmt(a.sd) << ',' << fmt(a.se) << ',' << fmt(c.mean) << ',' << fmt(c.sd) << ','
           << fmt(c.se) << '\n';
    }
    atomic_write(out_dir / "table4_composition.csv", os.str());
}

std::vector<TrialReport> read_trials(const fs::path& jsonl_path) {
    std::ifstream is(jsonl_path);
    if (!is) throw IoError("cannot open " + jsonl_path.string());
    std::vector<TrialReport> reports;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            reports.push_back(trial_from_json(line));
        } catch (const json::exception& e) {
            throw ConfigError("bad trials.jsonl line: " + std::string(e.what()));
        }
    }
    return reports;
}

namespace {

// Seed-stream tags so each analysis consumes an independent RNG.
enum : std::uint64_t {
    kEvalStream = 101,
    kCollectStream = 102,
    kUntrainedStream = 103,
    kPerceptionStream = 104,
    kAnalogyStream = 105,
    kCompositionStream = 106,
    kCpStream = 107,
    kExportStream = 108,
};

TrialReport run_one(const ExperimentPlan& plan, std::size_t cell, std::size_t trial,
                    std::size_t cp_cell) {
    const GameConfig& game = plan.cells[cell];
    TrainConfig train = plan.train;
    train.seed = trial_seed(plan.master_seed, cell, trial);

    TrialReport report;
    report.cell = cell;
    report.game = game;
    report.seed = train.seed;

    const TrainedModel model = train_trial(game, train);
    report.final_loss = model.final_loss;

    {
        Rng rng(derive_seed(train.seed, kEvalStream));
        report.accuracy = evaluate_accuracy(model, plan.analysis_contexts, rng);
    }

    LabeledMessageSet set;
    Clustering clustering;
    if (plan.analyses.clustering) {
        Rng rng(derive_seed(train.seed, kCollectStream));
        set = collect_messages(model, plan.analysis_contexts, rng);
        clustering = label_clusters(dbscan(set.messages, kDbscanEps, kDbscanMinPts), set.labels,
                                    game.n_functions());
        report.f1 = cluster_f1(clustering, set.labels, game.n_functions());

        const TrainedModel untrained = make_untrained_model(game, train);
        Rng pre_rng(derive_seed(train.seed, kUntrainedStream));
        const LabeledMessageSet pre = collect_messages(untrained, plan.analysis_contexts, pre_rng);
        report.untrained_f1 =
            cluster_f1(label_clusters(dbscan(pre.messages, kDbscanEps, kDbscanMinPts), pre.labels,
                                      game.n_functions()),
                       pre.labels, game.n_functions());
    }
    if (plan.analyses.clustering && plan.analyses.perception) {
        Rng rng(derive_seed(train.seed, kPerceptionStream));
        const PerceptionResult p = perception_accuracy(model, set, clustering, kArtificialMessageK,
                                                       plan.analysis_contexts, rng);
        report.perception = p.accuracy;
        report.perception_covered = p.functions_covered;
        report.perception_undersized = p.undersized_cluster;
    }
    if (plan.analyses.analogy) {
        Rng rng(derive_seed(train.seed, kAnalogyStream));
        const AnalogyResult a = analogy_probe(model, plan.analysis_contexts, rng);
        report.analogy = a.accuracy;
        report.analogy_per_dim = a.per_dim;
    }
    if (plan.analyses.composition && game.n_dims >= 3) {
        Rng rng(derive_seed(train.seed, kCompositionStream));
        CompositionConfig cfg;
        cfg.n_train_contexts = plan.analysis_contexts;
        cfg.n_test_contexts = plan.analysis_contexts;
        const CompositionResult c = composition_probe(model, cfg, rng);
        report.composition = c.accuracy;
        report.composition_per_holdout = c.per_holdout;
    }

    if (plan.write_checkpoints) {
        const std::string rel =
            "checkpoints/cell" + std::to_string(cell) + "_seed" + std::to_string(train.seed) + ".ckpt";
        try {
            save_checkpoint(model, plan.out_dir / rel);
        } catch (const std::runtime_error& e) {
            throw IoError(e.what());
        }
        report.checkpoint_path = rel;
    }

    // representative exports: message scatter dumps from the first cell,
    // CP curve from the first strict/non-shared cell
    if (trial == 0 && cell == 0) {
        const TrainedModel untrained = make_untrained_model(game, train);
        Rng pre_rng(derive_seed(train.seed, kExportStream));
        export_messages(untrained, plan.analysis_contexts, pre_rng, plan.out_dir / "messages_pre.csv");
        Rng post_rng(derive_seed(train.seed, kExportStream));
        export_messages(model, plan.analysis_contexts, post_rng, plan.out_dir / "messages_post.csv");
        report.messages_pre_path = "messages_pre.csv";
        report.messages_post_path = "messages_post.csv";
    }
    if (trial == 0 && cell == cp_cell && plan.analyses.cp) {
        Rng rng(derive_seed(train.seed, kCpStream));
        const CpSweepResult sweep =
            cp_sweep(model, default_cp_grid(), kCpDraws, plan.analysis_contexts, rng);
        export_cp_curve(sweep.mean, plan.out_dir / "cp_curve.csv");
        report.cp_curve_path = "cp_curve.csv";
    }
    return report;
}

}  // namespace

std::vector<TrialReport> run(const ExperimentPlan& plan) {
    plan.validate();
    std::error_code ec;
    fs::create_directories(plan.out_dir, ec);
    if (ec) throw IoError("cannot create output dir " + plan.out_dir.string() + ": " + ec.message());
    if (plan.write_checkpoints) {
        fs::create_directories(plan.out_dir / "checkpoints", ec);
        if (ec) throw IoError("cannot create checkpoints dir: " + ec.message());
    }

    std::size_t cp_cell = 0;
    for (std::size_t i = 0; i < plan.cells.size(); ++i)
        if (plan.cells[i].strictness == Strictness::Strict &&
            plan.cells[i].sharing == Sharing::NonShared) {
            cp_cell = i;
            break;
        }

    const std::size_t n_jobs = plan.cells.size() * plan.trials_per_cell;
    std::vector<TrialReport> reports(n_jobs);
    std::vector<std::exception_ptr> errors(n_jobs);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= n_jobs) return;
            const std::size_t cell = job / plan.trials_per_cell;
            const std::size_t trial = job % plan.trials_per_cell;
            try {
                reports[job] = run_one(plan, cell, trial, cp_cell);
                if (plan.verbose)
                    std::fprintf(stderr, "[%zu/%zu] cell %zu trial %zu: accuracy %.4f\n", job + 1,
                                 n_jobs, cell, trial, reports[job].accuracy);
            } catch (...) {
                errors[job] = std::current_exception();
            }
        }
    };

    if (plan.workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < plan.workers; ++w) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    std::sort(reports.begin(), reports.end(), [](const TrialReport& a, const TrialReport& b) {
        return a.cell != b.cell ? a.cell < b.cell : a.seed < b.seed;
    });

    std::ostringstream jsonl;
    for (const auto& r : reports) jsonl << trial_to_json(r) << '\n';
    atomic_write(plan.out_dir / "trials.jsonl", jsonl.str());
    write_aggregates(plan.out_dir, reports);
    return reports;
}

ExperimentPlan plan_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    check_keys(j,
               {"cells", "train", "trials_per_cell", "master_seed", "workers",
                "analysis_contexts", "analyses", "out_dir", "write_checkpoints", "verbose"},
               "plan");
    ExperimentPlan plan;
    try {
        if (j.contains("cells")) {
            plan.cells.clear();
            for (const auto& cj : j.at("cells")) plan.cells.push_back(game_from_json(cj));
        } else {
            plan.cells = default_cells();
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            check_keys(t, {"learning_rate", "beta1", "beta2", "steps", "batch_size"}, "train");
            plan.train.learning_rate = t.value("learning_rate", plan.train.learning_rate);
            plan.train.beta1 = t.value("beta1", plan.train.beta1);
            plan.train.beta2 = t.value("beta2", plan.train.beta2);
            plan.train.steps = t.value("steps", plan.train.steps);
            plan.train.batch_size = t.value("batch_size", plan.train.batch_size);
        }
        plan.trials_per_cell = j.value("trials_per_cell", plan.trials_per_cell);
        plan.master_seed = j.value("master_seed", plan.master_seed);
        plan.workers = j.value("workers", plan.workers);
        plan.analysis_contexts = j.value("analysis_contexts", plan.analysis_contexts);
        if (j.contains("analyses")) {
            const json& a = j.at("analyses");
            check_keys(a, {"clustering", "perception", "analogy", "composition", "cp"}, "analyses");
            plan.analyses.clustering = a.value("clustering", plan.analyses.clustering);
            plan.analyses.perception = a.value("perception", plan.analyses.perception);
            plan.analyses.analogy = a.value("analogy", plan.analyses.analogy);
            plan.analyses.composition = a.value("composition", plan.analyses.composition);
            plan.analyses.cp = a.value("cp", plan.analyses.cp);
        }
        if (j.contains("out_dir")) plan.out_dir = j.at("out_dir").get<std::string>();
        plan.write_checkpoints = j.value("write_checkpoints", plan.write_checkpoints);
        plan.verbose = j.value("verbose", plan.verbose);
    } catch (const json::exception& e) {
        throw ConfigError("config field error: " + std::string(e.what()));
    }
    return plan;
}

ExperimentPlan plan_from_json_file(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config: " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return plan_from_json_text(ss.str());
}

}  // namespace siggame

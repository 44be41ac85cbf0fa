#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "siggame/analysis.hpp"

namespace siggame {

// Invalid or unknown configuration input; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Filesystem failure (unwritable output dir etc.); CLI exit code 2.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AnalysisToggles {
    bool clustering = true;
    bool perception = true;
    bool analogy = true;
    bool composition = true;
    bool cp = true;
};

struct ExperimentPlan {
    std::vector<GameConfig> cells;
    TrainConfig train;  // seed field is ignored; per-trial seeds come from master_seed
    std::size_t trials_per_cell = 20;
    std::uint64_t master_seed = 1;
    std::size_t workers = 1;
    std::size_t analysis_contexts = 100;
    AnalysisToggles analyses;
    std::filesystem::path out_dir = "out";
    bool write_checkpoints = true;
    bool verbose = false;  // per-trial progress on stderr

    void validate() const;
};

// The eight standard settings: strict 10 objects and non-strict 5/10/15,
// each shared and non-shared.
std::vector<GameConfig> default_cells();

struct TrialReport {
    std::size_t cell = 0;
    GameConfig game;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    double final_loss = 0.0;
    std::optional<double> f1;
    std::optional<double> untrained_f1;
    std::optional<double> perception;
    std::size_t perception_covered = 0;
    bool perception_undersized = false;
    std::optional<double> analogy;
    std::vector<double> analogy_per_dim;
    std::optional<double> composition;
    std::vector<double> composition_per_holdout;
    std::string checkpoint_path;
    std::string messages_pre_path;
    std::string messages_post_path;
    std::string cp_curve_path;
};

std::string trial_to_json(const TrialReport& report);
TrialReport trial_from_json(const std::string& line);

// Runs every (cell, trial), writes trials.jsonl, the four aggregate CSVs,
// message dumps, the CP curve, and checkpoints under plan.out_dir.
// Deterministic given master_seed, independent of worker count.
std::vector<TrialReport> run(const ExperimentPlan& plan);

// Re-aggregates CSVs from an existing trials.jsonl.
void write_aggregates(const std::filesystem::path& out_dir,
                      const std::vector<TrialReport>& reports);
std::vector<TrialReport> read_trials(const std::filesystem::path& jsonl_path);

// CSV scatter dump of sender messages: msg_x,msg_y,function_label,context_id.
void export_messages(const TrainedModel& model, std::size_t n_contexts, Rng& rng,
                     const std::filesystem::path& path);

// CSV columns t,acc_f_minus,acc_f_plus.
void export_cp_curve(const CpCurve& curve, const std::filesystem::path& path);

// Parses an ExperimentPlan from a JSON file. Unknown keys are a hard error.
ExperimentPlan plan_from_json_file(const std::filesystem::path& path);
ExperimentPlan plan_from_json_text(const std::string& text);

// Deterministic per-trial seed.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t cell, std::size_t trial);

}  // namespace siggame

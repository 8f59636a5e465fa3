#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core/report.hpp"
#include "core/trainer.hpp"

namespace lfb {

// Where the samples come from: an existing manifest, or a phantom spec whose
// dataset is generated under <output_dir>/dataset on demand.
struct DatasetSource {
    bool generate = true;
    PhantomSpec phantom;
    int n = 120;
    double f_train = 0.7, f_test = 0.2, f_val = 0.1;
    std::string manifest;  // used when generate == false
};

// One experiment: a variant, a dataset, and the model/training knobs. Parsed
// from a JSON document where every field is optional ({} is a valid config):
//   {
//     "variant": "lfb",                 // fs | fs_star | lfb
//     "output_dir": "run",
//     "model":   { ... ModelConfig keys ... },
//     "train":   { batch_size, learning_rate, max_cycles, patience,
//                  val_feedback_iterations, seed, class_weights },
//     "dataset": { "manifest": "path" }
//                or { "phantom": { ... PhantomSpec keys ... }, "n": 120,
//                     "split": [0.7, 0.2, 0.1] }
//   }
// Variant rules: fs forces use_se=true, fs_star forces use_se=false, and the
// step-1-only variants force val_feedback_iterations=0; explicit contradictory
// values are rejected. Unless given explicitly, classes and image_size are
// derived from the dataset.
struct ExperimentConfig {
    std::string variant = "lfb";
    std::string output_dir = "run";
    ModelConfig model;
    TrainConfig train;
    DatasetSource data;
    bool classes_explicit = false;
    bool image_size_explicit = false;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
};

// Returning false stops training after the current cycle (weights of the best
// cycle so far are kept, as with every other stop).
using ProgressFn = std::function<bool(const CycleStats&)>;

struct TrainArtifacts {
    std::string manifest_path;
    std::string checkpoint_path;  // best-validation-cycle weights
    std::string history_path;     // per-step loss rows (3/cycle lfb, 1/cycle fs)
    std::string summary_path;
    std::string summary_json;
    TrainResult result;
};

TrainArtifacts run_train(const ExperimentConfig& cfg, const ProgressFn& progress = {});

struct EvalRequest {
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
    int iterations = 1;  // feedback-loop passes; requires a feedback checkpoint if > 0
    std::string out_csv;
    ReportThresholds thresholds;
};

// Runs inference over the split, writes the per-sample report CSV, and
// returns the report (summary_json() gives the aggregate view).
Report run_eval(const EvalRequest& req);

// Trains every (variant, seed) pair on the same dataset — for one seed, all
// variants see byte-identical splits and shuffle orders — evaluates each on
// the test split, and writes a side-by-side table plus pairwise Wilcoxon
// tests over per-sample Dice and HD.
using AblateProgressFn = std::function<bool(const std::string& run, const CycleStats&)>;

struct AblationOutputs {
    std::string table_path;  // CSV: one row per (variant, seed)
    std::string tests_path;  // CSV: one row per (metric, variant pair)
    std::string summary_path;
    std::string summary_json;
};

AblationOutputs run_ablate(const ExperimentConfig& base, const std::vector<std::string>& variants,
                           const std::vector<std::uint64_t>& seeds,
                           const AblateProgressFn& progress = {});

// Paired Wilcoxon tests between two report CSVs per (metric, class), matched
// by sample id. Returns a JSON summary; throws when the reports do not cover
// the same samples.
std::string run_compare(const std::string& report_a, const std::string& report_b);

}  // namespace lfb

#pragma once

#include <functional>
#include <limits>

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/optimizer.hpp"

namespace lfb {

// Training variants:
//   fs       forward system only, SE gates on  (cycle = step 1)
//   fs_star  forward system only, SE gates off (cycle = step 1)
//   lfb      both systems, 3-step cycle:
//     step 1  train all of S on (x -> y) with the neutral latent h_0
//     step 2  train all of F to reproduce y from S's prediction; S frozen,
//             predictions computed in eval mode without gradients
//     step 3  train S_d only: h_s and the skips come from frozen eval S_e,
//             h_f from frozen eval F_e applied to S's own h_0 prediction;
//             only the decoder is taped and updated
// Every step minimizes the mean of cross entropy and weighted Dice loss.
struct TrainConfig {
    std::string variant = "lfb";
    int batch_size = 10;
    double learning_rate = 1e-3;
    int max_cycles = 500;
    int patience = 100;  // cycles without validation-loss improvement
    int val_feedback_iterations = 1;  // lfb validation runs the feedback loop
    std::uint64_t seed = 7;
    std::vector<double> class_weights;  // Dice weights; empty = all ones

    void validate() const;
};

struct CycleStats {
    int cycle = 0;
    double step1_loss = 0.0;
    double step2_loss = std::numeric_limits<double>::quiet_NaN();
    double step3_loss = std::numeric_limits<double>::quiet_NaN();
    double val_loss = 0.0;
    double val_dice = 0.0;  // mean foreground Dice on the validation split
};

struct TrainResult {
    std::vector<CycleStats> history;
    int cycles_run = 0;
    int best_cycle = 0;
    double best_val_loss = 0.0;
    bool converged = false;  // stopped by patience rather than max_cycles
};

class Trainer {
public:
    // Takes ownership of the (unnormalized) samples; normalization stats are
    // computed from the training split and applied to both splits.
    Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
            std::vector<Sample> train, std::vector<Sample> val);

    // Runs cycles until patience or max_cycles, then restores the weights of
    // the best validation cycle. The callback (cycle stats) may return false
    // to stop early.
    using CycleCallback = std::function<bool(const CycleStats&)>;
    TrainResult run(const CycleCallback& cb = {});

    // Single-cycle machinery, public for tests and diagnostics: new_cycle()
    // reshuffles the batch order, the steps each make one pass over it.
    void new_cycle();
    double run_step1();
    double run_step2();
    double run_step3();
    void validate_cycle(double& val_loss, double& val_dice);

    ForwardSystem& forward_system() { return *systems_.forward; }
    FeedbackSystem* feedback_system() { return systems_.feedback.get(); }
    const NormStats& stats() const { return stats_; }
    const TrainConfig& train_config() const { return cfg_; }
    CheckpointMeta checkpoint_meta(int cycle) const;

private:
    Tensor4 batch_images(int b) const;
    Tensor4 batch_targets(int b) const;
    int batch_count() const;

    TrainConfig cfg_;
    Systems systems_;
    std::vector<Sample> train_, val_;
    NormStats stats_;
    Rng shuffle_rng_;
    std::vector<int> order_;
    Adam opt_s_, opt_f_;
};

// Run the segmentation with the latent feedback loop, all in eval mode:
// iterations = 0 is the plain forward pass with the neutral latent;
// iteration k re-encodes the previous prediction through F_e and decodes
// again. F_d never executes. Images must be pre-normalized, shape (n,1,h,w).
Tensor4 infer(const ForwardSystem& fwd, const FeedbackSystem* fb, const Tensor4& image,
              int iterations);

// argmax over channels (softmax head) or 0.5 threshold (single channel).
LabelMap probs_to_labels(const Tensor4& probs, int sample_index = 0);

// Batch assembly helpers (shared by trainer, evaluation, tests).
Tensor4 stack_images(const std::vector<Sample>& samples, const std::vector<int>& order,
                     int from, int to);
Tensor4 one_hot_labels(const std::vector<Sample>& samples, const std::vector<int>& order,
                       int from, int to, int classes);

}  // namespace lfb

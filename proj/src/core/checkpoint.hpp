#pragma once

#include <string>

#include "core/dataset.hpp"
#include "core/model.hpp"

namespace lfb {

// Checkpoint container (.lfbc): magic "LFBC", u32 version, u64 metadata
// length + canonical JSON metadata, then named tensor records until EOF:
// u32 name length, name bytes, u32 rank (4), 4 x u64 dims, f64 payload.
// Record order is the systems' registration order, so save -> load -> save
// reproduces the file byte for byte. Batch-norm running estimates are stored
// as named records alongside the trainable parameters.

struct CheckpointMeta {
    std::string variant = "lfb";  // fs | fs_star | lfb
    int cycle = 0;                // training cycles completed when saved
    ModelConfig model;
    NormStats norm;               // dataset normalization baked at train time
    bool with_feedback = true;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     ForwardSystem& fwd, FeedbackSystem* fb);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    Systems systems;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// The checkpoint's metadata block as JSON (also used by the C API model_info).
std::string checkpoint_meta_json(const CheckpointMeta& meta);
CheckpointMeta checkpoint_meta_from_json(const std::string& text);

// ModelConfig <-> JSON (strict keys); shared by checkpoints and experiment
// configuration.
std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace lfb

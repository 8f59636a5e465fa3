#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "core/nn.hpp"

namespace lfb {

// Widths of the two systems. The forward encoder runs base, 2*base, 4*base
// then a latent-width bottleneck; the decoder mirrors the encoder after a
// wide post-merge block (2*latent channels) that digests the fused latent.
// The feedback encoder runs feedback_base, 2*fb, 4*fb into the same latent
// width so its code can be merged with the forward latent.
struct ModelConfig {
    int classes = 4;
    int image_size = 256;
    int base_channels = 32;
    int latent_channels = 256;
    int feedback_base = 16;
    bool use_se = true;
    int se_reduction = 8;
    std::string merge = "concat";  // concat | add | mul

    void validate() const;
    int latent_size() const { return image_size / 8; }
};

class ForwardSystem {
public:
    ForwardSystem(const ModelConfig& cfg, std::uint64_t seed);

    struct Encoded {
        Var h;                     // latent code (n, latent, h/8, w/8)
        std::array<Var, 3> skips;  // pre-pool activations for the decoder
    };

    Encoded encode(Tape* tape, const Var& x, bool training) const;
    // h_f: feedback latent (same shape as h_s); pass latent_identity() on the
    // first pass. Returns class probabilities (softmax, or sigmoid when
    // classes == 1).
    Var decode(Tape* tape, const Var& h_s, const Var& h_f,
               const std::array<Var, 3>& skips, bool training) const;
    Var forward(Tape* tape, const Var& x, const Var& h_f, bool training) const;

    // Neutral element of the configured merge: zeros for concat/add, ones for
    // multiply, shaped (n, latent, h, w) in latent coordinates.
    Tensor4 latent_identity(int n, int h, int w) const;

    const ModelConfig& config() const { return cfg_; }
    ParamSet& params() { return ps_; }
    const ParamSet& params() const { return ps_; }

    void set_encoder_frozen(bool f);
    void set_decoder_frozen(bool f);
    bool encoder_frozen() const { return enc_frozen_; }
    bool decoder_frozen() const { return dec_frozen_; }

private:
    ModelConfig cfg_;
    ParamSet ps_;
    ConvBlock enc1_, enc2_, enc3_, bottleneck_;
    ConvBlock merge_block_;
    TransposedConv2d up1_, up2_, up3_;
    ConvBlock dec3_, dec2_, dec1_;
    Conv2d head_;
    bool enc_frozen_ = false, dec_frozen_ = false;
};

class FeedbackSystem {
public:
    FeedbackSystem(const ModelConfig& cfg, std::uint64_t seed);

    Var encode(Tape* tape, const Var& probs, bool training) const;  // F_e
    Var decode(Tape* tape, const Var& h, bool training) const;      // F_d
    Var forward(Tape* tape, const Var& probs, bool training) const;

    ParamSet& params() { return ps_; }
    const ParamSet& params() const { return ps_; }

    void set_frozen(bool f);
    bool frozen() const { return frozen_; }

    // Number of times F_d has executed; inference must never raise it.
    std::size_t decode_count() const { return decode_count_; }

private:
    ModelConfig cfg_;
    ParamSet ps_;
    ConvBlock enc1_, enc2_, enc3_, bottleneck_;
    TransposedConv2d up1_, up2_, up3_;
    ConvBlock dec1_, dec2_, dec3_;
    Conv2d head_;
    bool frozen_ = false;
    mutable std::size_t decode_count_ = 0;
};

struct Systems {
    std::unique_ptr<ForwardSystem> forward;
    std::unique_ptr<FeedbackSystem> feedback;  // null when built without feedback
};

// Both systems from one seed (the feedback system uses a salted sub-seed so
// the two draw independent weights).
Systems build_systems(const ModelConfig& cfg, std::uint64_t seed, bool with_feedback);

}  // namespace lfb

#include "core/model.hpp"

namespace lfb {

void ModelConfig::validate() const {
    require(classes >= 1, "ModelConfig: classes must be >= 1");
    require(image_size >= 16 && image_size % 8 == 0,
            "ModelConfig: image_size must be a multiple of 8 and >= 16, got " +
                std::to_string(image_size));
    require(base_channels >= 1 && latent_channels >= 1 && feedback_base >= 1,
            "ModelConfig: channel widths must be positive");
    if (use_se) {
        require(se_reduction >= 1, "ModelConfig: se_reduction must be >= 1");
        require(base_channels % se_reduction == 0 && latent_channels % se_reduction == 0,
                "ModelConfig: base and latent channels must be divisible by se_reduction");
    }
    require(merge == "concat" || merge == "add" || merge == "mul",
            "ModelConfig: merge must be one of concat|add|mul, got '" + merge + "'");
}

namespace {
constexpr std::uint64_t kFeedbackSeedSalt = 0x9e3779b97f4a7c15ull;
}

// ---------------------------------------------------------------------------
// forward system
// ---------------------------------------------------------------------------

ForwardSystem::ForwardSystem(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int b = cfg_.base_channels, L = cfg_.latent_channels;
    const bool se = cfg_.use_se;
    const int r = cfg_.se_reduction;

    enc1_ = ConvBlock(ps_, "S_e/enc1", 1, b, 2, se, r, rng);
    enc2_ = ConvBlock(ps_, "S_e/enc2", b, 2 * b, 2, se, r, rng);
    enc3_ = ConvBlock(ps_, "S_e/enc3", 2 * b, 4 * b, 2, se, r, rng);
    bottleneck_ = ConvBlock(ps_, "S_e/bottleneck", 4 * b, L, 2, se, r, rng);

    const int merged_in = cfg_.merge == "concat" ? 2 * L : L;
    merge_block_ = ConvBlock(ps_, "S_d/merge", merged_in, 2 * L, 2, se, r, rng);
    up1_ = TransposedConv2d(ps_, "S_d/up1", 2 * L, 4 * b, 2, 2, rng);
    dec3_ = ConvBlock(ps_, "S_d/dec3", 8 * b, 4 * b, 2, se, r, rng);
    up2_ = TransposedConv2d(ps_, "S_d/up2", 4 * b, 2 * b, 2, 2, rng);
    dec2_ = ConvBlock(ps_, "S_d/dec2", 4 * b, 2 * b, 2, se, r, rng);
    up3_ = TransposedConv2d(ps_, "S_d/up3", 2 * b, b, 2, 2, rng);
    dec1_ = ConvBlock(ps_, "S_d/dec1", 2 * b, b, 2, se, r, rng);
    head_ = Conv2d(ps_, "S_d/head", b, cfg_.classes, 1, 1, 0, true, rng);
}

ForwardSystem::Encoded ForwardSystem::encode(Tape* tape, const Var& x, bool training) const {
    const Shape4 s = x.shape();
    require(s.c == 1, "ForwardSystem::encode: expected single-channel input, got " + s.str());
    require(s.h % 8 == 0 && s.w % 8 == 0,
            "ForwardSystem::encode: spatial dims must be multiples of 8, got " + s.str());
    const bool t = training && !enc_frozen_;
    Encoded e;
    Var a1 = enc1_.forward(tape, x, t);
    Var a2 = enc2_.forward(tape, maxpool2d(tape, a1), t);
    Var a3 = enc3_.forward(tape, maxpool2d(tape, a2), t);
    e.h = bottleneck_.forward(tape, maxpool2d(tape, a3), t);
    e.skips = {a1, a2, a3};
    return e;
}

Var ForwardSystem::decode(Tape* tape, const Var& h_s, const Var& h_f,
                          const std::array<Var, 3>& skips, bool training) const {
    require(h_f.defined(), "ForwardSystem::decode: feedback latent is undefined");
    require(h_s.shape() == h_f.shape(),
            "ForwardSystem::decode: latent shapes differ: " + h_s.shape().str() + " vs " +
                h_f.shape().str());
    const bool t = training && !dec_frozen_;
    Var merged;
    if (cfg_.merge == "concat")
        merged = concat_channels(tape, h_s, h_f);
    else if (cfg_.merge == "add")
        merged = add(tape, h_s, h_f);
    else
        merged = mul(tape, h_s, h_f);

    Var h = merge_block_.forward(tape, merged, t);
    h = up1_.forward(tape, h);
    h = dec3_.forward(tape, concat_channels(tape, h, skips[2]), t);
    h = up2_.forward(tape, h);
    h = dec2_.forward(tape, concat_channels(tape, h, skips[1]), t);
    h = up3_.forward(tape, h);
    h = dec1_.forward(tape, concat_channels(tape, h, skips[0]), t);
    Var logits = head_.forward(tape, h);
    return cfg_.classes == 1 ? sigmoid(tape, logits) : softmax_channels(tape, logits);
}

Var ForwardSystem::forward(Tape* tape, const Var& x, const Var& h_f, bool training) const {
    Encoded e = encode(tape, x, training);
    return decode(tape, e.h, h_f, e.skips, training);
}

Tensor4 ForwardSystem::latent_identity(int n, int h, int w) const {
    const double fill = cfg_.merge == "mul" ? 1.0 : 0.0;
    return Tensor4({n, cfg_.latent_channels, h, w}, fill);
}

void ForwardSystem::set_encoder_frozen(bool f) {
    enc_frozen_ = f;
    ps_.set_frozen("S_e/", f);
}

void ForwardSystem::set_decoder_frozen(bool f) {
    dec_frozen_ = f;
    ps_.set_frozen("S_d/", f);
}

// ---------------------------------------------------------------------------
// feedback system
// ---------------------------------------------------------------------------

FeedbackSystem::FeedbackSystem(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int fb = cfg_.feedback_base, L = cfg_.latent_channels;

    enc1_ = ConvBlock(ps_, "F_e/enc1", cfg_.classes, fb, 2, false, 0, rng);
    enc2_ = ConvBlock(ps_, "F_e/enc2", fb, 2 * fb, 2, false, 0, rng);
    enc3_ = ConvBlock(ps_, "F_e/enc3", 2 * fb, 4 * fb, 2, false, 0, rng);
    bottleneck_ = ConvBlock(ps_, "F_e/bottleneck", 4 * fb, L, 2, false, 0, rng);

    up1_ = TransposedConv2d(ps_, "F_d/up1", L, 8 * fb, 2, 2, rng);
    dec1_ = ConvBlock(ps_, "F_d/dec1", 8 * fb, 8 * fb, 2, false, 0, rng);
    up2_ = TransposedConv2d(ps_, "F_d/up2", 8 * fb, 4 * fb, 2, 2, rng);
    dec2_ = ConvBlock(ps_, "F_d/dec2", 4 * fb, 4 * fb, 2, false, 0, rng);
    up3_ = TransposedConv2d(ps_, "F_d/up3", 4 * fb, 2 * fb, 2, 2, rng);
    dec3_ = ConvBlock(ps_, "F_d/dec3", 2 * fb, 2 * fb, 2, false, 0, rng);
    head_ = Conv2d(ps_, "F_d/head", 2 * fb, cfg_.classes, 1, 1, 0, true, rng);
}

Var FeedbackSystem::encode(Tape* tape, const Var& probs, bool training) const {
    const Shape4 s = probs.shape();
    require(s.c == cfg_.classes,
            "FeedbackSystem::encode: expected " + std::to_string(cfg_.classes) +
                " channels, got " + s.str());
    require(s.h % 8 == 0 && s.w % 8 == 0,
            "FeedbackSystem::encode: spatial dims must be multiples of 8, got " + s.str());
    const bool t = training && !frozen_;
    Var h = enc1_.forward(tape, probs, t);
    h = enc2_.forward(tape, maxpool2d(tape, h), t);
    h = enc3_.forward(tape, maxpool2d(tape, h), t);
    return bottleneck_.forward(tape, maxpool2d(tape, h), t);
}

Var FeedbackSystem::decode(Tape* tape, const Var& h, bool training) const {
    ++decode_count_;
    const bool t = training && !frozen_;
    Var y = dec1_.forward(tape, up1_.forward(tape, h), t);
    y = dec2_.forward(tape, up2_.forward(tape, y), t);
    y = dec3_.forward(tape, up3_.forward(tape, y), t);
    Var logits = head_.forward(tape, y);
    return cfg_.classes == 1 ? sigmoid(tape, logits) : softmax_channels(tape, logits);
}

Var FeedbackSystem::forward(Tape* tape, const Var& probs, bool training) const {
    return decode(tape, encode(tape, probs, training), training);
}

void FeedbackSystem::set_frozen(bool f) {
    frozen_ = f;
    ps_.set_frozen("F_", f);
}

// ---------------------------------------------------------------------------

Systems build_systems(const ModelConfig& cfg, std::uint64_t seed, bool with_feedback) {
    Systems sys;
    sys.forward = std::make_unique<ForwardSystem>(cfg, seed);
    if (with_feedback)
        sys.feedback = std::make_unique<FeedbackSystem>(cfg, seed ^ kFeedbackSeedSalt);
    return sys;
}

}  // namespace lfb

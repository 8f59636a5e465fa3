#include "core/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "core/metrics.hpp"

namespace lfb {

void TrainConfig::validate() const {
    require(variant == "fs" || variant == "fs_star" || variant == "lfb",
            "train config: variant must be fs|fs_star|lfb, got '" + variant + "'");
    require(batch_size >= 1, "train config: batch_size must be >= 1");
    require(learning_rate > 0.0, "train config: learning_rate must be positive");
    require(max_cycles >= 1 && patience >= 1,
            "train config: max_cycles and patience must be >= 1");
    require(val_feedback_iterations >= 0 && val_feedback_iterations <= 8,
            "train config: val_feedback_iterations out of range");
}

namespace {

// Mean Dice over foreground classes (everything but label 0) of one pair.
double sample_mean_dice(const LabelMap& pred, const LabelMap& ref, int classes) {
    const int last = std::max(classes - 1, 1);
    double acc = 0.0;
    for (int k = 1; k <= last; ++k)
        acc += dice_coefficient(BinaryMask::from_labels(pred, k),
                                BinaryMask::from_labels(ref, k));
    return acc / double(last);
}

}  // namespace

Tensor4 stack_images(const std::vector<Sample>& samples, const std::vector<int>& order,
                     int from, int to) {
    require(from >= 0 && to > from && to <= int(order.size()), "stack_images: bad range");
    const Shape4 s0 = samples[order[from]].image.shape;
    Tensor4 out({to - from, 1, s0.h, s0.w});
    for (int i = from; i < to; ++i) {
        const Tensor4& img = samples[order[i]].image;
        require(img.shape == s0, "stack_images: mixed image sizes in batch");
        std::copy(img.v.begin(), img.v.end(),
                  out.v.begin() + std::size_t(i - from) * img.size());
    }
    return out;
}

Tensor4 one_hot_labels(const std::vector<Sample>& samples, const std::vector<int>& order,
                       int from, int to, int classes) {
    require(from >= 0 && to > from && to <= int(order.size()), "one_hot_labels: bad range");
    const LabelMap& l0 = samples[order[from]].labels;
    const std::size_t plane = std::size_t(l0.h) * l0.w;
    Tensor4 out({to - from, classes, l0.h, l0.w});
    for (int i = from; i < to; ++i) {
        const LabelMap& lm = samples[order[i]].labels;
        require(lm.h == l0.h && lm.w == l0.w, "one_hot_labels: mixed label sizes");
        double* base = out.data() + std::size_t(i - from) * classes * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            const int cls = lm.v[p];
            require(cls < std::max(classes, 2),
                    "one_hot_labels: label " + std::to_string(cls) + " exceeds class count");
            if (classes == 1)
                base[p] = cls == 1 ? 1.0 : 0.0;  // binary map for the sigmoid head
            else
                base[std::size_t(cls) * plane + p] = 1.0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                 std::vector<Sample> train, std::vector<Sample> val)
    : cfg_(train_cfg),
      systems_(build_systems(model_cfg, train_cfg.seed, train_cfg.variant == "lfb")),
      train_(std::move(train)),
      val_(std::move(val)),
      shuffle_rng_(train_cfg.seed ^ 0xa0761d6478bd642full),
      opt_s_({}, {}),
      opt_f_({}, {}) {
    cfg_.validate();
    require(!train_.empty() && !val_.empty(), "trainer: train and val splits must be non-empty");
    require(cfg_.class_weights.empty() ||
                int(cfg_.class_weights.size()) == model_cfg.classes,
            "trainer: class_weights must match the class count");
    if (model_cfg.use_se && train_cfg.variant == "fs_star")
        throw std::invalid_argument("trainer: fs_star requires use_se=false in the model config");
    for (const auto& ss : {&train_, &val_})
        for (const Sample& s : *ss) {
            require(s.image.shape.h == model_cfg.image_size &&
                        s.image.shape.w == model_cfg.image_size,
                    "trainer: sample " + s.id + " size differs from model image_size");
            for (std::uint8_t c : s.labels.v)
                require(int(c) < std::max(model_cfg.classes, 2),
                        "trainer: sample " + s.id + " has label outside class range");
        }

    stats_ = compute_stats(train_);
    normalize(train_, stats_);
    normalize(val_, stats_);

    AdamConfig ac;
    ac.lr = cfg_.learning_rate;
    opt_s_ = Adam(systems_.forward->params().params(), ac);
    if (systems_.feedback) opt_f_ = Adam(systems_.feedback->params().params(), ac);

    order_.resize(train_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = int(i);
}

int Trainer::batch_count() const {
    return int((train_.size() + cfg_.batch_size - 1) / cfg_.batch_size);
}

Tensor4 Trainer::batch_images(int b) const {
    const int from = b * cfg_.batch_size;
    const int to = std::min<int>(from + cfg_.batch_size, int(train_.size()));
    return stack_images(train_, order_, from, to);
}

Tensor4 Trainer::batch_targets(int b) const {
    const int from = b * cfg_.batch_size;
    const int to = std::min<int>(from + cfg_.batch_size, int(train_.size()));
    return one_hot_labels(train_, order_, from, to,
                          systems_.forward->config().classes);
}

void Trainer::new_cycle() {
    for (int i = int(order_.size()) - 1; i > 0; --i)
        std::swap(order_[i], order_[shuffle_rng_.randint(0, i)]);
}

double Trainer::run_step1() {
    ForwardSystem& S = *systems_.forward;
    S.set_encoder_frozen(false);
    S.set_decoder_frozen(false);
    double acc = 0.0;
    const int nb = batch_count();
    for (int b = 0; b < nb; ++b) {
        Tape tape;
        Var x = Var::leaf(batch_images(b));
        Var y = Var::leaf(batch_targets(b));
        auto enc = S.encode(&tape, x, true);
        const Shape4 hs = enc.h.shape();
        Var h0 = Var::leaf(S.latent_identity(hs.n, hs.h, hs.w));
        Var probs = S.decode(&tape, enc.h, h0, enc.skips, true);
        Var loss = total_loss(&tape, cross_entropy_loss(&tape, probs, y),
                              dice_loss(&tape, probs, y, cfg_.class_weights));
        tape.backward(loss);
        opt_s_.step();
        opt_s_.zero_grad();
        acc += loss.value().item();
    }
    return acc / nb;
}

double Trainer::run_step2() {
    require(systems_.feedback != nullptr, "run_step2: no feedback system");
    ForwardSystem& S = *systems_.forward;
    FeedbackSystem& F = *systems_.feedback;
    S.set_encoder_frozen(true);
    S.set_decoder_frozen(true);
    F.set_frozen(false);
    double acc = 0.0;
    const int nb = batch_count();
    for (int b = 0; b < nb; ++b) {
        Var x = Var::leaf(batch_images(b));
        Var y = Var::leaf(batch_targets(b));
        // S's prediction, frozen eval, not taped: gradient stops at yhat
        auto enc = S.encode(nullptr, x, false);
        const Shape4 hs = enc.h.shape();
        Var h0 = Var::leaf(S.latent_identity(hs.n, hs.h, hs.w));
        Var yhat = S.decode(nullptr, enc.h, h0, enc.skips, false);

        Tape tape;
        Var phat = F.forward(&tape, yhat, true);
        Var loss = total_loss(&tape, cross_entropy_loss(&tape, phat, y),
                              dice_loss(&tape, phat, y, cfg_.class_weights));
        tape.backward(loss);
        opt_f_.step();
        opt_f_.zero_grad();
        acc += loss.value().item();
    }
    return acc / nb;
}

double Trainer::run_step3() {
    require(systems_.feedback != nullptr, "run_step3: no feedback system");
    ForwardSystem& S = *systems_.forward;
    FeedbackSystem& F = *systems_.feedback;
    S.set_encoder_frozen(true);
    S.set_decoder_frozen(false);
    F.set_frozen(true);
    double acc = 0.0;
    const int nb = batch_count();
    for (int b = 0; b < nb; ++b) {
        Var x = Var::leaf(batch_images(b));
        Var y = Var::leaf(batch_targets(b));
        // frozen eval encoder: h_s and skips are constants for this step
        auto enc = S.encode(nullptr, x, false);
        const Shape4 hs = enc.h.shape();
        Var h0 = Var::leaf(S.latent_identity(hs.n, hs.h, hs.w));
        // S's own prediction (eval-mode batch norm), then the frozen feedback
        // encoder turns it into the feedback latent
        Var yhat = S.decode(nullptr, enc.h, h0, enc.skips, false);
        Var hf = F.encode(nullptr, yhat, false);

        Tape tape;
        Var probs = S.decode(&tape, enc.h, hf, enc.skips, true);
        Var loss = total_loss(&tape, cross_entropy_loss(&tape, probs, y),
                              dice_loss(&tape, probs, y, cfg_.class_weights));
        tape.backward(loss);
        opt_s_.step();  // encoder is frozen; only S_d moves
        opt_s_.zero_grad();
        acc += loss.value().item();
    }
    return acc / nb;
}

void Trainer::validate_cycle(double& val_loss, double& val_dice) {
    ForwardSystem& S = *systems_.forward;
    const int classes = S.config().classes;
    const int iters = cfg_.variant == "lfb" ? cfg_.val_feedback_iterations : 0;

    std::vector<int> order(val_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);

    double loss_acc = 0.0, dice_acc = 0.0;
    int nb = 0;
    for (int from = 0; from < int(val_.size()); from += cfg_.batch_size, ++nb) {
        const int to = std::min<int>(from + cfg_.batch_size, int(val_.size()));
        const Tensor4 probs =
            infer(S, systems_.feedback.get(), stack_images(val_, order, from, to), iters);
        Var pv = Var::leaf(Tensor4(probs));
        Var yv = Var::leaf(one_hot_labels(val_, order, from, to, classes));
        loss_acc += total_loss(nullptr, cross_entropy_loss(nullptr, pv, yv),
                               dice_loss(nullptr, pv, yv, cfg_.class_weights))
                        .value()
                        .item();
        for (int i = from; i < to; ++i)
            dice_acc += sample_mean_dice(probs_to_labels(probs, i - from),
                                         val_[i].labels, classes);
    }
    val_loss = loss_acc / nb;
    val_dice = dice_acc / double(val_.size());
}

TrainResult Trainer::run(const CycleCallback& cb) {
    TrainResult res;
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<Tensor4> snapshot;
    auto take_snapshot = [&] {
        snapshot.clear();
        for (auto& e : systems_.forward->params().entries()) snapshot.push_back(*e.tensor);
        if (systems_.feedback)
            for (auto& e : systems_.feedback->params().entries())
                snapshot.push_back(*e.tensor);
    };

    for (int cycle = 1; cycle <= cfg_.max_cycles; ++cycle) {
        new_cycle();
        CycleStats cs;
        cs.cycle = cycle;
        cs.step1_loss = run_step1();
        if (cfg_.variant == "lfb") {
            cs.step2_loss = run_step2();
            cs.step3_loss = run_step3();
        }
        validate_cycle(cs.val_loss, cs.val_dice);
        res.history.push_back(cs);
        res.cycles_run = cycle;

        if (cs.val_loss < best) {
            best = cs.val_loss;
            res.best_cycle = cycle;
            since_best = 0;
            take_snapshot();
        } else {
            ++since_best;
        }
        if (cb && !cb(cs)) break;
        if (since_best >= cfg_.patience) {
            res.converged = true;
            break;
        }
    }
    res.best_val_loss = best;

    // restore the best-validation weights (and running stats)
    if (!snapshot.empty()) {
        std::size_t i = 0;
        for (auto& e : systems_.forward->params().entries()) *e.tensor = snapshot[i++];
        if (systems_.feedback)
            for (auto& e : systems_.feedback->params().entries())
                *e.tensor = snapshot[i++];
    }
    systems_.forward->set_encoder_frozen(false);
    systems_.forward->set_decoder_frozen(false);
    if (systems_.feedback) systems_.feedback->set_frozen(false);
    return res;
}

CheckpointMeta Trainer::checkpoint_meta(int cycle) const {
    CheckpointMeta m;
    m.variant = cfg_.variant;
    m.cycle = cycle;
    m.model = systems_.forward->config();
    m.norm = stats_;
    m.with_feedback = systems_.feedback != nullptr;
    return m;
}

// ---------------------------------------------------------------------------

Tensor4 infer(const ForwardSystem& fwd, const FeedbackSystem* fb, const Tensor4& image,
              int iterations) {
    require(iterations >= 0, "infer: iterations must be >= 0");
    require(iterations == 0 || fb != nullptr,
            "infer: feedback iterations require a feedback system");
    Var x = Var::leaf(Tensor4(image));
    auto enc = fwd.encode(nullptr, x, false);
    const Shape4 hs = enc.h.shape();
    Var h = Var::leaf(fwd.latent_identity(hs.n, hs.h, hs.w));
    Var probs = fwd.decode(nullptr, enc.h, h, enc.skips, false);
    for (int k = 0; k < iterations; ++k) {
        Var hf = fb->encode(nullptr, probs, false);
        probs = fwd.decode(nullptr, enc.h, hf, enc.skips, false);
    }
    return probs.value();
}

LabelMap probs_to_labels(const Tensor4& probs, int sample_index) {
    const Shape4 s = probs.shape;
    require(sample_index >= 0 && sample_index < s.n, "probs_to_labels: bad sample index");
    LabelMap out(s.h, s.w);
    const std::size_t plane = std::size_t(s.h) * s.w;
    const double* base = probs.data() + std::size_t(sample_index) * s.c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
        if (s.c == 1) {
            out.v[p] = base[p] >= 0.5 ? 1 : 0;
        } else {
            int best = 0;
            double bv = base[p];
            for (int c = 1; c < s.c; ++c) {
                const double v = base[std::size_t(c) * plane + p];
                if (v > bv) {
                    bv = v;
                    best = c;
                }
            }
            out.v[p] = std::uint8_t(best);
        }
    }
    return out;
}

}  // namespace lfb

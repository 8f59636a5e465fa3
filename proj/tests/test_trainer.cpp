#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "core/phantom.hpp"
#include "core/trainer.hpp"

using namespace lfb;

namespace {

PhantomSpec small_spec(std::uint64_t seed) {
    PhantomSpec s;
    s.kind = "cardiac";
    s.image_size = 32;
    s.seed = seed;
    s.noise_sigma = 0.08;
    return s;
}

std::vector<Sample> make_samples(const PhantomSpec& spec, int n, std::uint64_t seed0) {
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
        PhantomSample ps = generate_phantom(spec, seed0 + std::uint64_t(i));
        Sample s;
        s.id = "s" + std::to_string(i);
        s.image = std::move(ps.image);
        s.labels = std::move(ps.labels);
        s.seed = seed0 + std::uint64_t(i);
        out.push_back(std::move(s));
    }
    return out;
}

ModelConfig small_model() {
    ModelConfig m;
    m.classes = 4;
    m.image_size = 32;
    m.base_channels = 8;
    m.latent_channels = 8;
    m.feedback_base = 8;
    m.se_reduction = 8;
    return m;
}

TrainConfig small_train(const std::string& variant, std::uint64_t seed = 7) {
    TrainConfig t;
    t.variant = variant;
    t.batch_size = 4;
    t.learning_rate = 1e-3;
    t.max_cycles = 3;
    t.patience = 100;
    t.val_feedback_iterations = 1;
    t.seed = seed;
    return t;
}

struct GroupHashes {
    std::uint64_t se, sd, fe, fd;
};

GroupHashes hashes_of(Trainer& tr) {
    GroupHashes h{};
    h.se = tr.forward_system().params().state_hash("S_e/");
    h.sd = tr.forward_system().params().state_hash("S_d/");
    if (tr.feedback_system()) {
        h.fe = tr.feedback_system()->params().state_hash("F_e/");
        h.fd = tr.feedback_system()->params().state_hash("F_d/");
    }
    return h;
}

}  // namespace

TEST_CASE("train config and trainer construction validation") {
    TrainConfig t = small_train("lfb");
    CHECK_NOTHROW(t.validate());
    t.variant = "gan";
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = small_train("lfb");
    t.batch_size = 0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = small_train("lfb");
    t.learning_rate = 0.0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = small_train("lfb");
    t.val_feedback_iterations = 9;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);
    t = small_train("lfb");
    t.max_cycles = 0;
    CHECK_THROWS_AS(t.validate(), std::invalid_argument);

    PhantomSpec spec = small_spec(1);
    auto train = make_samples(spec, 6, 100);
    auto val = make_samples(spec, 2, 200);

    // fs_star insists the gates are off
    ModelConfig gated = small_model();
    CHECK_THROWS_AS(Trainer(gated, small_train("fs_star"), train, val),
                    std::invalid_argument);
    ModelConfig plain = small_model();
    plain.use_se = false;
    CHECK_NOTHROW(Trainer(plain, small_train("fs_star"), train, val));

    // image size mismatch
    ModelConfig big = small_model();
    big.image_size = 64;
    CHECK_THROWS_AS(Trainer(big, small_train("lfb"), train, val), std::invalid_argument);

    // label exceeding the class count
    auto bad = train;
    bad[0].labels.at(0, 0) = 7;
    CHECK_THROWS_AS(Trainer(small_model(), small_train("lfb"), bad, val),
                    std::invalid_argument);

    // empty splits
    CHECK_THROWS_AS(Trainer(small_model(), small_train("lfb"), {}, val),
                    std::invalid_argument);

    // class weight count must match
    TrainConfig w = small_train("lfb");
    w.class_weights = {1.0, 1.0};
    CHECK_THROWS_AS(Trainer(small_model(), w, train, val), std::invalid_argument);
}

TEST_CASE("three-step cycle touches exactly the prescribed parameter groups") {
    PhantomSpec spec = small_spec(2);
    Trainer tr(small_model(), small_train("lfb"), make_samples(spec, 8, 10),
               make_samples(spec, 2, 90));
    REQUIRE(tr.feedback_system() != nullptr);

    tr.new_cycle();
    GroupHashes h0 = hashes_of(tr);

    double l1 = tr.run_step1();
    CHECK(std::isfinite(l1));
    CHECK(l1 > 0.0);
    GroupHashes h1 = hashes_of(tr);
    CHECK(h1.se != h0.se);  // step 1 trains all of the forward system
    CHECK(h1.sd != h0.sd);
    CHECK(h1.fe == h0.fe);  // feedback untouched, bit for bit
    CHECK(h1.fd == h0.fd);

    double l2 = tr.run_step2();
    CHECK(std::isfinite(l2));
    GroupHashes h2 = hashes_of(tr);
    CHECK(h2.se == h1.se);  // the forward system is frozen in eval mode:
    CHECK(h2.sd == h1.sd);  // neither weights nor running stats may move
    CHECK(h2.fe != h1.fe);  // both feedback halves train
    CHECK(h2.fd != h1.fd);

    double l3 = tr.run_step3();
    CHECK(std::isfinite(l3));
    GroupHashes h3 = hashes_of(tr);
    CHECK(h3.se == h2.se);  // encoder stays frozen
    CHECK(h3.sd != h2.sd);  // only the decoder moves
    CHECK(h3.fe == h2.fe);
    CHECK(h3.fd == h2.fd);
}

TEST_CASE("feedback-free variants have no feedback system and skip steps 2/3") {
    PhantomSpec spec = small_spec(3);
    ModelConfig plain = small_model();
    plain.use_se = false;
    Trainer tr(plain, small_train("fs_star"), make_samples(spec, 4, 10),
               make_samples(spec, 2, 50));
    CHECK(tr.feedback_system() == nullptr);
    tr.new_cycle();
    CHECK_NOTHROW(tr.run_step1());
    CHECK_THROWS_AS(tr.run_step2(), std::invalid_argument);
    CHECK_THROWS_AS(tr.run_step3(), std::invalid_argument);

    TrainResult r = tr.run();
    for (const CycleStats& c : r.history) {
        CHECK(std::isnan(c.step2_loss));  // never ran
        CHECK(std::isnan(c.step3_loss));
        CHECK(std::isfinite(c.step1_loss));
        CHECK(std::isfinite(c.val_loss));
    }
}

TEST_CASE("inference: zero iterations is the plain forward pass; the feedback decoder never runs") {
    PhantomSpec spec = small_spec(4);
    Trainer tr(small_model(), small_train("lfb"), make_samples(spec, 6, 10),
               make_samples(spec, 2, 80));
    ForwardSystem& S = tr.forward_system();
    FeedbackSystem* F = tr.feedback_system();

    // a couple of cycles so the weights are not at init
    tr.new_cycle();
    tr.run_step1();
    tr.run_step2();
    tr.run_step3();

    Rng rng(5);
    Tensor4 x({2, 1, 32, 32});
    for (auto& v : x.v) v = rng.uniform(-1.0, 1.0);

    const std::size_t decodes_before = F->decode_count();
    Tensor4 it0 = infer(S, F, x, 0);
    CHECK(it0.shape == Shape4{2, 4, 32, 32});

    // plain forward in eval mode with the neutral latent
    Var vx = Var::leaf(x);
    Var h0 = Var::leaf(S.latent_identity(2, 4, 4));
    Tensor4 plain = S.forward(nullptr, vx, h0, false).value();
    CHECK(it0.v == plain.v);  // bit-identical

    Tensor4 it1 = infer(S, F, x, 1);
    Tensor4 it2 = infer(S, F, x, 2);
    CHECK(it1.v != it0.v);  // the feedback latent genuinely changes the output
    CHECK(it2.v != it1.v);
    CHECK(F->decode_count() == decodes_before);  // F_d never executes at inference

    // eval-mode inference is repeatable bit for bit
    CHECK(infer(S, F, x, 2).v == it2.v);

    // iterations without a feedback system are rejected
    CHECK_THROWS_AS(infer(S, nullptr, x, 1), std::invalid_argument);
    CHECK_NOTHROW(infer(S, nullptr, x, 0));
}

TEST_CASE("probs_to_labels: argmax with first-wins ties, 0.5 threshold for binary") {
    Tensor4 p({1, 3, 1, 2});
    p.at(0, 0, 0, 0) = 0.4;
    p.at(0, 1, 0, 0) = 0.4;  // tie with class 0 -> class 0 wins
    p.at(0, 2, 0, 0) = 0.2;
    p.at(0, 0, 0, 1) = 0.1;
    p.at(0, 1, 0, 1) = 0.2;
    p.at(0, 2, 0, 1) = 0.7;
    LabelMap m = probs_to_labels(p);
    CHECK(m.at(0, 0) == 0);
    CHECK(m.at(0, 1) == 2);

    Tensor4 b({2, 1, 1, 3});
    b.at(0, 0, 0, 0) = 0.49;
    b.at(0, 0, 0, 1) = 0.5;
    b.at(0, 0, 0, 2) = 0.51;
    b.at(1, 0, 0, 0) = 0.99;
    LabelMap mb = probs_to_labels(b, 0);
    CHECK(mb.at(0, 0) == 0);
    CHECK(mb.at(0, 1) == 1);  // >= 0.5 maps to foreground
    CHECK(mb.at(0, 2) == 1);
    LabelMap mb1 = probs_to_labels(b, 1);
    CHECK(mb1.at(0, 0) == 1);
    CHECK_THROWS_AS(probs_to_labels(b, 2), std::invalid_argument);
}

TEST_CASE("batch assembly helpers") {
    std::vector<Sample> ss(3);
    for (int i = 0; i < 3; ++i) {
        ss[i].image = Tensor4({1, 1, 2, 2}, double(i));
        ss[i].labels = LabelMap(2, 2);
        ss[i].labels.at(0, 0) = std::uint8_t(i);
    }
    std::vector<int> order = {2, 0, 1};

    Tensor4 batch = stack_images(ss, order, 0, 2);
    CHECK(batch.shape == Shape4{2, 1, 2, 2});
    CHECK(batch.at(0, 0, 0, 0) == 2.0);  // order[0] = sample 2
    CHECK(batch.at(1, 0, 0, 0) == 0.0);

    Tensor4 oh = one_hot_labels(ss, order, 0, 3, 3);
    CHECK(oh.shape == Shape4{3, 3, 2, 2});
    CHECK(oh.at(0, 2, 0, 0) == 1.0);  // sample 2 has label 2 at (0,0)
    CHECK(oh.at(0, 0, 0, 0) == 0.0);
    CHECK(oh.at(0, 0, 0, 1) == 1.0);  // elsewhere label 0
    // each pixel is one-hot
    for (int n = 0; n < 3; ++n)
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) {
                double s = 0;
                for (int c = 0; c < 3; ++c) s += oh.at(n, c, y, x);
                CHECK(s == 1.0);
            }

    // single-channel targets are binary maps
    Tensor4 bin = one_hot_labels(ss, {0, 1}, 0, 2, 1);
    CHECK(bin.shape == Shape4{2, 1, 2, 2});
    CHECK(bin.at(1, 0, 0, 0) == 1.0);
    CHECK(bin.at(0, 0, 0, 0) == 0.0);

    // a label of 2 cannot fit a binary map
    CHECK_THROWS_AS(one_hot_labels(ss, {2}, 0, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(stack_images(ss, order, 2, 2), std::invalid_argument);
}

TEST_CASE("full runs: history, best-cycle snapshot restore, determinism") {
    PhantomSpec spec = small_spec(6);
    auto train = make_samples(spec, 8, 600);
    auto val = make_samples(spec, 3, 700);

    Trainer tr(small_model(), small_train("lfb", 11), train, val);
    TrainResult r = tr.run();
    CHECK(r.cycles_run == 3);
    REQUIRE(int(r.history.size()) == 3);
    CHECK_FALSE(r.converged);  // stopped by max_cycles, not patience
    CHECK(r.best_cycle >= 1);
    CHECK(r.best_cycle <= 3);
    for (const CycleStats& c : r.history) {
        CHECK(std::isfinite(c.step1_loss));
        CHECK(std::isfinite(c.step2_loss));
        CHECK(std::isfinite(c.step3_loss));
        CHECK(c.val_dice >= 0.0);
        CHECK(c.val_dice <= 1.0);
    }
    double best = std::numeric_limits<double>::infinity();
    for (const CycleStats& c : r.history) best = std::min(best, c.val_loss);
    CHECK(r.best_val_loss == best);

    // the trainer restored the best cycle's weights: re-validating reproduces
    // the recorded best loss exactly
    double vl = 0, vd = 0;
    tr.validate_cycle(vl, vd);
    CHECK(vl == r.best_val_loss);

    // every group is unfrozen after the run
    for (Parameter* p : tr.forward_system().params().params()) CHECK_FALSE(p->frozen());
    for (Parameter* p : tr.feedback_system()->params().params()) CHECK_FALSE(p->frozen());

    // checkpoint metadata carries the training context
    CheckpointMeta meta = tr.checkpoint_meta(r.best_cycle);
    CHECK(meta.variant == "lfb");
    CHECK(meta.cycle == r.best_cycle);
    CHECK(meta.with_feedback);
    CHECK(meta.model.image_size == 32);
    CHECK(meta.norm.mean == tr.stats().mean);
    CHECK(meta.norm.stddev == tr.stats().stddev);

    SUBCASE("identical settings give identical runs") {
        Trainer tr2(small_model(), small_train("lfb", 11), train, val);
        TrainResult r2 = tr2.run();
        REQUIRE(r2.history.size() == r.history.size());
        for (std::size_t i = 0; i < r.history.size(); ++i) {
            CHECK(r2.history[i].step1_loss == r.history[i].step1_loss);
            CHECK(r2.history[i].step2_loss == r.history[i].step2_loss);
            CHECK(r2.history[i].step3_loss == r.history[i].step3_loss);
            CHECK(r2.history[i].val_loss == r.history[i].val_loss);
        }
        CHECK(tr2.forward_system().params().state_hash() ==
              tr.forward_system().params().state_hash());
    }

    SUBCASE("a different seed gives a different run") {
        Trainer tr3(small_model(), small_train("lfb", 12), train, val);
        TrainResult r3 = tr3.run();
        CHECK(r3.history[0].step1_loss != r.history[0].step1_loss);
    }
}

TEST_CASE("matched runs: variants share initialization and the first step") {
    PhantomSpec spec = small_spec(8);
    auto train = make_samples(spec, 6, 1000);
    auto val = make_samples(spec, 2, 1100);

    Trainer fs(small_model(), small_train("fs", 21), train, val);
    Trainer lfb(small_model(), small_train("lfb", 21), train, val);

    // same model seed -> the forward systems start bit-identical, so the two
    // variants are genuinely matched at initialization
    CHECK(fs.forward_system().params().state_hash() ==
          lfb.forward_system().params().state_hash());

    // same shuffle seed -> identical batch order -> identical first step
    fs.new_cycle();
    lfb.new_cycle();
    CHECK(fs.run_step1() == lfb.run_step1());
}

TEST_CASE("callback can stop a run early") {
    PhantomSpec spec = small_spec(9);
    Trainer tr(small_model(), small_train("lfb"), make_samples(spec, 4, 10),
               make_samples(spec, 2, 60));
    int seen = 0;
    TrainResult r = tr.run([&](const CycleStats& c) {
        ++seen;
        CHECK(c.cycle == seen);
        return c.cycle < 2;
    });
    CHECK(seen == 2);
    CHECK(r.cycles_run == 2);
    CHECK_FALSE(r.converged);
}

TEST_CASE("patience stops a run that cannot improve") {
    PhantomSpec spec = small_spec(10);
    TrainConfig cfg = small_train("fs", 3);
    cfg.learning_rate = 1e5;  // guaranteed divergence after the first cycle
    cfg.patience = 2;
    cfg.max_cycles = 10;
    Trainer tr(small_model(), cfg, make_samples(spec, 4, 10), make_samples(spec, 2, 60));
    TrainResult r = tr.run();
    CHECK(r.converged);
    CHECK(r.cycles_run < 10);
    CHECK(r.cycles_run - r.best_cycle >= cfg.patience);
    // the restored weights still reproduce the best validation loss
    double vl = 0, vd = 0;
    tr.validate_cycle(vl, vd);
    CHECK(vl == r.best_val_loss);
}

// Exercises the shared library strictly through include/lfbnet/lfbnet.h —
// no core headers, so this suite doubles as a check that the C surface is
// self-sufficient for an external consumer.
#include <doctest.h>

#include <lfbnet/lfbnet.h>

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

using nlohmann::json;
namespace fsys = std::filesystem;

namespace {

std::string take(char*& s) {
    std::string out = s ? s : "";
    lfbnet_string_free(s);
    s = nullptr;
    return out;
}

int32_t collect_lines(void* user_data, const char* line) {
    static_cast<std::vector<std::string>*>(user_data)->push_back(line);
    return 1;
}

int32_t stop_immediately(void* user_data, const char*) {
    ++*static_cast<int*>(user_data);
    return 0;
}

// One dataset and one trained forward-only checkpoint, built once and shared
// by the whole suite (training is the expensive part).
struct Fixture {
    std::string root, manifest, spec_hash, checkpoint, report_test;
    lfbnet_session* s = nullptr;

    static const char* spec_json() {
        return R"({"kind":"cardiac","image_size":32,"seed":77,"noise_sigma":0.08})";
    }

    std::string train_config(const std::string& variant, const std::string& out,
                             int max_cycles) const {
        json cfg;
        cfg["variant"] = variant;
        cfg["output_dir"] = out;
        cfg["model"] = {{"base_channels", 8}, {"latent_channels", 8},
                        {"feedback_base", 8}, {"se_reduction", 8}};
        cfg["train"] = {{"batch_size", 4}, {"max_cycles", max_cycles},
                        {"learning_rate", 1e-3}, {"seed", 5}};
        cfg["dataset"] = {{"manifest", manifest}};
        return cfg.dump();
    }

    Fixture() {
        char tmpl[] = "/tmp/lfbnet_capi_XXXXXX";
        REQUIRE(mkdtemp(tmpl) != nullptr);
        root = tmpl;
        s = lfbnet_session_create();
        REQUIRE(s != nullptr);

        char* mpath = nullptr;
        char* hash = nullptr;
        lfbnet_status st = lfbnet_generate_dataset(s, spec_json(), 12, 0.6, 0.2, 0.2,
                                                   (root + "/data").c_str(), &mpath, &hash);
        INFO(lfbnet_last_error(s));
        REQUIRE(st == LFBNET_OK);
        manifest = take(mpath);
        spec_hash = take(hash);

        char* summary = nullptr;
        st = lfbnet_train(s, train_config("fs", root + "/run_fs", 2).c_str(), nullptr,
                          nullptr, &summary);
        INFO(lfbnet_last_error(s));
        REQUIRE(st == LFBNET_OK);
        const json j = json::parse(take(summary));
        checkpoint = j.at("checkpoint").get<std::string>();

        report_test = root + "/report_test.csv";
        st = lfbnet_evaluate(s, checkpoint.c_str(), manifest.c_str(), "test", 0,
                             report_test.c_str(), 0, 0.0, 0.0, nullptr);
        INFO(lfbnet_last_error(s));
        REQUIRE(st == LFBNET_OK);
    }

    ~Fixture() {
        lfbnet_session_destroy(s);
        std::error_code ec;
        fsys::remove_all(root, ec);
    }
};

Fixture& fx() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("version and status names") {
    CHECK(std::string(lfbnet_version()) == "0.1.0");
    CHECK(std::string(lfbnet_status_name(LFBNET_OK)) == "ok");
    CHECK(std::string(lfbnet_status_name(LFBNET_ERROR_INVALID_ARGUMENT)) ==
          "invalid argument");
    CHECK(std::string(lfbnet_status_name(LFBNET_ERROR_IO)) == "i/o error");
    CHECK(std::string(lfbnet_status_name(LFBNET_ERROR_FORMAT)) == "format error");
    CHECK(std::string(lfbnet_status_name(LFBNET_ERROR_RUNTIME)) == "runtime error");
    CHECK(std::string(lfbnet_status_name(lfbnet_status(99))) == "unknown status");
}

TEST_CASE("session lifecycle and argument screening") {
    CHECK(std::string(lfbnet_last_error(nullptr)) == "null session");
    lfbnet_session* s = lfbnet_session_create();
    REQUIRE(s != nullptr);
    CHECK(std::string(lfbnet_last_error(s)).empty());

    // null required arguments are reported, and survive a null session too
    CHECK(lfbnet_generate_dataset(s, nullptr, 4, 0.5, 0.25, 0.25, "x", nullptr, nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK_FALSE(std::string(lfbnet_last_error(s)).empty());
    CHECK(lfbnet_generate_dataset(nullptr, nullptr, 4, 0.5, 0.25, 0.25, "x", nullptr,
                                  nullptr) == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(lfbnet_train(s, nullptr, nullptr, nullptr, nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(lfbnet_evaluate(s, nullptr, "m", "test", 0, "o", 0, 0, 0, nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(lfbnet_compare_reports(s, nullptr, "b", nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(lfbnet_ablate(s, nullptr, "fs", "7", nullptr, nullptr, nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    lfbnet_model* m = nullptr;
    CHECK(lfbnet_model_open(s, nullptr, &m) == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(m == nullptr);
    CHECK(lfbnet_model_infer(nullptr, nullptr, 0, 0, 0, nullptr, nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);

    // destroying a null model/session is a no-op, not a crash
    lfbnet_model_close(nullptr);
    lfbnet_session_destroy(nullptr);
    lfbnet_string_free(nullptr);
    lfbnet_session_destroy(s);
}

TEST_CASE("dataset generation through the C surface") {
    Fixture& f = fx();
    CHECK(fsys::exists(f.manifest));
    CHECK(f.manifest == f.root + "/data/manifest.txt");
    CHECK(f.spec_hash.size() == 16);
    CHECK(f.spec_hash.find_first_not_of("0123456789abcdef") == std::string::npos);

    // the same spec into a fresh directory gives the same content hash
    char* hash2 = nullptr;
    lfbnet_status st = lfbnet_generate_dataset(f.s, Fixture::spec_json(), 12, 0.6, 0.2, 0.2,
                                               (f.root + "/data2").c_str(), nullptr, &hash2);
    REQUIRE(st == LFBNET_OK);
    CHECK(std::string(lfbnet_last_error(f.s)).empty());  // success clears the slot
    CHECK(take(hash2) == f.spec_hash);

    // unparsable JSON (dataset spec and experiment config alike)
    CHECK(lfbnet_generate_dataset(f.s, "{not json", 8, 0.5, 0.25, 0.25,
                                  (f.root + "/bad1").c_str(), nullptr,
                                  nullptr) == LFBNET_ERROR_FORMAT);
    CHECK_FALSE(std::string(lfbnet_last_error(f.s)).empty());
    CHECK(lfbnet_train(f.s, "{not json", nullptr, nullptr, nullptr) == LFBNET_ERROR_FORMAT);

    // well-formed JSON describing an impossible spec
    CHECK(lfbnet_generate_dataset(f.s, R"({"image_size":20})", 8, 0.5, 0.25, 0.25,
                                  (f.root + "/bad2").c_str(), nullptr,
                                  nullptr) == LFBNET_ERROR_INVALID_ARGUMENT);

    // split fractions that do not sum to one
    CHECK(lfbnet_generate_dataset(f.s, Fixture::spec_json(), 8, 0.5, 0.5, 0.5,
                                  (f.root + "/bad3").c_str(), nullptr,
                                  nullptr) == LFBNET_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("training produces artifacts, a summary, and progress lines") {
    Fixture& f = fx();
    std::vector<std::string> lines;
    char* summary = nullptr;
    lfbnet_status st =
        lfbnet_train(f.s, f.train_config("fs", f.root + "/run_fs2", 2).c_str(),
                     collect_lines, &lines, &summary);
    INFO(lfbnet_last_error(f.s));
    REQUIRE(st == LFBNET_OK);

    const json j = json::parse(take(summary));
    CHECK(j.at("variant") == "fs");
    CHECK(j.at("cycles_run") == 2);
    CHECK(j.at("best_cycle").get<int>() >= 1);
    CHECK(j.at("best_val_loss").get<double>() > 0.0);
    CHECK(j.at("parameters").at("train") == j.at("parameters").at("test"));
    CHECK(j.at("final").contains("val_dice"));
    CHECK(fsys::exists(j.at("checkpoint").get<std::string>()));
    CHECK(fsys::exists(j.at("history").get<std::string>()));
    CHECK(fsys::exists(f.root + "/run_fs2/summary.json"));

    REQUIRE(lines.size() == 2);
    CHECK(lines[0].find("cycle 1") == 0);
    CHECK(lines[1].find("cycle 2") == 0);
    CHECK(lines[0].find("step1") != std::string::npos);
    CHECK(lines[0].find("step2") == std::string::npos);  // fs has no step 2
    CHECK(lines[0].find("val_dice") != std::string::npos);

    // the summary string equals the summary.json file (modulo trailing newline)
    std::ifstream in(f.root + "/run_fs2/summary.json");
    std::string file_text((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
    CHECK(json::parse(file_text) == j);
}

TEST_CASE("a progress callback returning zero stops after the current cycle") {
    Fixture& f = fx();
    int calls = 0;
    char* summary = nullptr;
    lfbnet_status st =
        lfbnet_train(f.s, f.train_config("fs", f.root + "/run_stop", 6).c_str(),
                     stop_immediately, &calls, &summary);
    INFO(lfbnet_last_error(f.s));
    REQUIRE(st == LFBNET_OK);
    CHECK(calls == 1);
    const json j = json::parse(take(summary));
    CHECK(j.at("cycles_run") == 1);
    CHECK(fsys::exists(j.at("checkpoint").get<std::string>()));  // best-so-far kept
}

TEST_CASE("evaluation writes a report CSV and enforces the feedback requirement") {
    Fixture& f = fx();
    CHECK(fsys::exists(f.report_test));

    char* summary = nullptr;
    lfbnet_status st = lfbnet_evaluate(f.s, f.checkpoint.c_str(), f.manifest.c_str(), "val",
                                       0, (f.root + "/report_val.csv").c_str(), 1, 1.1, 5.0,
                                       &summary);
    INFO(lfbnet_last_error(f.s));
    REQUIRE(st == LFBNET_OK);
    const json j = json::parse(take(summary));
    CHECK(j.at("thresholds").at("dice_min") == 1.1);
    REQUIRE(j.at("classes").is_array());
    CHECK(j.at("classes").size() == 3);  // cardiac: three foreground classes
    for (const json& c : j.at("classes")) {
        CHECK(c.at("n") == 3);  // 12 samples at 0.2 -> 3 in val
        CHECK(c.at("pct_dice_below") == 100.0);  // dice can never reach 1.1
        CHECK(c.at("dice").at("mean").get<double>() >= 0.0);
        CHECK(c.at("dice").at("mean").get<double>() <= 1.0);
    }

    // feedback iterations are impossible with a forward-only checkpoint
    st = lfbnet_evaluate(f.s, f.checkpoint.c_str(), f.manifest.c_str(), "test", 1,
                         (f.root + "/report_bad.csv").c_str(), 0, 0, 0, nullptr);
    CHECK(st == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(lfbnet_last_error(f.s)).find("feedback") != std::string::npos);

    // unknown split
    st = lfbnet_evaluate(f.s, f.checkpoint.c_str(), f.manifest.c_str(), "holdout", 0,
                         (f.root + "/report_bad.csv").c_str(), 0, 0, 0, nullptr);
    CHECK(st != LFBNET_OK);

    // missing checkpoint file
    st = lfbnet_evaluate(f.s, (f.root + "/nope.lfbc").c_str(), f.manifest.c_str(), "test", 0,
                         (f.root + "/report_bad.csv").c_str(), 0, 0, 0, nullptr);
    CHECK(st == LFBNET_ERROR_IO);
    CHECK_FALSE(std::string(lfbnet_last_error(f.s)).empty());
}

TEST_CASE("comparing a report against itself finds nothing significant") {
    Fixture& f = fx();
    char* summary = nullptr;
    lfbnet_status st =
        lfbnet_compare_reports(f.s, f.report_test.c_str(), f.report_test.c_str(), &summary);
    INFO(lfbnet_last_error(f.s));
    REQUIRE(st == LFBNET_OK);
    const json j = json::parse(take(summary));
    CHECK(j.at("any_significant") == false);
    CHECK(j.at("alpha") == 0.05);
    REQUIRE(j.at("tests").is_array());
    CHECK(j.at("tests").size() == 9);  // 3 classes x {dice, hd_mm, rvd}
    for (const json& t : j.at("tests")) {
        CHECK(t.at("significant") == false);
        CHECK(t.at("nonzero") == 0);  // identical reports: every difference is zero
    }

    // reports over different samples cannot be paired
    st = lfbnet_compare_reports(f.s, f.report_test.c_str(),
                                (f.root + "/report_val.csv").c_str(), nullptr);
    CHECK(st == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(lfbnet_last_error(f.s)).find("compare") != std::string::npos);
}

TEST_CASE("models load, describe themselves, and segment deterministically") {
    Fixture& f = fx();
    lfbnet_model* m = nullptr;
    REQUIRE(lfbnet_model_open(f.s, f.checkpoint.c_str(), &m) == LFBNET_OK);
    REQUIRE(m != nullptr);

    char* info = nullptr;
    REQUIRE(lfbnet_model_info(m, &info) == LFBNET_OK);
    const json j = json::parse(take(info));
    CHECK(j.at("variant") == "fs");
    CHECK(j.at("with_feedback") == false);
    CHECK(j.at("model").at("image_size") == 32);
    CHECK(j.at("model").at("classes") == 4);
    CHECK(j.at("normalization").at("stddev").get<double>() > 0.0);
    CHECK(j.at("parameters").at("train") == j.at("parameters").at("test"));
    CHECK(j.at("parameters").at("train").get<std::int64_t>() > 0);

    const int S = 32;
    std::vector<double> image(S * S);
    for (int i = 0; i < S * S; ++i) image[i] = 0.15 + 0.005 * (i % 97);
    std::vector<std::uint8_t> labels(S * S, 255);
    std::vector<double> probs(4 * S * S);
    REQUIRE(lfbnet_model_infer(m, image.data(), S, S, 0, labels.data(), probs.data()) ==
            LFBNET_OK);

    int bad_labels = 0, bad_sums = 0, label_mismatch = 0;
    for (int p = 0; p < S * S; ++p) {
        if (labels[p] >= 4) ++bad_labels;
        double sum = 0;
        int arg = 0;
        for (int c = 0; c < 4; ++c) {
            sum += probs[c * S * S + p];
            if (probs[c * S * S + p] > probs[arg * S * S + p]) arg = c;
        }
        if (std::abs(sum - 1.0) > 1e-9) ++bad_sums;
        if (arg != labels[p]) ++label_mismatch;
    }
    CHECK(bad_labels == 0);
    CHECK(bad_sums == 0);
    CHECK(label_mismatch == 0);

    // repeatable bit for bit, probabilities optional
    std::vector<std::uint8_t> labels2(S * S, 0);
    REQUIRE(lfbnet_model_infer(m, image.data(), S, S, 0, labels2.data(), nullptr) ==
            LFBNET_OK);
    CHECK(labels2 == labels);

    // wrong geometry names both shapes
    CHECK(lfbnet_model_infer(m, image.data(), 16, 16, 0, labels.data(), nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    {
        const std::string err = lfbnet_last_error(f.s);
        CHECK(err.find("(32,32)") != std::string::npos);
        CHECK(err.find("(16,16)") != std::string::npos);
    }

    // a forward-only model cannot run feedback iterations
    CHECK(lfbnet_model_infer(m, image.data(), S, S, 1, labels.data(), nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(lfbnet_model_infer(m, image.data(), S, S, -1, labels.data(), nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);

    // non-finite input is rejected before it reaches the network
    image[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK(lfbnet_model_infer(m, image.data(), S, S, 0, labels.data(), nullptr) ==
          LFBNET_ERROR_INVALID_ARGUMENT);

    lfbnet_model_close(m);

    // opening a non-checkpoint file is a format error, not a crash
    lfbnet_model* bad = nullptr;
    CHECK(lfbnet_model_open(f.s, f.manifest.c_str(), &bad) == LFBNET_ERROR_FORMAT);
    CHECK(bad == nullptr);
    // opening a missing file is an i/o error
    CHECK(lfbnet_model_open(f.s, (f.root + "/nope.lfbc").c_str(), &bad) == LFBNET_ERROR_IO);
    CHECK(bad == nullptr);
}

TEST_CASE("ablation sweeps variants and writes the comparative outputs") {
    Fixture& f = fx();

    // malformed lists are rejected up front
    CHECK(lfbnet_ablate(f.s, f.train_config("fs", f.root + "/abl", 1).c_str(), "fs,,lfb",
                        "7", nullptr, nullptr, nullptr) == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(lfbnet_ablate(f.s, f.train_config("fs", f.root + "/abl", 1).c_str(), "fs,lfb",
                        "7,x", nullptr, nullptr, nullptr) == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(lfbnet_last_error(f.s)).find("'x'") != std::string::npos);

    // a sweep needs something to compare against
    CHECK(lfbnet_ablate(f.s, f.train_config("fs", f.root + "/abl", 1).c_str(), "fs", "5",
                        nullptr, nullptr, nullptr) == LFBNET_ERROR_INVALID_ARGUMENT);
    CHECK(std::string(lfbnet_last_error(f.s)).find("two variants") != std::string::npos);

    std::vector<std::string> lines;
    char* summary = nullptr;
    lfbnet_status st = lfbnet_ablate(f.s, f.train_config("fs", f.root + "/abl", 1).c_str(),
                                     "fs,fs_star", "5", collect_lines, &lines, &summary);
    INFO(lfbnet_last_error(f.s));
    REQUIRE(st == LFBNET_OK);
    const json j = json::parse(take(summary));
    REQUIRE(j.at("table").is_array());
    REQUIRE(j.at("table").size() == 2);
    CHECK(j.at("table")[0].at("variant") == "fs");
    CHECK(j.at("table")[1].at("variant") == "fs_star");
    CHECK(j.at("table")[0].at("seed") == 5);
    CHECK(j.at("tests").size() == 2);  // dice and hd for the one variant pair
    for (const json& t : j.at("tests")) {
        CHECK(t.at("variant_a") == "fs");
        CHECK(t.at("variant_b") == "fs_star");
        CHECK(t.at("pairs") == 2);  // the test split has two samples
        CHECK(t.at("significant") == false);  // far too few pairs
    }
    CHECK(fsys::exists(j.at("table_csv").get<std::string>()));
    CHECK(fsys::exists(j.at("tests_csv").get<std::string>()));
    REQUIRE(lines.size() == 2);
    CHECK(lines[0].find("[r0_fs_s5]") == 0);  // run tag prefixes each line
    CHECK(lines[1].find("[r1_fs_star_s5]") == 0);
}

// Command-line front end over the lfbnet C API: dataset generation, training,
// evaluation, ablation sweeps, and paired report comparison.
//
// Exit codes: 0 success, 2 usage error, 1 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lfbnet/lfbnet.h"

namespace {

struct Session {
    lfbnet_session* s = lfbnet_session_create();
    ~Session() { lfbnet_session_destroy(s); }
};

struct OwnedString {
    char* p = nullptr;
    ~OwnedString() { lfbnet_string_free(p); }
};

int32_t print_progress(void*, const char* line) {
    std::printf("%s\n", line);
    std::fflush(stdout);
    return 1;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<double> parse_number_list(const std::string& text, std::size_t want,
                                      const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw CLI::ValidationError(what, "'" + tok + "' is not a number");
        }
    }
    if (out.size() != want)
        throw CLI::ValidationError(what, "expected " + std::to_string(want) +
                                             " comma-separated numbers, got " +
                                             std::to_string(out.size()));
    return out;
}

int report_status(const Session& session, lfbnet_status status) {
    if (status == LFBNET_OK) return 0;
    std::fprintf(stderr, "error (%s): %s\n", lfbnet_status_name(status),
                 lfbnet_last_error(session.s));
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"lfbnet: latent-feedback encoder-decoder segmentation pipeline"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "GEMM thread count (sets LFBNET_THREADS)")
        ->check(CLI::PositiveNumber);

    Session session;
    std::function<int()> action;

    // gen-data -------------------------------------------------------------
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic phantom dataset");
    std::string gen_spec, gen_out, gen_split = "0.7,0.2,0.1";
    int gen_n = 0;
    gen->add_option("--spec", gen_spec, "Phantom spec JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    gen->add_option("--n", gen_n, "Number of samples")->required()->check(CLI::PositiveNumber);
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--split", gen_split, "Fractions train,test,val (default 0.7,0.2,0.1)");
    gen->callback([&] {
        action = [&]() -> int {
            const std::vector<double> fr = parse_number_list(gen_split, 3, "--split");
            if (std::abs(fr[0] + fr[1] + fr[2] - 1.0) > 1e-9)
                throw CLI::ValidationError("--split", "fractions must sum to 1");
            OwnedString manifest, hash;
            const lfbnet_status st =
                lfbnet_generate_dataset(session.s, read_file(gen_spec).c_str(), gen_n, fr[0],
                                        fr[1], fr[2], gen_out.c_str(), &manifest.p, &hash.p);
            if (const int rc = report_status(session, st)) return rc;
            std::printf("spec_hash %s\nmanifest %s\n", hash.p, manifest.p);
            return 0;
        };
    });

    // train ------------------------------------------------------------------
    auto* train = app.add_subcommand("train", "Train one variant per an experiment config");
    std::string train_config;
    train->add_option("--config", train_config, "Experiment config JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    train->callback([&] {
        action = [&]() -> int {
            OwnedString summary;
            const lfbnet_status st = lfbnet_train(session.s, read_file(train_config).c_str(),
                                                  print_progress, nullptr, &summary.p);
            if (const int rc = report_status(session, st)) return rc;
            std::printf("%s\n", summary.p);
            return 0;
        };
    });

    // eval -------------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    std::string ev_ckpt, ev_data, ev_split = "test", ev_out, ev_thresholds;
    int ev_iters = 1;
    eval->add_option("--checkpoint", ev_ckpt, "Checkpoint file (.lfbc)")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--data", ev_data, "Dataset manifest")->required()->check(CLI::ExistingFile);
    eval->add_option("--split", ev_split, "Split to evaluate (default test)");
    eval->add_option("--iterations", ev_iters, "Feedback-loop passes (default 1)")
        ->check(CLI::NonNegativeNumber);
    eval->add_option("--out", ev_out, "Report CSV path (default report_<split>_it<k>.csv)");
    eval->add_option("--thresholds", ev_thresholds,
                     "dice_min,hd_max_mm: flag rows below/above the worst-case thresholds");
    eval->callback([&] {
        action = [&]() -> int {
            int32_t with_thr = 0;
            double dice_min = 0.0, hd_max = 0.0;
            if (!ev_thresholds.empty()) {
                const std::vector<double> t = parse_number_list(ev_thresholds, 2, "--thresholds");
                with_thr = 1;
                dice_min = t[0];
                hd_max = t[1];
            }
            const std::string out = ev_out.empty()
                                        ? "report_" + ev_split + "_it" +
                                              std::to_string(ev_iters) + ".csv"
                                        : ev_out;
            OwnedString summary;
            const lfbnet_status st =
                lfbnet_evaluate(session.s, ev_ckpt.c_str(), ev_data.c_str(), ev_split.c_str(),
                                ev_iters, out.c_str(), with_thr, dice_min, hd_max, &summary.p);
            if (const int rc = report_status(session, st)) return rc;
            std::printf("report %s\n%s\n", out.c_str(), summary.p);
            return 0;
        };
    });

    // ablate -----------------------------------------------------------------
    auto* ablate = app.add_subcommand(
        "ablate", "Train and evaluate several variants/seeds on one dataset");
    std::string ab_config, ab_variants = "fs,fs_star,lfb", ab_seeds = "7,11,13";
    ablate->add_option("--config", ab_config, "Experiment config JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    ablate->add_option("--variants", ab_variants, "Comma list (default fs,fs_star,lfb)");
    ablate->add_option("--seeds", ab_seeds, "Comma list of seeds (default 7,11,13)");
    ablate->callback([&] {
        action = [&]() -> int {
            OwnedString summary;
            const lfbnet_status st =
                lfbnet_ablate(session.s, read_file(ab_config).c_str(), ab_variants.c_str(),
                              ab_seeds.c_str(), print_progress, nullptr, &summary.p);
            if (const int rc = report_status(session, st)) return rc;
            std::printf("%s\n", summary.p);
            return 0;
        };
    });

    // compare ----------------------------------------------------------------
    auto* compare = app.add_subcommand("compare", "Paired Wilcoxon tests between two reports");
    std::vector<std::string> cmp_reports;
    compare->add_option("--report", cmp_reports, "Report CSV (give exactly twice)")
        ->required()
        ->expected(2)
        ->check(CLI::ExistingFile);
    compare->callback([&] {
        action = [&]() -> int {
            OwnedString summary;
            const lfbnet_status st = lfbnet_compare_reports(session.s, cmp_reports[0].c_str(),
                                                            cmp_reports[1].c_str(), &summary.p);
            if (const int rc = report_status(session, st)) return rc;
            std::printf("%s\n", summary.p);
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return 2;
    }

    if (!session.s) {
        std::fprintf(stderr, "error: cannot create session\n");
        return 1;
    }
    if (threads > 0) setenv("LFBNET_THREADS", std::to_string(threads).c_str(), 1);

    try {
        return action ? action() : 2;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

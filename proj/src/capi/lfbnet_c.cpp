#include "lfbnet/lfbnet.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/experiment.hpp"

struct lfbnet_session {
    std::string last_error;
};

struct lfbnet_model {
    lfbnet_session* owner = nullptr;
    lfb::CheckpointMeta meta;
    lfb::Systems systems;
};

namespace {

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (!p) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

lfbnet_status fail(lfbnet_session* s, lfbnet_status code, const std::string& msg) {
    if (s) s->last_error = msg;
    return code;
}

template <typename Fn>
lfbnet_status guarded(lfbnet_session* s, Fn&& fn) {
    if (!s) return LFBNET_ERROR_INVALID_ARGUMENT;
    try {
        fn();
        s->last_error.clear();
        return LFBNET_OK;
    } catch (const nlohmann::json::exception& e) {
        return fail(s, LFBNET_ERROR_FORMAT, e.what());
    } catch (const lfb::format_error& e) {
        return fail(s, LFBNET_ERROR_FORMAT, e.what());
    } catch (const lfb::io_error& e) {
        return fail(s, LFBNET_ERROR_IO, e.what());
    } catch (const std::invalid_argument& e) {
        return fail(s, LFBNET_ERROR_INVALID_ARGUMENT, e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(s, LFBNET_ERROR_IO, e.what());
    } catch (const std::system_error& e) {
        return fail(s, LFBNET_ERROR_IO, e.what());
    } catch (const std::exception& e) {
        return fail(s, LFBNET_ERROR_RUNTIME, e.what());
    } catch (...) {
        return fail(s, LFBNET_ERROR_RUNTIME, "unknown error");
    }
}

std::vector<std::string> split_csv_list(const std::string& text, const char* what) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string tok =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        lfb::require(!tok.empty(), std::string("empty entry in ") + what + " list");
        out.push_back(tok);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split_csv_list(text, "seeds")) {
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(tok, &used, 10);
        } catch (const std::exception&) {
            used = 0;
        }
        lfb::require(used == tok.size(), "seeds: '" + tok + "' is not an unsigned integer");
        out.push_back(v);
    }
    return out;
}

std::string cycle_line(const lfb::CycleStats& cs, bool lfb_variant) {
    char buf[256];
    if (lfb_variant)
        std::snprintf(buf, sizeof buf,
                      "cycle %d step1 %.6g step2 %.6g step3 %.6g val_loss %.6g val_dice %.4f",
                      cs.cycle, cs.step1_loss, cs.step2_loss, cs.step3_loss, cs.val_loss,
                      cs.val_dice);
    else
        std::snprintf(buf, sizeof buf, "cycle %d step1 %.6g val_loss %.6g val_dice %.4f",
                      cs.cycle, cs.step1_loss, cs.val_loss, cs.val_dice);
    return buf;
}

}  // namespace

extern "C" {

const char* lfbnet_version(void) { return "0.1.0"; }

const char* lfbnet_status_name(lfbnet_status status) {
    switch (status) {
        case LFBNET_OK: return "ok";
        case LFBNET_ERROR_INVALID_ARGUMENT: return "invalid argument";
        case LFBNET_ERROR_IO: return "i/o error";
        case LFBNET_ERROR_FORMAT: return "format error";
        case LFBNET_ERROR_RUNTIME: return "runtime error";
    }
    return "unknown status";
}

lfbnet_session* lfbnet_session_create(void) { return new (std::nothrow) lfbnet_session(); }

void lfbnet_session_destroy(lfbnet_session* session) { delete session; }

const char* lfbnet_last_error(const lfbnet_session* session) {
    return session ? session->last_error.c_str() : "null session";
}

void lfbnet_string_free(char* str) { std::free(str); }

lfbnet_status lfbnet_generate_dataset(lfbnet_session* session, const char* spec_json,
                                      int32_t n, double f_train, double f_test, double f_val,
                                      const char* out_dir, char** out_manifest_path,
                                      char** out_spec_hash) {
    if (!spec_json || !out_dir)
        return fail(session, LFBNET_ERROR_INVALID_ARGUMENT, "spec_json and out_dir are required");
    return guarded(session, [&] {
        const lfb::PhantomSpec spec = lfb::PhantomSpec::from_json(spec_json);
        lfb::generate_dataset(spec, n, f_train, f_test, f_val, out_dir);
        if (out_manifest_path)
            *out_manifest_path =
                dup_string((std::filesystem::path(out_dir) / "manifest.txt").string());
        if (out_spec_hash) *out_spec_hash = dup_string(spec.hash());
    });
}

lfbnet_status lfbnet_train(lfbnet_session* session, const char* config_json,
                           lfbnet_progress_fn progress, void* user_data,
                           char** out_summary_json) {
    if (!config_json) return fail(session, LFBNET_ERROR_INVALID_ARGUMENT, "config_json is required");
    return guarded(session, [&] {
        const lfb::ExperimentConfig cfg = lfb::ExperimentConfig::from_json_text(config_json);
        lfb::ProgressFn fn;
        if (progress) {
            const bool is_lfb = cfg.variant == "lfb";
            fn = [progress, user_data, is_lfb](const lfb::CycleStats& cs) {
                return progress(user_data, cycle_line(cs, is_lfb).c_str()) != 0;
            };
        }
        const lfb::TrainArtifacts art = lfb::run_train(cfg, fn);
        if (out_summary_json) *out_summary_json = dup_string(art.summary_json);
    });
}

lfbnet_status lfbnet_evaluate(lfbnet_session* session, const char* checkpoint_path,
                              const char* manifest_path, const char* split, int32_t iterations,
                              const char* out_csv_path, int32_t with_thresholds,
                              double dice_min, double hd_max_mm, char** out_summary_json) {
    if (!checkpoint_path || !manifest_path || !out_csv_path)
        return fail(session, LFBNET_ERROR_INVALID_ARGUMENT,
                    "checkpoint_path, manifest_path, and out_csv_path are required");
    return guarded(session, [&] {
        lfb::EvalRequest req;
        req.checkpoint = checkpoint_path;
        req.manifest = manifest_path;
        req.split = split ? split : "test";
        req.iterations = iterations;
        req.out_csv = out_csv_path;
        req.thresholds.enabled = with_thresholds != 0;
        req.thresholds.dice_min = dice_min;
        req.thresholds.hd_max = hd_max_mm;
        const lfb::Report rep = lfb::run_eval(req);
        if (out_summary_json) *out_summary_json = dup_string(rep.summary_json());
    });
}

lfbnet_status lfbnet_ablate(lfbnet_session* session, const char* config_json,
                            const char* variants_csv, const char* seeds_csv,
                            lfbnet_progress_fn progress, void* user_data,
                            char** out_summary_json) {
    if (!config_json || !variants_csv || !seeds_csv)
        return fail(session, LFBNET_ERROR_INVALID_ARGUMENT,
                    "config_json, variants_csv, and seeds_csv are required");
    return guarded(session, [&] {
        const lfb::ExperimentConfig cfg = lfb::ExperimentConfig::from_json_text(config_json);
        const std::vector<std::string> variants = split_csv_list(variants_csv, "variants");
        const std::vector<std::uint64_t> seeds = parse_seeds(seeds_csv);
        lfb::AblateProgressFn fn;
        if (progress) {
            fn = [progress, user_data](const std::string& run, const lfb::CycleStats& cs) {
                const std::string line =
                    "[" + run + "] " + cycle_line(cs, run.find("_lfb_") != std::string::npos);
                return progress(user_data, line.c_str()) != 0;
            };
        }
        const lfb::AblationOutputs out = lfb::run_ablate(cfg, variants, seeds, fn);
        if (out_summary_json) *out_summary_json = dup_string(out.summary_json);
    });
}

lfbnet_status lfbnet_compare_reports(lfbnet_session* session, const char* report_a_path,
                                     const char* report_b_path, char** out_summary_json) {
    if (!report_a_path || !report_b_path)
        return fail(session, LFBNET_ERROR_INVALID_ARGUMENT, "both report paths are required");
    return guarded(session, [&] {
        const std::string summary = lfb::run_compare(report_a_path, report_b_path);
        if (out_summary_json) *out_summary_json = dup_string(summary);
    });
}

lfbnet_status lfbnet_model_open(lfbnet_session* session, const char* checkpoint_path,
                                lfbnet_model** out_model) {
    if (!checkpoint_path || !out_model)
        return fail(session, LFBNET_ERROR_INVALID_ARGUMENT,
                    "checkpoint_path and out_model are required");
    *out_model = nullptr;
    return guarded(session, [&] {
        lfb::LoadedCheckpoint lc = lfb::load_checkpoint(checkpoint_path);
        auto* m = new lfbnet_model;
        m->owner = session;
        m->meta = std::move(lc.meta);
        m->systems = std::move(lc.systems);
        *out_model = m;
    });
}

void lfbnet_model_close(lfbnet_model* model) { delete model; }

lfbnet_status lfbnet_model_info(lfbnet_model* model, char** out_info_json) {
    if (!model) return LFBNET_ERROR_INVALID_ARGUMENT;
    if (!out_info_json)
        return fail(model->owner, LFBNET_ERROR_INVALID_ARGUMENT, "out_info_json is required");
    return guarded(model->owner, [&] {
        nlohmann::json j = nlohmann::json::parse(lfb::checkpoint_meta_json(model->meta));
        const auto& fwd_ps = model->systems.forward->params();
        const lfb::FeedbackSystem* fb = model->systems.feedback.get();
        j["parameters"] = {
            {"train", fwd_ps.parameter_count() + (fb ? fb->params().parameter_count() : 0)},
            {"test",
             fwd_ps.parameter_count() + (fb ? fb->params().parameter_count("F_e/") : 0)}};
        *out_info_json = dup_string(j.dump(2));
    });
}

lfbnet_status lfbnet_model_infer(lfbnet_model* model, const double* image, int32_t height,
                                 int32_t width, int32_t iterations, uint8_t* out_labels,
                                 double* out_probabilities) {
    if (!model) return LFBNET_ERROR_INVALID_ARGUMENT;
    if (!image || !out_labels)
        return fail(model->owner, LFBNET_ERROR_INVALID_ARGUMENT,
                    "image and out_labels are required");
    return guarded(model->owner, [&] {
        const int S = model->meta.model.image_size;
        lfb::require(height == S && width == S,
                     "model expects (" + std::to_string(S) + "," + std::to_string(S) +
                         ") inputs, got (" + std::to_string(height) + "," +
                         std::to_string(width) + ")");
        lfb::require(iterations >= 0, "iterations must be >= 0");
        lfb::require(iterations == 0 || model->systems.feedback != nullptr,
                     "iterations > 0 but the checkpoint has no feedback system");

        lfb::Tensor4 x({1, 1, height, width});
        const double mean = model->meta.norm.mean, sd = model->meta.norm.stddev;
        for (std::size_t i = 0; i < x.size(); ++i) x.v[i] = (image[i] - mean) / sd;
        lfb::require(x.all_finite(), "image contains non-finite values");

        const lfb::Tensor4 probs = lfb::infer(*model->systems.forward,
                                              model->systems.feedback.get(), x, iterations);
        const lfb::LabelMap labels = lfb::probs_to_labels(probs);
        std::memcpy(out_labels, labels.v.data(), labels.v.size());
        if (out_probabilities)
            std::memcpy(out_probabilities, probs.data(), probs.size() * sizeof(double));
    });
}

}  // extern "C"

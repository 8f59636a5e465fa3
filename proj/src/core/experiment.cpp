#include "core/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "core/checkpoint.hpp"
#include "core/stats.hpp"

namespace lfb {

namespace fsys = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc | std::ios::binary);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << text;
    f.flush();
    if (!f.good()) throw io_error("write failed: " + path);
}

void check_variant(const std::string& v) {
    require(v == "fs" || v == "fs_star" || v == "lfb",
            "config: variant must be fs|fs_star|lfb, got '" + v + "'");
}

ModelConfig parse_model(const json& jm, const std::string& variant, bool& use_se_explicit) {
    ModelConfig m = model_config_from_json(jm.dump());
    use_se_explicit = jm.contains("use_se");
    if (variant == "fs_star") {
        require(!use_se_explicit || !m.use_se, "config: variant fs_star requires use_se=false");
        m.use_se = false;
    } else if (variant == "fs") {
        require(!use_se_explicit || m.use_se, "config: variant fs requires use_se=true");
        m.use_se = true;
    }
    m.validate();
    return m;
}

TrainConfig parse_train(const json& jt, const std::string& variant) {
    static const std::set<std::string> allowed = {
        "batch_size",  "learning_rate",           "max_cycles", "patience",
        "val_feedback_iterations", "seed",        "class_weights"};
    require(jt.is_object(), "config: train is not a JSON object");
    for (const auto& item : jt.items())
        require(allowed.count(item.key()) > 0, "config: unknown train key '" + item.key() + "'");
    TrainConfig t;
    t.variant = variant;
    auto get = [&](const char* k, auto& dst) {
        if (jt.contains(k)) dst = jt.at(k).get<std::decay_t<decltype(dst)>>();
    };
    get("batch_size", t.batch_size);
    get("learning_rate", t.learning_rate);
    get("max_cycles", t.max_cycles);
    get("patience", t.patience);
    get("val_feedback_iterations", t.val_feedback_iterations);
    get("seed", t.seed);
    get("class_weights", t.class_weights);
    if (variant != "lfb") {
        require(t.val_feedback_iterations == 0 || !jt.contains("val_feedback_iterations"),
                "config: step-1-only variants do not run the feedback loop");
        t.val_feedback_iterations = 0;
    }
    t.validate();
    return t;
}

DatasetSource parse_dataset(const json& jd) {
    static const std::set<std::string> allowed = {"manifest", "phantom", "n", "split"};
    require(jd.is_object(), "config: dataset is not a JSON object");
    for (const auto& item : jd.items())
        require(allowed.count(item.key()) > 0,
                "config: unknown dataset key '" + item.key() + "'");
    DatasetSource d;
    if (jd.contains("manifest")) {
        require(!jd.contains("phantom") && !jd.contains("n") && !jd.contains("split"),
                "config: dataset takes either a manifest or a phantom block, not both");
        d.generate = false;
        d.manifest = jd.at("manifest").get<std::string>();
        require(!d.manifest.empty(), "config: empty dataset manifest path");
        return d;
    }
    d.generate = true;
    if (jd.contains("phantom")) d.phantom = PhantomSpec::from_json(jd.at("phantom").dump());
    if (jd.contains("n")) d.n = jd.at("n").get<int>();
    require(d.n >= 3, "config: dataset n must be >= 3");
    if (jd.contains("split")) {
        const auto arr = jd.at("split").get<std::vector<double>>();
        require(arr.size() == 3, "config: split must be [train, test, val]");
        d.f_train = arr[0];
        d.f_test = arr[1];
        d.f_val = arr[2];
    }
    return d;
}

// Effective model for a loaded dataset: underived fields come from the data.
ModelConfig resolved_model(const ExperimentConfig& cfg, const std::vector<Sample>& train,
                           const std::vector<Sample>& val) {
    ModelConfig m = cfg.model;
    require(!train.empty() && !val.empty(), "experiment: empty train or val split");
    const int size = train[0].image.shape.h;
    if (cfg.data.generate) {
        if (!cfg.image_size_explicit) m.image_size = cfg.data.phantom.image_size;
        if (!cfg.classes_explicit) m.classes = cfg.data.phantom.n_classes();
    } else {
        if (!cfg.image_size_explicit) m.image_size = size;
        if (!cfg.classes_explicit) {
            int mx = 2;
            for (const auto* split : {&train, &val})
                for (const Sample& s : *split)
                    for (std::uint8_t v : s.labels.v) mx = std::max(mx, int(v) + 1);
            m.classes = mx;
        }
    }
    require(m.image_size == size,
            "experiment: model image_size " + std::to_string(m.image_size) +
                " but dataset samples are " + std::to_string(size) + "x" +
                std::to_string(train[0].image.shape.w));
    m.validate();
    return m;
}

std::string resolve_dataset(const ExperimentConfig& cfg) {
    if (!cfg.data.generate) return cfg.data.manifest;
    const fsys::path dir = fsys::path(cfg.output_dir) / "dataset";
    generate_dataset(cfg.data.phantom, cfg.data.n, cfg.data.f_train, cfg.data.f_test,
                     cfg.data.f_val, dir.string());
    return (dir / "manifest.txt").string();
}

void write_history(const std::string& path, const std::string& variant,
                   const std::vector<CycleStats>& history) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + path);
    f << "cycle,step,loss,val_loss,val_dice\n";
    for (const CycleStats& cs : history) {
        if (variant == "lfb") {
            f << cs.cycle << ",1," << fmt_g(cs.step1_loss) << ",,\n";
            f << cs.cycle << ",2," << fmt_g(cs.step2_loss) << ",,\n";
            f << cs.cycle << ",3," << fmt_g(cs.step3_loss) << ',' << fmt_g(cs.val_loss) << ','
              << fmt_g(cs.val_dice) << "\n";
        } else {
            f << cs.cycle << ",1," << fmt_g(cs.step1_loss) << ',' << fmt_g(cs.val_loss) << ','
              << fmt_g(cs.val_dice) << "\n";
        }
    }
    f.flush();
    if (!f.good()) throw io_error("write failed: " + path);
}

TrainArtifacts train_one(const ExperimentConfig& cfg, const std::string& manifest,
                         const std::string& run_dir, const ProgressFn& progress) {
    require(cfg.train.variant == cfg.variant, "experiment: variant mismatch in config");
    fsys::create_directories(run_dir);
    std::vector<Sample> train_samples = load_split(manifest, "train");
    std::vector<Sample> val_samples = load_split(manifest, "val");
    const ModelConfig mc = resolved_model(cfg, train_samples, val_samples);

    Trainer trainer(mc, cfg.train, std::move(train_samples), std::move(val_samples));
    TrainArtifacts art;
    art.manifest_path = manifest;
    art.result = trainer.run(progress);

    art.checkpoint_path = (fsys::path(run_dir) / "checkpoint.lfbc").string();
    save_checkpoint(art.checkpoint_path, trainer.checkpoint_meta(art.result.best_cycle),
                    trainer.forward_system(), trainer.feedback_system());
    art.history_path = (fsys::path(run_dir) / "history.csv").string();
    write_history(art.history_path, cfg.variant, art.result.history);

    const auto& fwd_ps = trainer.forward_system().params();
    const FeedbackSystem* fb = trainer.feedback_system();
    const std::size_t n_train =
        fwd_ps.parameter_count() + (fb ? fb->params().parameter_count() : 0);
    const std::size_t n_test =
        fwd_ps.parameter_count() + (fb ? fb->params().parameter_count("F_e/") : 0);

    json s;
    s["variant"] = cfg.variant;
    s["cycles_run"] = art.result.cycles_run;
    s["best_cycle"] = art.result.best_cycle;
    s["best_val_loss"] = art.result.best_val_loss;
    s["converged"] = art.result.converged;
    s["checkpoint"] = art.checkpoint_path;
    s["history"] = art.history_path;
    s["manifest"] = manifest;
    s["parameters"] = {{"train", n_train}, {"test", n_test}};
    if (!art.result.history.empty()) {
        const CycleStats& last = art.result.history.back();
        s["final"] = {{"val_loss", last.val_loss}, {"val_dice", last.val_dice}};
    }
    art.summary_json = s.dump(2);
    art.summary_path = (fsys::path(run_dir) / "summary.json").string();
    write_text_file(art.summary_path, art.summary_json + "\n");
    return art;
}

struct PairedTest {
    int pairs = 0;    // matched pairs with both values defined
    int nonzero = 0;  // pairs with a nonzero difference
    double statistic = std::numeric_limits<double>::quiet_NaN();
    double p = std::numeric_limits<double>::quiet_NaN();
    double mean_a = std::numeric_limits<double>::quiet_NaN();
    double mean_b = std::numeric_limits<double>::quiet_NaN();
    bool significant = false;
    std::string note;
};

PairedTest paired_test(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size(), "paired test: length mismatch");
    std::vector<double> va, vb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) || std::isnan(b[i])) continue;
        va.push_back(a[i]);
        vb.push_back(b[i]);
    }
    PairedTest t;
    t.pairs = int(va.size());
    if (va.empty()) {
        t.note = "no defined pairs";
        return t;
    }
    t.mean_a = mean_of(va);
    t.mean_b = mean_of(vb);
    for (std::size_t i = 0; i < va.size(); ++i)
        if (va[i] != vb[i]) ++t.nonzero;
    if (t.nonzero == 0) {
        t.p = 1.0;  // identical observations: no evidence of any difference
        t.note = "all differences zero";
        return t;
    }
    try {
        const WilcoxonResult w = wilcoxon_signed_rank(va, vb);
        t.statistic = w.statistic;
        t.p = w.p_value;
        t.note = w.exact ? "exact" : "normal approximation";
        t.significant = t.p < 0.05;
    } catch (const InsufficientData&) {
        t.note = "insufficient data: fewer than 5 nonzero differences";
    }
    return t;
}

json paired_test_json(const PairedTest& t) {
    json j;
    j["pairs"] = t.pairs;
    j["nonzero"] = t.nonzero;
    j["statistic"] = std::isnan(t.statistic) ? json(nullptr) : json(t.statistic);
    j["p_value"] = std::isnan(t.p) ? json(nullptr) : json(t.p);
    j["mean_a"] = std::isnan(t.mean_a) ? json(nullptr) : json(t.mean_a);
    j["mean_b"] = std::isnan(t.mean_b) ? json(nullptr) : json(t.mean_b);
    j["significant"] = t.significant;
    j["note"] = t.note;
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    static const std::set<std::string> allowed = {"variant", "output_dir", "model", "train",
                                                  "dataset"};
    ExperimentConfig cfg;
    try {
        const json j = json::parse(text);
        require(j.is_object(), "config: not a JSON object");
        for (const auto& item : j.items())
            require(allowed.count(item.key()) > 0, "config: unknown key '" + item.key() + "'");
        cfg.variant = j.value("variant", std::string("lfb"));
        check_variant(cfg.variant);
        cfg.output_dir = j.value("output_dir", std::string("run"));
        require(!cfg.output_dir.empty(), "config: empty output_dir");
        const json jm = j.value("model", json::object());
        bool use_se_explicit = false;
        cfg.model = parse_model(jm, cfg.variant, use_se_explicit);
        cfg.classes_explicit = jm.contains("classes");
        cfg.image_size_explicit = jm.contains("image_size");
        cfg.train = parse_train(j.value("train", json::object()), cfg.variant);
        cfg.data = parse_dataset(j.value("dataset", json::object()));
    } catch (const json::exception& e) {
        throw format_error(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_json_text(read_text_file(path));
}

TrainArtifacts run_train(const ExperimentConfig& cfg, const ProgressFn& progress) {
    fsys::create_directories(cfg.output_dir);
    const std::string manifest = resolve_dataset(cfg);
    return train_one(cfg, manifest, cfg.output_dir, progress);
}

Report run_eval(const EvalRequest& req) {
    require(!req.checkpoint.empty() && !req.manifest.empty() && !req.out_csv.empty(),
            "eval: checkpoint, manifest, and output path are required");
    require(req.iterations >= 0, "eval: iterations must be >= 0");
    LoadedCheckpoint lc = load_checkpoint(req.checkpoint);
    require(req.iterations == 0 || lc.meta.with_feedback,
            "eval: iterations > 0 but the checkpoint has no feedback system");

    std::vector<Sample> samples = load_split(req.manifest, req.split);
    require(!samples.empty(), "eval: split '" + req.split + "' is empty in " + req.manifest);
    const int S = lc.meta.model.image_size;
    for (const Sample& s : samples)
        require(s.image.shape.h == S && s.image.shape.w == S,
                "eval: checkpoint expects (" + std::to_string(S) + "," + std::to_string(S) +
                    ") but sample " + s.id + " is (" + std::to_string(s.image.shape.h) + "," +
                    std::to_string(s.image.shape.w) + ")");
    normalize(samples, lc.meta.norm);

    std::vector<LabelMap> preds;
    preds.reserve(samples.size());
    for (const Sample& s : samples)
        preds.push_back(probs_to_labels(
            infer(*lc.systems.forward, lc.systems.feedback.get(), s.image, req.iterations)));

    Report rep = evaluate_predictions(samples, preds, lc.meta.model.classes, req.thresholds);
    rep.save_csv(req.out_csv);
    return rep;
}

AblationOutputs run_ablate(const ExperimentConfig& base, const std::vector<std::string>& variants,
                           const std::vector<std::uint64_t>& seeds,
                           const AblateProgressFn& progress) {
    require(variants.size() >= 2, "ablate: need at least two variants");
    for (const auto& v : variants) check_variant(v);
    require(!seeds.empty(), "ablate: need at least one seed");

    fsys::create_directories(base.output_dir);
    const std::string manifest = resolve_dataset(base);
    const std::vector<Sample> test_raw = load_split(manifest, "test");
    require(!test_raw.empty(), "ablate: test split is empty in " + manifest);

    struct RunOutcome {
        std::string label;
        std::string variant;
        std::uint64_t seed = 0;
        TrainArtifacts art;
        std::vector<double> sample_dice, sample_hd;
        double mean_rvd = std::numeric_limits<double>::quiet_NaN();
        long violations = 0, holes = 0, components = 0;
    };
    // runs[vi][si]; per-sample arrays concatenate over seeds in this order
    std::vector<std::vector<RunOutcome>> runs(variants.size());

    int classes = 0;
    std::vector<PlausibilityReport> ref_plaus;

    for (std::size_t vi = 0; vi < variants.size(); ++vi) {
        const std::string& variant = variants[vi];
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            const std::uint64_t seed = seeds[si];
            ExperimentConfig c = base;
            c.variant = variant;
            c.train.variant = variant;
            c.train.seed = seed;
            c.model.use_se = variant != "fs_star";
            c.train.val_feedback_iterations =
                variant == "lfb" ? std::max(1, base.train.val_feedback_iterations) : 0;

            RunOutcome run;
            run.variant = variant;
            run.seed = seed;
            run.label = "r" + std::to_string(vi) + "_" + variant + "_s" + std::to_string(seed);
            const std::string run_dir =
                (fsys::path(base.output_dir) / "ablate" / run.label).string();
            ProgressFn wrapped;
            if (progress) {
                const std::string label = run.label;
                wrapped = [&progress, label](const CycleStats& cs) { return progress(label, cs); };
            }
            run.art = train_one(c, manifest, run_dir, wrapped);

            LoadedCheckpoint lc = load_checkpoint(run.art.checkpoint_path);
            classes = lc.meta.model.classes;
            if (ref_plaus.empty())
                for (const Sample& s : test_raw)
                    ref_plaus.push_back(plausibility_check(s.labels, std::max(classes, 2)));

            std::vector<Sample> test = test_raw;
            normalize(test, lc.meta.norm);
            const int iters = variant == "lfb" ? c.train.val_feedback_iterations : 0;
            std::vector<LabelMap> preds;
            preds.reserve(test.size());
            for (const Sample& s : test)
                preds.push_back(probs_to_labels(
                    infer(*lc.systems.forward, lc.systems.feedback.get(), s.image, iters)));

            Report rep = evaluate_predictions(test, preds, classes);
            rep.save_csv((fsys::path(run_dir) / "report_test.csv").string());

            std::vector<double> rvds;
            for (const ReportRow& r : rep.rows) {
                if (!std::isnan(r.rvd)) rvds.push_back(r.rvd);
                run.holes += r.holes;
                run.components += r.components;
            }
            if (!rvds.empty()) run.mean_rvd = mean_of(rvds);
            const int fg = std::max(classes - 1, 1);
            for (std::size_t i = 0; i < test.size(); ++i) {
                run.sample_dice.push_back(
                    mean_foreground_dice(preds[i], test_raw[i].labels, classes));
                run.sample_hd.push_back(mean_foreground_hd(preds[i], test_raw[i].labels, classes));
                const PlausibilityReport pl = plausibility_check(preds[i], std::max(classes, 2));
                for (int k = 1; k <= fg; ++k) {
                    run.violations += std::max(0, pl.holes[k] - ref_plaus[i].holes[k]);
                    run.violations += std::max(0, pl.components[k] - ref_plaus[i].components[k]);
                }
            }
            runs[vi].push_back(std::move(run));
        }
    }

    AblationOutputs out;
    json summary;
    summary["manifest"] = manifest;
    summary["seeds"] = seeds;

    // side-by-side table, one row per (variant, seed)
    out.table_path = (fsys::path(base.output_dir) / "ablation_table.csv").string();
    {
        std::ofstream f(out.table_path, std::ios::trunc);
        if (!f) throw io_error("cannot open for writing: " + out.table_path);
        f << "variant,seed,mean_dice,mean_hd,mean_rvd,violations,holes,components,"
             "cycles_run,best_cycle,best_val_loss\n";
        summary["table"] = json::array();
        for (const auto& vruns : runs)
            for (const RunOutcome& run : vruns) {
                std::vector<double> hds;
                for (double h : run.sample_hd)
                    if (!std::isnan(h)) hds.push_back(h);
                const double mean_dice = mean_of(run.sample_dice);
                const double mean_hd = hds.empty()
                                           ? std::numeric_limits<double>::quiet_NaN()
                                           : mean_of(hds);
                f << run.variant << ',' << run.seed << ',' << fmt_g(mean_dice) << ','
                  << fmt_g(mean_hd) << ',' << fmt_g(run.mean_rvd) << ',' << run.violations << ','
                  << run.holes << ',' << run.components << ',' << run.art.result.cycles_run << ','
                  << run.art.result.best_cycle << ',' << fmt_g(run.art.result.best_val_loss)
                  << "\n";
                json row;
                row["variant"] = run.variant;
                row["seed"] = run.seed;
                row["mean_dice"] = mean_dice;
                row["mean_hd"] = std::isnan(mean_hd) ? json(nullptr) : json(mean_hd);
                row["mean_rvd"] = std::isnan(run.mean_rvd) ? json(nullptr) : json(run.mean_rvd);
                row["violations"] = run.violations;
                row["holes"] = run.holes;
                row["components"] = run.components;
                row["cycles_run"] = run.art.result.cycles_run;
                row["best_cycle"] = run.art.result.best_cycle;
                row["best_val_loss"] = run.art.result.best_val_loss;
                row["run_dir"] = (fsys::path(base.output_dir) / "ablate" / run.label).string();
                summary["table"].push_back(row);
            }
        f.flush();
        if (!f.good()) throw io_error("write failed: " + out.table_path);
    }

    // pairwise Wilcoxon over per-sample Dice and HD, pooled across seeds
    out.tests_path = (fsys::path(base.output_dir) / "ablation_tests.csv").string();
    {
        std::ofstream f(out.tests_path, std::ios::trunc);
        if (!f) throw io_error("cannot open for writing: " + out.tests_path);
        f << "metric,variant_a,variant_b,pairs,nonzero,statistic,p_value,significant,"
             "mean_a,mean_b,note\n";
        summary["tests"] = json::array();
        auto pooled = [&](std::size_t vi, bool hd) {
            std::vector<double> vals;
            for (const RunOutcome& run : runs[vi]) {
                const auto& src = hd ? run.sample_hd : run.sample_dice;
                vals.insert(vals.end(), src.begin(), src.end());
            }
            return vals;
        };
        for (std::size_t i = 0; i < variants.size(); ++i)
            for (std::size_t j = i + 1; j < variants.size(); ++j)
                for (const bool hd : {false, true}) {
                    const PairedTest t = paired_test(pooled(i, hd), pooled(j, hd));
                    const char* metric = hd ? "hd" : "dice";
                    f << metric << ',' << variants[i] << ',' << variants[j] << ',' << t.pairs
                      << ',' << t.nonzero << ',' << fmt_g(t.statistic) << ',' << fmt_g(t.p) << ','
                      << (t.significant ? 1 : 0) << ',' << fmt_g(t.mean_a) << ','
                      << fmt_g(t.mean_b) << ',' << t.note << "\n";
                    json row = paired_test_json(t);
                    row["metric"] = metric;
                    row["variant_a"] = variants[i];
                    row["variant_b"] = variants[j];
                    summary["tests"].push_back(row);
                }
        f.flush();
        if (!f.good()) throw io_error("write failed: " + out.tests_path);
    }

    summary["table_csv"] = out.table_path;
    summary["tests_csv"] = out.tests_path;
    out.summary_json = summary.dump(2);
    out.summary_path = (fsys::path(base.output_dir) / "ablation_summary.json").string();
    write_text_file(out.summary_path, out.summary_json + "\n");
    return out;
}

std::string run_compare(const std::string& report_a, const std::string& report_b) {
    const Report a = Report::load_csv(report_a);
    const Report b = Report::load_csv(report_b);

    // class -> id -> row
    auto index = [](const Report& r) {
        std::map<int, std::map<std::string, const ReportRow*>> m;
        for (const ReportRow& row : r.rows) {
            const bool fresh = m[row.cls].emplace(row.id, &row).second;
            require(fresh, "compare: duplicate row for id '" + row.id + "' class " +
                               std::to_string(row.cls));
        }
        return m;
    };
    const auto ia = index(a), ib = index(b);
    require(!ia.empty() && !ib.empty(), "compare: empty report");

    {
        auto classes_of = [](const auto& m) {
            std::vector<int> cs;
            for (const auto& [cls, rows] : m) cs.push_back(cls);
            return cs;
        };
        require(classes_of(ia) == classes_of(ib), "compare: reports cover different classes");
        for (const auto& [cls, rows_a] : ia) {
            const auto& rows_b = ib.at(cls);
            auto ids_of = [](const auto& m) {
                std::vector<std::string> ids;
                for (const auto& [id, row] : m) ids.push_back(id);
                return ids;
            };
            require(ids_of(rows_a) == ids_of(rows_b),
                    "compare: reports do not share sample ids (class " + std::to_string(cls) +
                        ")");
        }
    }

    json out;
    out["report_a"] = report_a;
    out["report_b"] = report_b;
    out["alpha"] = 0.05;
    out["tests"] = json::array();
    bool any_significant = false;
    for (const auto& [cls, rows_a] : ia) {
        const auto& rows_b = ib.at(cls);
        struct MetricRef {
            const char* name;
            double ReportRow::*field;
        };
        for (const MetricRef m : {MetricRef{"dice", &ReportRow::dice},
                                  MetricRef{"hd_mm", &ReportRow::hd_mm},
                                  MetricRef{"rvd", &ReportRow::rvd}}) {
            std::vector<double> va, vb;
            for (const auto& [id, ra] : rows_a) {
                va.push_back(ra->*(m.field));
                vb.push_back(rows_b.at(id)->*(m.field));
            }
            const PairedTest t = paired_test(va, vb);
            json row = paired_test_json(t);
            row["class"] = cls;
            row["metric"] = m.name;
            out["tests"].push_back(row);
            any_significant = any_significant || t.significant;
        }
    }
    out["any_significant"] = any_significant;
    return out.dump(2);
}

}  // namespace lfb

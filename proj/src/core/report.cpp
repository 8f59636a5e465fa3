#include "core/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "core/autodiff.hpp"
#include "core/stats.hpp"

namespace lfb {

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// mean/std over the defined (non-NaN) entries; NaN mean when none defined
void defined_stats(const std::vector<double>& vals, int& n, double& mean, double& sd) {
    std::vector<double> def;
    for (double v : vals)
        if (!std::isnan(v)) def.push_back(v);
    n = int(def.size());
    if (def.empty()) {
        mean = sd = std::numeric_limits<double>::quiet_NaN();
        return;
    }
    mean = mean_of(def);
    sd = stddev_of(def);
}

nlohmann::json json_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace

std::vector<ClassAggregate> Report::aggregates() const {
    std::map<int, std::vector<const ReportRow*>> by_class;
    for (const auto& r : rows) by_class[r.cls].push_back(&r);

    std::vector<ClassAggregate> out;
    for (const auto& [cls, rws] : by_class) {
        ClassAggregate a;
        a.cls = cls;
        a.n = int(rws.size());
        std::vector<double> dice, hd, rvd;
        int below = 0, above = 0;
        for (const ReportRow* r : rws) {
            dice.push_back(r->dice);
            hd.push_back(r->hd_mm);
            rvd.push_back(r->rvd);
            a.holes_total += r->holes;
            a.components_total += r->components;
            below += r->dice_below ? 1 : 0;
            above += r->hd_above ? 1 : 0;
        }
        int n_dice = 0;
        defined_stats(dice, n_dice, a.dice_mean, a.dice_std);
        require(n_dice == a.n, "report: NaN dice row");  // dice is always defined
        defined_stats(hd, a.n_hd, a.hd_mean, a.hd_std);
        defined_stats(rvd, a.n_rvd, a.rvd_mean, a.rvd_std);
        a.pct_dice_below = 100.0 * below / a.n;
        a.pct_hd_above = 100.0 * above / a.n;
        out.push_back(a);
    }
    return out;
}

void Report::save_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw io_error("report: cannot open for writing: " + path);
    f << "id,class,dice,hd_mm,rvd,holes,components";
    if (thresholds.enabled) f << ",dice_below,hd_above";
    f << "\n";
    for (const auto& r : rows) {
        require(r.id.find(',') == std::string::npos && r.id.find('\n') == std::string::npos,
                "report: sample id not CSV-safe: " + r.id);
        f << r.id << ',' << r.cls << ',' << fmt_g(r.dice) << ',' << fmt_g(r.hd_mm) << ','
          << fmt_g(r.rvd) << ',' << r.holes << ',' << r.components;
        if (thresholds.enabled) f << ',' << (r.dice_below ? 1 : 0) << ',' << (r.hd_above ? 1 : 0);
        f << "\n";
    }
    f.flush();
    if (!f.good()) throw io_error("report: write failed: " + path);
    f.close();

    // the recomputability contract: aggregates derived from the emitted rows
    // must match the in-memory ones to 1e-9
    const Report back = load_csv(path);
    const auto a = aggregates(), b = back.aggregates();
    require(a.size() == b.size(), "report: emitted rows lost a class");
    auto close = [](double x, double y) {
        if (std::isnan(x) && std::isnan(y)) return true;
        return std::abs(x - y) <= 1e-9;
    };
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool ok = a[i].cls == b[i].cls && a[i].n == b[i].n && a[i].n_hd == b[i].n_hd &&
                        a[i].n_rvd == b[i].n_rvd && a[i].holes_total == b[i].holes_total &&
                        a[i].components_total == b[i].components_total &&
                        close(a[i].dice_mean, b[i].dice_mean) &&
                        close(a[i].dice_std, b[i].dice_std) &&
                        close(a[i].hd_mean, b[i].hd_mean) && close(a[i].hd_std, b[i].hd_std) &&
                        close(a[i].rvd_mean, b[i].rvd_mean) &&
                        close(a[i].rvd_std, b[i].rvd_std) &&
                        close(a[i].pct_dice_below, b[i].pct_dice_below) &&
                        close(a[i].pct_hd_above, b[i].pct_hd_above);
        if (!ok) throw std::runtime_error("report: aggregates not recomputable from emitted rows");
    }
}

Report Report::load_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw io_error("report: cannot open: " + path);
    std::string line;
    if (!std::getline(f, line)) throw format_error("report: empty file: " + path);
    bool with_flags = false;
    if (line == "id,class,dice,hd_mm,rvd,holes,components") {
        with_flags = false;
    } else if (line == "id,class,dice,hd_mm,rvd,holes,components,dice_below,hd_above") {
        with_flags = true;
    } else {
        throw format_error("report: unrecognized header in " + path);
    }

    Report rep;
    rep.thresholds.enabled = with_flags;
    int lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        const std::size_t want = with_flags ? 9 : 7;
        format_require(cells.size() == want, "report: line " + std::to_string(lineno) + " has " +
                                          std::to_string(cells.size()) + " fields, want " +
                                          std::to_string(want));
        try {
            ReportRow r;
            r.id = cells[0];
            r.cls = std::stoi(cells[1]);
            r.dice = std::stod(cells[2]);
            r.hd_mm = std::stod(cells[3]);
            r.rvd = std::stod(cells[4]);
            r.holes = std::stoi(cells[5]);
            r.components = std::stoi(cells[6]);
            if (with_flags) {
                r.dice_below = std::stoi(cells[7]) != 0;
                r.hd_above = std::stoi(cells[8]) != 0;
            }
            rep.rows.push_back(std::move(r));
        } catch (const std::exception&) {
            throw format_error("report: unparsable line " + std::to_string(lineno) +
                                        " in " + path);
        }
    }
    return rep;
}

std::string Report::summary_json() const {
    nlohmann::json j;
    j["rows"] = rows.size();
    j["thresholds"] = nlohmann::json::object();
    if (thresholds.enabled) {
        j["thresholds"]["dice_min"] = thresholds.dice_min;
        j["thresholds"]["hd_max"] = thresholds.hd_max;
    }
    j["classes"] = nlohmann::json::array();
    for (const auto& a : aggregates()) {
        nlohmann::json c;
        c["class"] = a.cls;
        c["n"] = a.n;
        c["dice"] = {{"mean", a.dice_mean}, {"std", a.dice_std}};
        c["hd_mm"] = {{"mean", json_or_null(a.hd_mean)},
                      {"std", json_or_null(a.hd_std)},
                      {"n", a.n_hd}};
        c["rvd"] = {{"mean", json_or_null(a.rvd_mean)},
                    {"std", json_or_null(a.rvd_std)},
                    {"n", a.n_rvd}};
        c["holes"] = a.holes_total;
        c["components"] = a.components_total;
        if (thresholds.enabled) {
            c["pct_dice_below"] = a.pct_dice_below;
            c["pct_hd_above"] = a.pct_hd_above;
        }
        j["classes"].push_back(c);
    }
    return j.dump(2);
}

Report evaluate_predictions(const std::vector<Sample>& refs,
                            const std::vector<LabelMap>& preds, int classes,
                            ReportThresholds thresholds, double spacing) {
    require(refs.size() == preds.size(), "evaluate: refs/preds size mismatch");
    require(!refs.empty(), "evaluate: no samples");
    require(classes >= 1, "evaluate: bad class count");
    require(spacing > 0.0, "evaluate: spacing must be positive");
    const int fg = std::max(classes - 1, 1);

    Report rep;
    rep.thresholds = thresholds;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const LabelMap& ref = refs[i].labels;
        const LabelMap& pred = preds[i];
        require(pred.h == ref.h && pred.w == ref.w,
                "evaluate: prediction size (" + std::to_string(pred.h) + "," +
                    std::to_string(pred.w) + ") differs from reference (" +
                    std::to_string(ref.h) + "," + std::to_string(ref.w) + ") for sample " +
                    refs[i].id);
        const PlausibilityReport pl = plausibility_check(pred, std::max(classes, 2));
        for (int k = 1; k <= fg; ++k) {
            const BinaryMask pm = BinaryMask::from_labels(pred, k, spacing, spacing);
            const BinaryMask rm = BinaryMask::from_labels(ref, k, spacing, spacing);
            ReportRow r;
            r.id = refs[i].id;
            r.cls = k;
            r.dice = dice_coefficient(pm, rm);
            const bool pe = pm.volume() == 0, re = rm.volume() == 0;
            r.hd_mm = (pe || re) ? std::numeric_limits<double>::quiet_NaN()
                                 : hausdorff_distance(pm, rm);
            r.rvd = re ? std::numeric_limits<double>::quiet_NaN()
                       : relative_volume_difference(pm, rm);
            r.holes = pl.holes[k];
            r.components = pl.components[k];
            if (thresholds.enabled) {
                r.dice_below = r.dice < thresholds.dice_min;
                // one-sided empties count as unbounded deviation
                r.hd_above = (pe != re) || (!pe && !re && r.hd_mm > thresholds.hd_max);
            }
            rep.rows.push_back(std::move(r));
        }
    }
    return rep;
}

double mean_foreground_dice(const LabelMap& pred, const LabelMap& ref, int classes) {
    const int fg = std::max(classes - 1, 1);
    double acc = 0.0;
    for (int k = 1; k <= fg; ++k)
        acc += dice_coefficient(BinaryMask::from_labels(pred, k),
                                BinaryMask::from_labels(ref, k));
    return acc / fg;
}

double mean_foreground_hd(const LabelMap& pred, const LabelMap& ref, int classes,
                          double spacing) {
    const int fg = std::max(classes - 1, 1);
    double acc = 0.0;
    int defined = 0;
    for (int k = 1; k <= fg; ++k) {
        const BinaryMask pm = BinaryMask::from_labels(pred, k, spacing, spacing);
        const BinaryMask rm = BinaryMask::from_labels(ref, k, spacing, spacing);
        if (pm.volume() == 0 || rm.volume() == 0) continue;
        acc += hausdorff_distance(pm, rm);
        ++defined;
    }
    if (defined == 0) return std::numeric_limits<double>::quiet_NaN();
    return acc / defined;
}

}  // namespace lfb

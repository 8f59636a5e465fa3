#pragma once

#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/metrics.hpp"

namespace lfb {

// Optional worst-case flags: a row's Dice below dice_min or its boundary
// deviation above hd_max marks the prediction as a hard failure (a totally
// missed structure counts as above any hd_max even though hd itself is
// undefined for an empty mask).
struct ReportThresholds {
    bool enabled = false;
    double dice_min = 0.0;
    double hd_max = 0.0;
};

// One evaluated (sample, foreground class) pair. hd_mm and rvd are NaN when
// undefined (hd: either mask empty; rvd: empty reference). holes/components
// describe the predicted mask of this class.
struct ReportRow {
    std::string id;
    int cls = 0;
    double dice = 0.0;
    double hd_mm = 0.0;
    double rvd = 0.0;
    int holes = 0;
    int components = 0;
    bool dice_below = false;  // meaningful only when thresholds enabled
    bool hd_above = false;
};

struct ClassAggregate {
    int cls = 0;
    int n = 0;       // rows of this class
    int n_hd = 0;    // rows with defined hd
    int n_rvd = 0;   // rows with defined rvd
    double dice_mean = 0.0, dice_std = 0.0;
    double hd_mean = 0.0, hd_std = 0.0;    // over defined rows; NaN when none
    double rvd_mean = 0.0, rvd_std = 0.0;  // over defined rows; NaN when none
    long holes_total = 0;
    long components_total = 0;
    double pct_dice_below = 0.0;  // percent of rows flagged
    double pct_hd_above = 0.0;
};

// Per-sample metric rows plus per-class aggregates, persisted as a header-row
// CSV. save_csv re-reads what it wrote and verifies that every aggregate is
// recomputable from the emitted rows to 1e-9.
struct Report {
    std::vector<ReportRow> rows;
    ReportThresholds thresholds;

    std::vector<ClassAggregate> aggregates() const;
    void save_csv(const std::string& path) const;
    static Report load_csv(const std::string& path);
    std::string summary_json() const;
};

// Score predictions against references (the `preds[i]` must pair with
// `refs[i]`). Dice/HD/RVD per foreground class, plus holes and connected
// components of each predicted class mask. Pixel spacing is isotropic
// `spacing` (phantoms use 1 mm/pixel).
Report evaluate_predictions(const std::vector<Sample>& refs,
                            const std::vector<LabelMap>& preds, int classes,
                            ReportThresholds thresholds = {}, double spacing = 1.0);

// Sample-level summaries used for paired statistics: Dice averaged over
// foreground classes, and the mean of the defined per-class HDs (NaN when no
// class has a defined HD).
double mean_foreground_dice(const LabelMap& pred, const LabelMap& ref, int classes);
double mean_foreground_hd(const LabelMap& pred, const LabelMap& ref, int classes,
                          double spacing = 1.0);

}  // namespace lfb

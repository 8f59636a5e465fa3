#pragma once

#include <stdexcept>
#include <vector>

namespace lfb {

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct WilcoxonResult {
    int n = 0;            // pairs remaining after zero differences are dropped
    double w_plus = 0.0;  // rank sum of positive differences
    double w_minus = 0.0;
    double statistic = 0.0;  // min(w_plus, w_minus)
    double p_value = 1.0;    // two-sided
    bool exact = false;      // enumeration (n <= 12) vs normal approximation
};

// Paired two-sided Wilcoxon signed-rank test between samples a and b
// (differences a[i]-b[i]). Zero differences are dropped; ties share average
// ranks. n <= 12 uses exact enumeration over all 2^n sign assignments with
// p = min(1, 2*P(W- <= w_obs)); larger n uses the normal approximation with
// continuity and tie corrections. Throws InsufficientData when fewer than 5
// nonzero differences remain.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b);

double normal_cdf(double z);

// Sample mean and standard deviation (n-1 denominator; 0 when n < 2).
double mean_of(const std::vector<double>& xs);
double stddev_of(const std::vector<double>& xs);

}  // namespace lfb

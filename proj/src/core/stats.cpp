#include "core/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/autodiff.hpp"  // require()

namespace lfb {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    return std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
}

double stddev_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return std::sqrt(acc / double(xs.size() - 1));
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                    const std::vector<double>& b) {
    require(a.size() == b.size(), "wilcoxon_signed_rank: paired samples differ in length");

    std::vector<double> diff;
    diff.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diff.push_back(d);
    }
    const int n = int(diff.size());
    if (n < 5)
        throw InsufficientData("wilcoxon_signed_rank: fewer than 5 nonzero differences (" +
                               std::to_string(n) + ")");

    // Rank |d| ascending with average ranks on ties.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return std::abs(diff[i]) < std::abs(diff[j]);
    });
    std::vector<double> rank(n);
    std::vector<double> tie_sizes;
    for (int i = 0; i < n;) {
        int j = i;
        while (j < n && std::abs(diff[order[j]]) == std::abs(diff[order[i]])) ++j;
        const double avg = 0.5 * double(i + 1 + j);  // average of ranks i+1..j
        for (int k = i; k < j; ++k) rank[order[k]] = avg;
        if (j - i > 1) tie_sizes.push_back(double(j - i));
        i = j;
    }

    WilcoxonResult r;
    r.n = n;
    for (int i = 0; i < n; ++i)
        (diff[i] > 0.0 ? r.w_plus : r.w_minus) += rank[i];
    r.statistic = std::min(r.w_plus, r.w_minus);

    if (n <= 12) {
        // Exact null distribution conditional on the observed (tied) ranks.
        r.exact = true;
        const double w_obs = r.statistic + 1e-9;
        const std::uint32_t total = 1u << n;
        std::uint32_t count = 0;
        for (std::uint32_t m = 0; m < total; ++m) {
            double wm = 0.0;
            for (int i = 0; i < n; ++i)
                if (m & (1u << i)) wm += rank[i];
            if (wm <= w_obs) ++count;
        }
        r.p_value = std::min(1.0, 2.0 * double(count) / double(total));
    } else {
        r.exact = false;
        const double dn = double(n);
        const double mu = dn * (dn + 1.0) / 4.0;
        double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0;
        for (double t : tie_sizes) var -= (t * t * t - t) / 48.0;
        require(var > 0.0, "wilcoxon_signed_rank: zero variance (all differences tied)");
        const double z = (r.statistic - mu + 0.5) / std::sqrt(var);
        r.p_value = std::min(1.0, 2.0 * normal_cdf(z));
    }
    return r;
}

}  // namespace lfb

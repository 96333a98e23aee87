#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "acrlab/errors.hpp"

namespace acrlab {

enum class SigMarker { none, one_star, two_star, three_star };

inline const char* marker_text(SigMarker m) {
    switch (m) {
        case SigMarker::none: return "";
        case SigMarker::one_star: return "*";
        case SigMarker::two_star: return "**";
        case SigMarker::three_star: return "***";
    }
    return "";
}

struct SignificanceResult {
    double z = 0.0;
    double p_raw = 1.0;
    double p_adjusted = 1.0;
    long comparisons_m = 1;
    SigMarker marker = SigMarker::none;
};

// Two-sided tail probability of the standard normal for statistic z.
inline double normal_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

// Pooled two-proportion z test. The sign of z follows k1/n1 - k2/n2. A
// degenerate pooled proportion (all successes or all failures) carries no
// evidence either way and reports z = 0, p = 1.
inline SignificanceResult two_proportion_ztest(long k1, long n1, long k2, long n2) {
    if (n1 <= 0 || n2 <= 0) fail(Errc::domain_error, "two_proportion_ztest: n must be positive");
    if (k1 < 0 || k2 < 0 || k1 > n1 || k2 > n2)
        fail(Errc::domain_error, "two_proportion_ztest: k out of [0, n]");

    const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);

    SignificanceResult r;
    if (pooled <= 0.0 || pooled >= 1.0) {
        r.z = 0.0;
        r.p_raw = 1.0;
    } else {
        const double se = std::sqrt(pooled * (1.0 - pooled) *
                                    (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
        r.z = (p1 - p2) / se;
        r.p_raw = normal_two_sided_p(r.z);
    }
    r.p_adjusted = r.p_raw;
    return r;
}

inline SigMarker marker_for(double p_adjusted) {
    if (p_adjusted < 0.001) return SigMarker::three_star;
    if (p_adjusted < 0.01) return SigMarker::two_star;
    if (p_adjusted < 0.05) return SigMarker::one_star;
    return SigMarker::none;
}

inline SignificanceResult bonferroni_adjust(SignificanceResult r, long m) {
    if (m < 1) fail(Errc::domain_error, "bonferroni_adjust: m must be >= 1");
    r.comparisons_m = m;
    r.p_adjusted = std::min(1.0, static_cast<double>(m) * r.p_raw);
    r.marker = marker_for(r.p_adjusted);
    return r;
}

inline std::vector<SignificanceResult> bonferroni_adjust(std::vector<SignificanceResult> results,
                                                         long m) {
    for (auto& r : results) r = bonferroni_adjust(r, m);
    return results;
}

} // namespace acrlab

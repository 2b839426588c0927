#include "caesar/mwu.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <limits>
#include <numeric>

#include "caesar/error.hpp"

namespace caesar {

const char* to_string(MwuMethod m) {
    switch (m) {
        case MwuMethod::Auto: return "auto";
        case MwuMethod::Exact: return "exact";
        case MwuMethod::NormalApprox: return "normal_approx";
    }
    return "auto";
}

std::vector<double> midranks(std::span<const double> pooled) {
    std::vector<std::size_t> order(pooled.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
    std::vector<double> ranks(pooled.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

std::vector<std::uint64_t> mwu_null_counts(std::size_t n, std::size_t m) {
    // f[i][j] over u, built with f(i,j,u) = f(i-1,j,u-j) + f(i,j-1,u).
    std::vector<std::vector<std::vector<std::uint64_t>>> f(n + 1, std::vector<std::vector<std::uint64_t>>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t j = 0; j <= m; ++j) {
            auto& cur = f[i][j];
            cur.assign(i * j + 1, 0);
            if (i == 0 || j == 0) {
                cur[0] = 1;
                continue;
            }
            const auto& a = f[i - 1][j];
            for (std::size_t u = 0; u < a.size(); ++u) cur[u + j] += a[u];
            const auto& b = f[i][j - 1];
            for (std::size_t u = 0; u < b.size(); ++u) cur[u] += b[u];
        }
    }
    return f[n][m];
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double clamp_p(double p) { return std::clamp(p, std::numeric_limits<double>::min(), 1.0); }

}  // namespace

MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b, Alternative alternative,
                         MwuMethod method) {
    if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "Mann-Whitney U needs two non-empty samples");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    auto ranks = midranks(pooled);
    double ra = 0.0;
    for (std::size_t i = 0; i < n; ++i) ra += ranks[i];
    const double nm = static_cast<double>(n) * static_cast<double>(m);

    MwuResult res;
    res.u = ra - static_cast<double>(n) * (static_cast<double>(n) + 1.0) / 2.0;
    res.u_b = nm - res.u;

    std::map<double, std::size_t> groups;
    for (double x : pooled) ++groups[x];
    const bool ties = groups.size() < pooled.size();

    MwuMethod chosen = method;
    if (chosen == MwuMethod::Auto) {
        chosen = (n * m <= kExactLimit && !ties) ? MwuMethod::Exact : MwuMethod::NormalApprox;
    }
    if (chosen == MwuMethod::Exact && ties) {
        throw Error(ErrorCode::Unsupported, "exact Mann-Whitney p-value is undefined with tied observations");
    }
    res.method = chosen;

    if (chosen == MwuMethod::Exact) {
        auto counts = mwu_null_counts(n, m);
        const auto u = static_cast<std::size_t>(std::llround(res.u));
        long double total = 0, le = 0, ge = 0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            total += counts[k];
            if (k <= u) le += counts[k];
            if (k >= u) ge += counts[k];
        }
        double p = 1.0;
        switch (alternative) {
            case Alternative::TwoSided: p = static_cast<double>(2.0L * std::min(le, ge) / total); break;
            case Alternative::Less: p = static_cast<double>(le / total); break;
            case Alternative::Greater: p = static_cast<double>(ge / total); break;
        }
        res.p_value = clamp_p(p);
        return res;
    }

    const double big_n = static_cast<double>(n + m);
    double tie_term = 0.0;
    for (const auto& [v, t] : groups) {
        double td = static_cast<double>(t);
        tie_term += td * td * td - td;
    }
    const double mu = nm / 2.0;
    const double var = nm / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if (var <= 0.0) {
        res.p_value = 1.0;
        return res;
    }
    const double sigma = std::sqrt(var);
    double p = 1.0;
    switch (alternative) {
        case Alternative::TwoSided:
            res.z = std::max(0.0, std::abs(res.u - mu) - 0.5) / sigma;
            p = std::erfc(res.z / std::sqrt(2.0));
            break;
        case Alternative::Less:
            res.z = (res.u - mu + 0.5) / sigma;
            p = normal_cdf(res.z);
            break;
        case Alternative::Greater:
            res.z = (res.u - mu - 0.5) / sigma;
            p = 1.0 - normal_cdf(res.z);
            break;
    }
    res.p_value = clamp_p(p);
    return res;
}

}  // namespace caesar

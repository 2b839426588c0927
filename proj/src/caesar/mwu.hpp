#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace caesar {

enum class Alternative { TwoSided, Less, Greater };
enum class MwuMethod { Auto, Exact, NormalApprox };

const char* to_string(MwuMethod m);

struct MwuResult {
    double u = 0.0;    // U of sample A: pairs with a > b, ties counted 1/2
    double u_b = 0.0;  // n*m - u
    double p_value = 1.0;
    MwuMethod method = MwuMethod::Exact;
    double z = 0.0;    // normal approximation only
};

// Auto uses the exact null distribution when n*m <= kExactLimit and the pooled
// sample has no ties, otherwise the tie-corrected normal approximation with
// continuity correction. Throws Error{EmptySample}; Exact with ties throws
// Error{Unsupported}.
MwuResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                         Alternative alternative = Alternative::TwoSided, MwuMethod method = MwuMethod::Auto);

inline constexpr std::size_t kExactLimit = 400;

// Number of arrangements giving U = u, for u = 0..n*m.
std::vector<std::uint64_t> mwu_null_counts(std::size_t n, std::size_t m);

// Midranks (1-based) of the pooled sample.
std::vector<double> midranks(std::span<const double> pooled);

}  // namespace caesar

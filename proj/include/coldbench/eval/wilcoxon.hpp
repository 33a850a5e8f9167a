#pragma once

#include <span>
#include <vector>

namespace coldbench::eval {

enum class Alternative { Greater, Less };

struct WilcoxonResult {
  double p_value = 1.0;
  double statistic = 0;        // W+, sum of ranks of positive differences
  std::size_t n_effective = 0; // non-zero differences
  bool exact = false;
  bool degenerate = false;     // every difference was zero
};

/// Differences whose magnitude is at most this are treated as zero, and
/// magnitudes closer than this share a mid-rank.
inline constexpr double kWilcoxonTieTolerance = 1e-12;

/// Exact null distribution up to this many non-zero differences.
inline constexpr std::size_t kWilcoxonExactMax = 25;

/// One-sided signed-rank test of d = x - y. Zero differences are dropped,
/// tied magnitudes get mid-ranks. Up to kWilcoxonExactMax non-zero
/// differences the p-value is exact (P(W+ >= w) for Greater, P(W+ <= w)
/// for Less, over all sign assignments of the observed ranks); beyond it a
/// normal approximation with tie-corrected variance and a 0.5 continuity
/// correction is used.
WilcoxonResult wilcoxon_one_sided(std::span<const double> x, std::span<const double> y,
                                  Alternative alternative);

/// Same test on precomputed differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, Alternative alternative);

}  // namespace coldbench::eval

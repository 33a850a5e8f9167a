#include "coldbench/eval/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coldbench/util/error.hpp"

namespace coldbench::eval {

WilcoxonResult wilcoxon_one_sided(std::span<const double> x, std::span<const double> y,
                                  Alternative alternative) {
  if (x.size() != y.size()) throw DataError("wilcoxon: samples are not paired");
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
  return wilcoxon_signed_rank(d, alternative);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences, Alternative alternative) {
  WilcoxonResult res;
  std::vector<double> d;
  for (double v : differences) {
    if (std::isnan(v)) throw DataError("wilcoxon: NaN difference");
    if (std::abs(v) > kWilcoxonTieTolerance) d.push_back(v);
  }
  const std::size_t n = d.size();
  res.n_effective = n;
  if (n == 0) {
    res.degenerate = true;
    return res;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  // Doubled mid-ranks are integers: group [i, j) gets rank i + j + 1.
  std::vector<long> rank2(n);
  double tie_term = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && std::abs(d[order[j]]) - std::abs(d[order[j - 1]]) <= kWilcoxonTieTolerance) ++j;
    for (std::size_t t = i; t < j; ++t) rank2[order[t]] = static_cast<long>(i + j + 1);
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }

  long w2 = 0;  // 2 * W+
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w2 += rank2[i];
  }
  res.statistic = static_cast<double>(w2) / 2.0;

  if (n <= kWilcoxonExactMax) {
    res.exact = true;
    const long total = std::accumulate(rank2.begin(), rank2.end(), 0L);
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1;
    long reach = 0;
    for (long r : rank2) {
      for (long s = reach; s >= 0; --s) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
      reach += r;
    }
    double tail = 0;
    for (long s = 0; s <= total; ++s) {
      const bool in_tail = alternative == Alternative::Greater ? s >= w2 : s <= w2;
      if (in_tail) tail += count[static_cast<std::size_t>(s)];
    }
    res.p_value = std::ldexp(tail, -static_cast<int>(n));
    return res;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  if (var <= 0) {
    res.degenerate = true;
    return res;
  }
  const double sd = std::sqrt(var);
  if (alternative == Alternative::Greater) {
    const double z = (res.statistic - mean - 0.5) / sd;
    res.p_value = 0.5 * std::erfc(z / std::sqrt(2.0));
  } else {
    const double z = (res.statistic - mean + 0.5) / sd;
    res.p_value = 0.5 * std::erfc(-z / std::sqrt(2.0));
  }
  res.p_value = std::clamp(res.p_value, 0.0, 1.0);
  return res;
}

}  // namespace coldbench::eval

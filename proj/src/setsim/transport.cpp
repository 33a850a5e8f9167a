#include "coldbench/setsim/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace coldbench::setsim {

namespace {

double log_sum_exp(const double* values, std::size_t n, std::size_t stride) {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, values[i * stride]);
  if (!std::isfinite(hi)) return hi;
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(values[i * stride] - hi);
  return hi + std::log(s);
}

struct Potentials {
  std::vector<double> f, g;
};

// P_ij = a_i b_j exp((f_i + g_j - C_ij) / eps)
double plan_entry(const CostMatrix& c, const std::vector<double>& log_a,
                  const std::vector<double>& log_b, const Potentials& p, double eps,
                  std::size_t i, std::size_t j) {
  return std::exp(log_a[i] + log_b[j] + (p.f[i] + p.g[j] - c(i, j)) / eps);
}

// Dual objective <a,f> + <b,g> - eps * (sum P - 1); concave in (f, g).
double dual_value(const CostMatrix& c, std::span<const double> a, std::span<const double> b,
                  const std::vector<double>& log_a, const std::vector<double>& log_b,
                  const Potentials& p, double eps) {
  double dual = 0, mass = 0;
  for (std::size_t i = 0; i < c.rows; ++i) dual += a[i] * p.f[i];
  for (std::size_t j = 0; j < c.cols; ++j) dual += b[j] * p.g[j];
  for (std::size_t i = 0; i < c.rows; ++i) {
    for (std::size_t j = 0; j < c.cols; ++j) mass += plan_entry(c, log_a, log_b, p, eps, i, j);
  }
  return dual - eps * (mass - 1.0);
}

double full_error(const CostMatrix& c, std::span<const double> a, std::span<const double> b,
                  const std::vector<double>& log_a, const std::vector<double>& log_b,
                  const Potentials& p, double eps) {
  std::vector<double> row(c.rows, 0.0), col(c.cols, 0.0);
  for (std::size_t i = 0; i < c.rows; ++i) {
    for (std::size_t j = 0; j < c.cols; ++j) {
      const double v = plan_entry(c, log_a, log_b, p, eps, i, j);
      row[i] += v;
      col[j] += v;
    }
  }
  double e = 0;
  for (std::size_t i = 0; i < c.rows; ++i) e += std::abs(row[i] - a[i]);
  for (std::size_t j = 0; j < c.cols; ++j) e += std::abs(col[j] - b[j]);
  return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
}

// One damped Newton step on the dual, with the last g fixed to remove the
// constant shift. Sinkhorn sweeps crawl when two assignments are nearly tied;
// Newton does not. Returns false (leaving p unchanged) when no step increases
// the dual while reducing the marginal error.
bool newton_step(const CostMatrix& c, std::span<const double> a, std::span<const double> b,
                 const std::vector<double>& log_a, const std::vector<double>& log_b,
                 Potentials& p, double eps) {
  const std::size_t n = c.rows, m = c.cols, k = n + m - 1;
  std::vector<double> plan(n * m), row(n, 0.0), col(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      plan[i * m + j] = plan_entry(c, log_a, log_b, p, eps, i, j);
      row[i] += plan[i * m + j];
      col[j] += plan[i * m + j];
    }
  }
  // Negated Hessian times eps: [[diag(row), P], [P^T, diag(col)]] minus the last column.
  std::vector<double> h(k * k, 0.0), rhs(k);
  for (std::size_t i = 0; i < n; ++i) {
    h[i * k + i] = row[i];
    rhs[i] = eps * (a[i] - row[i]);
    for (std::size_t j = 0; j + 1 < m; ++j) {
      h[i * k + n + j] = plan[i * m + j];
      h[(n + j) * k + i] = plan[i * m + j];
    }
  }
  for (std::size_t j = 0; j + 1 < m; ++j) {
    h[(n + j) * k + n + j] = col[j];
    rhs[n + j] = eps * (b[j] - col[j]);
  }
  double scale = 0;
  for (std::size_t d = 0; d < k; ++d) scale = std::max(scale, h[d * k + d]);
  for (std::size_t d = 0; d < k; ++d) h[d * k + d] += 1e-13 * scale;
  // Cholesky in place.
  for (std::size_t j = 0; j < k; ++j) {
    double d = h[j * k + j];
    for (std::size_t t = 0; t < j; ++t) d -= h[j * k + t] * h[j * k + t];
    if (!(d > 0)) return false;
    h[j * k + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = h[i * k + j];
      for (std::size_t t = 0; t < j; ++t) s -= h[i * k + t] * h[j * k + t];
      h[i * k + j] = s / h[j * k + j];
    }
  }
  std::vector<double> step(rhs);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t t = 0; t < i; ++t) step[i] -= h[i * k + t] * step[t];
    step[i] /= h[i * k + i];
  }
  for (std::size_t i = k; i-- > 0;) {
    for (std::size_t t = i + 1; t < k; ++t) step[i] -= h[t * k + i] * step[t];
    step[i] /= h[i * k + i];
  }

  const double d0 = dual_value(c, a, b, log_a, log_b, p, eps);
  const double e0 = full_error(c, a, b, log_a, log_b, p, eps);
  const double slack = 1e-15 * (1.0 + std::abs(d0));
  for (double t = 1.0; t > 1e-6; t *= 0.5) {
    Potentials trial = p;
    for (std::size_t i = 0; i < n; ++i) trial.f[i] += t * step[i];
    for (std::size_t j = 0; j + 1 < m; ++j) trial.g[j] += t * step[n + j];
    const double d1 = dual_value(c, a, b, log_a, log_b, trial, eps);
    if (!std::isfinite(d1) || d1 < d0 - slack) continue;
    if (full_error(c, a, b, log_a, log_b, trial, eps) >= e0) continue;
    p = std::move(trial);
    return true;
  }
  return false;
}

}  // namespace

TransportResult sinkhorn(const CostMatrix& cost, std::span<const double> a,
                         std::span<const double> b, const SinkhornOptions& options) {
  const std::size_t n = cost.rows, m = cost.cols;
  if (n == 0 || m == 0 || a.size() != n || b.size() != m) {
    throw Error("sinkhorn: weights do not match the cost matrix shape");
  }
  if (options.reg <= 0) throw Error("sinkhorn: regularization must be positive");

  std::vector<double> log_a(n), log_b(m);
  for (std::size_t i = 0; i < n; ++i) log_a[i] = std::log(a[i]);
  for (std::size_t j = 0; j < m; ++j) log_b[j] = std::log(b[j]);

  double c_max = 0;
  for (double v : cost.values) c_max = std::max(c_max, std::abs(v));

  std::vector<double> schedule;
  if (options.epsilon_scaling) {
    for (double eps = std::max(c_max, options.reg); eps > options.reg;
         eps *= options.scaling_factor) {
      schedule.push_back(eps);
    }
  }
  schedule.push_back(options.reg);

  Potentials pot{std::vector<double>(n, 0.0), std::vector<double>(m, 0.0)};
  std::vector<double> scratch(std::max(n, m));
  TransportResult result;
  int total_iterations = 0;
  double err = std::numeric_limits<double>::infinity();

  auto row_error = [&](double eps) {
    double e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < m; ++j) row += plan_entry(cost, log_a, log_b, pot, eps, i, j);
      e += std::abs(row - a[i]);
    }
    return e;
  };

  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    const bool final_stage = stage + 1 == schedule.size();
    // Intermediate stages only need a rough warm start.
    const double stage_tol = final_stage ? options.tolerance : std::max(options.tolerance, 1e-3);
    err = std::numeric_limits<double>::infinity();
    int stage_iterations = 0;
    bool newton_ok = final_stage;
    while (err > stage_tol) {
      if (total_iterations >= options.max_iterations) {
        throw ConvergenceError("sinkhorn did not converge: marginal error " +
                                   std::to_string(err) + " after " +
                                   std::to_string(total_iterations) + " iterations (eps " +
                                   std::to_string(eps) + ")",
                               total_iterations, err);
      }
      // Past a short run of sweeps, alternate in Newton steps while they help.
      const bool try_newton = newton_ok && stage_iterations >= 20 && stage_iterations % 2 == 1;
      if (try_newton) newton_ok = newton_step(cost, a, b, log_a, log_b, pot, eps);
      if (!try_newton || !newton_ok) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) scratch[j] = log_b[j] + (pot.g[j] - cost(i, j)) / eps;
          pot.f[i] = -eps * log_sum_exp(scratch.data(), m, 1);
        }
        for (std::size_t j = 0; j < m; ++j) {
          for (std::size_t i = 0; i < n; ++i) scratch[i] = log_a[i] + (pot.f[i] - cost(i, j)) / eps;
          pot.g[j] = -eps * log_sum_exp(scratch.data(), n, 1);
        }
      }
      ++stage_iterations;
      ++total_iterations;
      // A sweep leaves the columns exact; a Newton step does not.
      err = try_newton && newton_ok ? full_error(cost, a, b, log_a, log_b, pot, eps)
                                    : row_error(eps);

      if (options.record_trace) {
        SinkhornTraceEntry entry;
        entry.iteration = total_iterations;
        entry.epsilon = eps;
        entry.marginal_error = err;
        double mass = 0, transport = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < m; ++j) {
            const double p = plan_entry(cost, log_a, log_b, pot, eps, i, j);
            mass += p;
            transport += p * cost(i, j);
          }
        }
        double dual = 0;
        for (std::size_t i = 0; i < n; ++i) dual += a[i] * pot.f[i];
        for (std::size_t j = 0; j < m; ++j) dual += b[j] * pot.g[j];
        entry.dual_objective = dual - eps * (mass - 1.0);
        
        entry.transport_cost = transport;
        result.trace.push_back(entry);
      }
    }
  }

  const double eps = schedule.back();
  result.plan.resize(n * m);
  result.cost = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double p = plan_entry(cost, log_a, log_b, pot, eps, i, j);
      result.plan[i * m + j] = p;
      result.cost += p * cost(i, j);
    }
  }
  result.iterations = total_iterations;
  result.marginal_error = err;
  return result;
}

Assignment solve_assignment(const CostMatrix& cost) {
  if (cost.rows != cost.cols) throw Error("solve_assignment: matrix must be square");
  const std::size_t n = cost.rows;
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials formulation; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment out;
  out.column.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.column[p[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost(i, out.column[i]);
  return out;
}

}  // namespace coldbench::setsim

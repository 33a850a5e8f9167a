#pragma once

#include <span>
#include <string>
#include <vector>

#include "coldbench/util/error.hpp"

namespace coldbench::setsim {

/// Dense row-major cost matrix.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

struct SinkhornOptions {
  double reg = 1e-4;           // entropic regularization (epsilon)
  double tolerance = 1e-9;     // L1 violation of the row marginals
  int max_iterations = 10000;  // across all annealing stages
  /// Anneal epsilon geometrically from the cost range down to reg, warm
  /// starting the dual potentials at each stage.
  bool epsilon_scaling = true;
  double scaling_factor = 0.5;
  bool record_trace = false;
};

struct SinkhornTraceEntry {
  int iteration = 0;
  double epsilon = 0;
  double dual_objective = 0;  // non-decreasing within a stage
  double transport_cost = 0;  // <P, C> of the current plan
  double marginal_error = 0;
};

struct TransportResult {
  double cost = 0;            // <P, C>
  std::vector<double> plan;   // row-major rows x cols
  int iterations = 0;
  double marginal_error = 0;
  std::vector<SinkhornTraceEntry> trace;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double marginal_error)
      : Error(what), iterations_(iterations), marginal_error_(marginal_error) {}
  int iterations() const noexcept { return iterations_; }
  double marginal_error() const noexcept { return marginal_error_; }

 private:
  int iterations_;
  double marginal_error_;
};

/// Entropic optimal transport between weights a (rows) and b (columns),
/// solved with log-domain Sinkhorn iterations so that tiny epsilons do not
/// underflow. In the final stage, sweeps alternate with damped Newton steps
/// on the same dual once progress stalls (nearly tied assignments make plain
/// sweeps crawl). Every step keeps the dual non-decreasing. Throws ConvergenceError if the row marginals are not within
/// tolerance after max_iterations.
TransportResult sinkhorn(const CostMatrix& cost, std::span<const double> a,
                         std::span<const double> b, const SinkhornOptions& options = {});

struct Assignment {
  double total_cost = 0;         // sum of C[i, column[i]]
  std::vector<std::size_t> column;
};

/// Minimum-cost perfect matching on a square matrix (Hungarian method, O(n^3)).
Assignment solve_assignment(const CostMatrix& cost);

}  // namespace coldbench::setsim

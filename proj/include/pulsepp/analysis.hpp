#pragma once

#include <functional>
#include <vector>

#include "pulsepp/types.hpp"

namespace pulsepp {

using LinearOp = std::function<Vector(const Vector&)>;

/// Decomposition f = f_meas + f_null with f_meas the pseudoinverse
/// projection of f onto the row space of the operator. rel_residual is
/// ||H f_null|| / ||H f|| at exit.
struct ComponentSplit {
  Vector f_meas;
  Vector f_null;
  double rel_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Conjugate-gradient least squares on the normal equations, iterated until
/// ||H f_null|| <= tol * ||H f||. Starting from zero keeps the solution in
/// the operator's row space, so the limit is the Moore-Penrose projection.
ComponentSplit measurable_component(const LinearOp& apply_h,
                                    const LinearOp& apply_ht, const Vector& f,
                                    double tol, int max_iter);

/// Per-pixel population standard deviation (divide by T) over a solution
/// stack; requires at least two images of equal dimensions.
Vector pixelwise_std(const std::vector<ObjectImage>& solutions);

struct UncertaintyReport {
  Vector map_full;   // std of the solutions
  Vector map_meas;   // std of their measurable components
  Vector map_null;   // std of their null components
  double fom_full = 0.0;  // squared norms of the maps
  double fom_meas = 0.0;
  double fom_null = 0.0;
  int count = 0;  // T
  double tol = 0.0;
  std::vector<double> residuals;  // per-solution split residuals
  bool converged = true;
};

/// Splits every solution, then reduces the three stacks to std maps and
/// their squared-norm figures of merit.
UncertaintyReport uncertainty_report(const std::vector<ObjectImage>& solutions,
                                     const LinearOp& apply_h,
                                     const LinearOp& apply_ht, double tol,
                                     int max_iter);

struct FidelitySummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double fraction_accepted = 0.0;
  int count = 0;
};

FidelitySummary fidelity_summary(const std::vector<double>& fidelities,
                                 double epsilon);

}  // namespace pulsepp

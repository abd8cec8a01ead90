#include "pulsepp/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "pulsepp/latent_space.hpp"

namespace pulsepp {

ComponentSplit measurable_component(const LinearOp& apply_h,
                                    const LinearOp& apply_ht, const Vector& f,
                                    double tol, int max_iter) {
  require(tol > 0.0, "measurable_component: tol must be > 0");
  require(max_iter >= 1, "measurable_component: max_iter must be >= 1");
  ComponentSplit out;
  const Vector d = apply_h(f);
  const double dnorm = d.norm();
  if (dnorm == 0.0) {
    out.f_meas = Vector::Zero(f.size());
    out.f_null = f;
    out.converged = true;
    return out;
  }

  Vector x = Vector::Zero(f.size());
  Vector r = d;  // r = H f - H x = H f_null for the current split
  Vector s = apply_ht(r);
  Vector p = s;
  double gamma = s.squaredNorm();
  double rel = 1.0;
  int it = 0;
  while (it < max_iter) {
    const Vector q = apply_h(p);
    const double qn = q.squaredNorm();
    if (qn == 0.0 || gamma == 0.0) break;
    const double alpha = gamma / qn;
    x += alpha * p;
    r -= alpha * q;
    ++it;
    rel = r.norm() / dnorm;
    if (rel <= tol) break;
    s = apply_ht(r);
    const double gamma_new = s.squaredNorm();
    p = s + (gamma_new / gamma) * p;
    gamma = gamma_new;
  }
  out.f_meas = x;
  out.f_null = f - x;
  out.rel_residual = rel;
  out.iterations = it;
  out.converged = rel <= tol;
  return out;
}

namespace {

// Population variance through pairwise differences,
// var = sum_{i<j} (x_i - x_j)^2 / T^2; identical stacks give exactly zero.
Vector stack_std(const std::vector<Vector>& stack) {
  const std::size_t t = stack.size();
  Vector acc = Vector::Zero(stack.front().size());
  for (std::size_t i = 0; i + 1 < t; ++i)
    for (std::size_t j = i + 1; j < t; ++j) {
      const Vector d = stack[i] - stack[j];
      acc += d.cwiseProduct(d);
    }
  acc /= static_cast<double>(t) * static_cast<double>(t);
  return acc.cwiseSqrt();
}

}  // namespace

Vector pixelwise_std(const std::vector<ObjectImage>& solutions) {
  require(solutions.size() >= 2, "pixelwise_std: need at least two solutions");
  for (const auto& s : solutions)
    require(s.width == solutions.front().width &&
                s.height == solutions.front().height,
            "pixelwise_std: dimension mismatch");
  std::vector<Vector> stack;
  stack.reserve(solutions.size());
  for (const auto& s : solutions) stack.push_back(s.pixels);
  return stack_std(stack);
}

UncertaintyReport uncertainty_report(const std::vector<ObjectImage>& solutions,
                                     const LinearOp& apply_h,
                                     const LinearOp& apply_ht, double tol,
                                     int max_iter) {
  require(solutions.size() >= 2,
          "uncertainty_report: need at least two solutions");
  UncertaintyReport rep;
  rep.count = static_cast<int>(solutions.size());
  rep.tol = tol;

  std::vector<Vector> meas, null;
  meas.reserve(solutions.size());
  null.reserve(solutions.size());
  for (const auto& s : solutions) {
    ComponentSplit split =
        measurable_component(apply_h, apply_ht, s.pixels, tol, max_iter);
    rep.residuals.push_back(split.rel_residual);
    rep.converged = rep.converged && split.converged;
    meas.push_back(std::move(split.f_meas));
    null.push_back(std::move(split.f_null));
  }
  rep.map_full = pixelwise_std(solutions);
  rep.map_meas = stack_std(meas);
  rep.map_null = stack_std(null);
  rep.fom_full = rep.map_full.squaredNorm();
  rep.fom_meas = rep.map_meas.squaredNorm();
  rep.fom_null = rep.map_null.squaredNorm();
  return rep;
}

FidelitySummary fidelity_summary(const std::vector<double>& fidelities,
                                 double epsilon) {
  require(!fidelities.empty(), "fidelity_summary: empty list");
  const NormEcdf ecdf = ecdf_build(fidelities);
  FidelitySummary s;
  s.count = static_cast<int>(fidelities.size());
  s.min = ecdf.sorted_samples().front();
  s.max = ecdf.sorted_samples().back();
  s.q1 = ecdf.quantile(0.25);
  s.median = ecdf.quantile(0.5);
  s.q3 = ecdf.quantile(0.75);
  int below = 0;
  for (double j : fidelities)
    if (j <= epsilon) ++below;
  s.fraction_accepted = static_cast<double>(below) / s.count;
  return s;
}

}  // namespace pulsepp

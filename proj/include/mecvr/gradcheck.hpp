#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mecvr/nn.hpp"

namespace mecvr::nn {

struct GradMismatch {
  std::string parameter;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::vector<GradMismatch> failures;
  bool passed() const { return failures.empty(); }
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor so near-zero gradients are compared absolutely.
  double floor = 1e-7;
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

/// `loss` must evaluate the scalar loss from the current parameter values
/// without side effects on them; `analytic` must fill every p->grad.
GradCheckReport check_gradients(const ParamList& params, const std::function<double()>& loss,
                                const std::function<void()>& analytic,
                                const GradCheckOptions& opts = {});

/// Same comparison for a plain input vector (e.g. dQ/da).
GradCheckReport check_input_gradient(Matrix& input, const Matrix& analytic_grad,
                                     const std::function<double()>& loss,
                                     const std::string& label, const GradCheckOptions& opts = {});

}  // namespace mecvr::nn

namespace mecvr::nn {

struct GradSuiteEntry {
  std::string name;
  GradCheckReport report;
};

struct GradSuiteOptions {
  GradCheckOptions check;
  /// Negates the analytic gradient of every case (negative control).
  bool flip_sign = false;
};

/// Dense layers for each activation, a small MLP, single and stacked LSTMs,
/// a critic (parameters and action input) and the actor chain through a
/// frozen critic. Every net has at most 1e3 parameters.
std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, const GradSuiteOptions& opts = {});

}  // namespace mecvr::nn

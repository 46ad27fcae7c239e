#include "mecvr/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mecvr::nn {

namespace {

void compare(GradCheckReport& report, const std::string& name, Eigen::Index r, Eigen::Index c,
             double analytic, double numeric, const GradCheckOptions& opts) {
  const double rel = relative_error(analytic, numeric, opts.floor);
  ++report.checked;
  report.max_rel_error = std::max(report.max_rel_error, rel);
  if (!(rel <= opts.tolerance)) report.failures.push_back({name, r, c, analytic, numeric, rel});
}

double central_difference(double& x, const std::function<double()>& loss, double h) {
  const double saved = x;
  x = saved + h;
  const double up = loss();
  x = saved - h;
  const double down = loss();
  x = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport check_gradients(const ParamList& params, const std::function<double()>& loss,
                                const std::function<void()>& analytic,
                                const GradCheckOptions& opts) {
  zero_grad(params);
  analytic();
  std::vector<Matrix> grads;
  for (const auto* p : params) grads.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (Eigen::Index j = 0; j < p.value.cols(); ++j)
      for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
        const double numeric = central_difference(p.value(i, j), loss, opts.step);
        compare(report, p.name, i, j, grads[k](i, j), numeric, opts);
      }
  }
  return report;
}

GradCheckReport check_input_gradient(Matrix& input, const Matrix& analytic_grad,
                                     const std::function<double()>& loss,
                                     const std::string& label, const GradCheckOptions& opts) {
  GradCheckReport report;
  for (Eigen::Index j = 0; j < input.cols(); ++j)
    for (Eigen::Index i = 0; i < input.rows(); ++i) {
      const double numeric = central_difference(input(i, j), loss, opts.step);
      compare(report, label, i, j, analytic_grad(i, j), numeric, opts);
    }
  return report;
}

}  // namespace mecvr::nn

namespace mecvr::nn {

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = u(rng);
  return m;
}

void flip(const ParamList& params) {
  for (auto* p : params) p->grad = -p->grad;
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix x(top.rows() + bottom.rows(), top.cols());
  x << top, bottom;
  return x;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed, const GradSuiteOptions& opts) {
  Rng rng(seed);
  std::vector<GradSuiteEntry> out;
  const Eigen::Index B = 3;

  for (Activation act : {Activation::kLinear, Activation::kRelu, Activation::kTanh, Activation::kSigmoid,
                         Activation::kSoftmax}) {
    Dense layer(5, 4, act, rng, std::string("dense_") + activation_name(act));
    const Matrix x = random_matrix(5, B, rng);
    const Matrix y = random_matrix(4, B, rng, 0.0, 1.0);
    const auto params = layer.params();
    auto report = check_gradients(
        params, [&] { return mse_loss(layer.infer(x), y).value; },
        [&] {
          layer.backward(mse_loss(layer.forward(x), y).grad);
          if (opts.flip_sign) flip(params);
        },
        opts.check);
    out.push_back({layer.weight().name.substr(0, layer.weight().name.find('.')), std::move(report)});
  }

  {
    Mlp mlp(6, {8, 8}, 3, Activation::kTanh, Activation::kSigmoid, rng, "mlp");
    const Matrix x = random_matrix(6, B, rng);
    const Matrix y = random_matrix(3, B, rng, 0.0, 1.0);
    const auto params = mlp.params();
    auto report = check_gradients(
        params, [&] { return mse_loss(mlp.infer(x), y).value; },
        [&] {
          mlp.backward(mse_loss(mlp.forward(x), y).grad);
          if (opts.flip_sign) flip(params);
        },
        opts.check);
    out.push_back({"mlp_tanh_sigmoid", std::move(report)});
  }

  {
    Lstm lstm(4, 5, rng, "lstm");
    std::vector<Matrix> xs, ys;
    for (int t = 0; t < 4; ++t) {
      xs.push_back(random_matrix(4, B, rng));
      ys.push_back(random_matrix(5, B, rng));
    }
    const auto params = lstm.params();
    auto loss_of = [&](const std::vector<Matrix>& hs) {
      double l = 0.0;
      for (std::size_t t = 0; t < hs.size(); ++t) l += mse_loss(hs[t], ys[t]).value;
      return l;
    };
    auto report = check_gradients(
        params, [&] { return loss_of(lstm.infer(xs)); },
        [&] {
          const auto hs = lstm.forward(xs);
          std::vector<Matrix> dhs;
          for (std::size_t t = 0; t < hs.size(); ++t) dhs.push_back(mse_loss(hs[t], ys[t]).grad);
          lstm.backward(dhs);
          if (opts.flip_sign) flip(params);
        },
        opts.check);
    out.push_back({"lstm_all_steps", std::move(report)});
  }

  {
    Lstm lower(4, 4, rng, "lstm0");
    Lstm upper(4, 4, rng, "lstm1");
    Dense head(4, 3, Activation::kSoftmax, rng, "head");
    std::vector<Matrix> xs;
    for (int t = 0; t < 5; ++t) xs.push_back(random_matrix(4, B, rng, 0.0, 1.0));
    const Matrix y = random_matrix(3, B, rng, 0.0, 1.0);
    ParamList params = lower.params();
    for (auto* p : upper.params()) params.push_back(p);
    for (auto* p : head.params()) params.push_back(p);
    auto report = check_gradients(
        params, [&] { return mse_loss(head.infer(upper.infer(lower.infer(xs)).back()), y).value; },
        [&] {
          const auto h2 = upper.forward(lower.forward(xs));
          const Matrix d = head.backward(mse_loss(head.forward(h2.back()), y).grad);
          std::vector<Matrix> dh2(h2.size(), Matrix::Zero(4, B));
          dh2.back() = d;
          lower.backward(upper.backward(dh2));
          if (opts.flip_sign) flip(params);
        },
        opts.check);
    out.push_back({"stacked_lstm_softmax", std::move(report)});
  }

  const int S = 6, A = 3;
  Mlp critic(S + A, {8, 8}, 1, Activation::kRelu, Activation::kLinear, rng, "critic");
  const Matrix s = random_matrix(S, B, rng);
  {
    const Matrix a = random_matrix(A, B, rng, 0.0, 1.0);
    const Matrix y = random_matrix(1, B, rng);
    const auto params = critic.params();
    auto report = check_gradients(
        params, [&] { return mse_loss(critic.infer(stack(s, a)), y).value; },
        [&] {
          critic.backward(mse_loss(critic.forward(stack(s, a)), y).grad);
          if (opts.flip_sign) flip(params);
        },
        opts.check);
    out.push_back({"critic_params", std::move(report)});
  }
  {
    Matrix a = random_matrix(A, B, rng, 0.0, 1.0);
    zero_grad(critic.params());
    critic.forward(stack(s, a));
    Matrix da = critic.backward(Matrix::Constant(1, B, 1.0 / static_cast<double>(B))).bottomRows(A);
    if (opts.flip_sign) da = -da;
    auto report = check_input_gradient(
        a, da, [&] { return critic.infer(stack(s, a)).mean(); }, "critic_action_input", opts.check);
    out.push_back({"critic_action_input", std::move(report)});
  }
  {
    Mlp actor(S, {8}, A, Activation::kRelu, Activation::kSigmoid, rng, "actor");
    const auto params = actor.params();
    auto report = check_gradients(
        params, [&] { return -critic.infer(stack(s, actor.infer(s))).mean(); },
        [&] {
          const Matrix a = actor.forward(s);
          critic.forward(stack(s, a));
          const Matrix dx = critic.backward(Matrix::Constant(1, B, -1.0 / static_cast<double>(B)));
          actor.backward(dx.bottomRows(A));
          if (opts.flip_sign) flip(params);
        },
        opts.check);
    out.push_back({"actor_through_critic", std::move(report)});
  }
  return out;
}

}  // namespace mecvr::nn

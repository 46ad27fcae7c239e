#include "mecvr/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mecvr::nn {

namespace {

void init_uniform(Matrix& m, double bound, Rng& rng) {
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = unif(rng);
}

Parameter make_param(std::string name, int rows, int cols, double bound, Rng& rng) {
  Parameter p{std::move(name), Matrix(rows, cols), Matrix::Zero(rows, cols)};
  init_uniform(p.value, bound, rng);
  return p;
}

Matrix sigmoid(const Matrix& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

void check_rows(const Matrix& x, Eigen::Index expected, const char* what) {
  if (x.rows() != expected)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expected) +
                                " rows, got " + std::to_string(x.rows()));
}

}  // namespace

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftmax: return "softmax";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  for (Activation a : {Activation::kLinear, Activation::kRelu, Activation::kTanh,
                       Activation::kSigmoid, Activation::kSoftmax})
    if (name == activation_name(a)) return a;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

Matrix activate(Activation a, const Matrix& pre) {
  switch (a) {
    case Activation::kLinear: return pre;
    case Activation::kRelu: return pre.cwiseMax(0.0);
    case Activation::kTanh: return pre.array().tanh().matrix();
    case Activation::kSigmoid: return sigmoid(pre);
    case Activation::kSoftmax: {
      Matrix out(pre.rows(), pre.cols());
      for (Eigen::Index j = 0; j < pre.cols(); ++j) {
        const double mx = pre.col(j).maxCoeff();
        out.col(j) = (pre.col(j).array() - mx).exp().matrix();
        out.col(j) /= out.col(j).sum();
      }
      return out;
    }
  }
  return pre;
}

Matrix activation_backward(Activation a, const Matrix& out, const Matrix& dout) {
  switch (a) {
    case Activation::kLinear: return dout;
    case Activation::kRelu: return (out.array() > 0.0).select(dout, 0.0);
    case Activation::kTanh: return (dout.array() * (1.0 - out.array().square())).matrix();
    case Activation::kSigmoid: return (dout.array() * out.array() * (1.0 - out.array())).matrix();
    case Activation::kSoftmax: {
      Matrix d(out.rows(), out.cols());
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        const double dot = out.col(j).dot(dout.col(j));
        d.col(j) = (out.col(j).array() * (dout.col(j).array() - dot)).matrix();
      }
      return d;
    }
  }
  return dout;
}

// ---------------------------------------------------------------- Dense

Dense::Dense(int in, int out, Activation act, Rng& rng, std::string name) : act_(act) {
  if (in < 1 || out < 1) throw std::invalid_argument("Dense: dimensions must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight_ = make_param(name + ".weight", out, in, bound, rng);
  bias_ = make_param(name + ".bias", out, 1, bound, rng);
}

Matrix Dense::infer(const Matrix& x) const {
  check_rows(x, weight_.value.cols(), "Dense input");
  Matrix pre = weight_.value * x;
  pre.colwise() += bias_.value.col(0);
  return activate(act_, pre);
}

Matrix Dense::forward(const Matrix& x) {
  x_ = x;
  y_ = infer(x);
  cached_ = true;
  return y_;
}

Matrix Dense::backward(const Matrix& dy) {
  if (!cached_) throw std::logic_error("Dense::backward without a cached forward pass");
  if (dy.rows() != y_.rows() || dy.cols() != y_.cols())
    throw std::invalid_argument("Dense::backward: gradient shape mismatch");
  const Matrix dpre = activation_backward(act_, y_, dy);
  weight_.grad.noalias() += dpre * x_.transpose();
  bias_.grad += dpre.rowwise().sum();
  return weight_.value.transpose() * dpre;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("Dropout: rate must lie in [0, 1)");
}

Matrix Dropout::forward(const Matrix& x, bool training, Rng& rng) {
  active_ = training && rate_ > 0.0;
  if (!active_) return x;
  std::bernoulli_distribution keep(1.0 - rate_);
  const double scale = 1.0 / (1.0 - rate_);
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) mask_(i, j) = keep(rng) ? scale : 0.0;
  return x.cwiseProduct(mask_);
}

Matrix Dropout::backward(const Matrix& dy) const { return active_ ? dy.cwiseProduct(mask_) : dy; }

Matrix dropout_apply(const Matrix& x, double rate, bool training, Rng& rng) {
  Dropout d(rate);
  return d.forward(x, training, rng);
}

// ---------------------------------------------------------------- Mlp

Mlp::Mlp(int in, const std::vector<int>& hidden, int out, Activation hidden_act,
         Activation out_act, Rng& rng, const std::string& name, double dropout) {
  int prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    layers_.emplace_back(prev, hidden[i], hidden_act, rng, name + ".l" + std::to_string(i));
    dropouts_.emplace_back(dropout);
    prev = hidden[i];
  }
  layers_.emplace_back(prev, out, out_act, rng, name + ".l" + std::to_string(hidden.size()));
}

Matrix Mlp::forward(const Matrix& x, bool training, Rng* rng) {
  if (training && !rng) throw std::invalid_argument("Mlp::forward: training mode needs an rng");
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i < dropouts_.size()) h = dropouts_[i].forward(h, training, *rng);
  }
  return h;
}

Matrix Mlp::infer(const Matrix& x) const {
  Matrix h = x;
  for (const auto& l : layers_) h = l.infer(h);
  return h;
}

Matrix Mlp::backward(const Matrix& dy) {
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    if (i < dropouts_.size()) g = dropouts_[i].backward(g);
    g = layers_[i].backward(g);
  }
  return g;
}

ParamList Mlp::params() {
  ParamList p;
  for (auto& l : layers_)
    for (auto* q : l.params()) p.push_back(q);
  return p;
}

ConstParamList Mlp::params() const {
  ConstParamList p;
  for (const auto& l : layers_)
    for (const auto* q : l.params()) p.push_back(q);
  return p;
}

// ---------------------------------------------------------------- Lstm

Lstm::Lstm(int in, int hidden, Rng& rng, std::string name) {
  if (in < 1 || hidden < 1) throw std::invalid_argument("Lstm: dimensions must be positive");
  w_x_ = make_param(name + ".w_x", 4 * hidden, in, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  const double bh = 1.0 / std::sqrt(static_cast<double>(hidden));
  w_h_ = make_param(name + ".w_h", 4 * hidden, hidden, bh, rng);
  b_ = make_param(name + ".bias", 4 * hidden, 1, bh, rng);
}

void Lstm::step(const Matrix& x, Matrix& h, Matrix& c) const {
  const Eigen::Index H = hidden();
  Matrix a = w_x_.value * x + w_h_.value * h;
  a.colwise() += b_.value.col(0);
  const Matrix i = sigmoid(a.topRows(H));
  const Matrix f = sigmoid(a.middleRows(H, H));
  const Matrix g = a.middleRows(2 * H, H).array().tanh().matrix();
  const Matrix o = sigmoid(a.bottomRows(H));
  c = f.cwiseProduct(c) + i.cwiseProduct(g);
  h = o.cwiseProduct(c.array().tanh().matrix());
}

std::vector<Matrix> Lstm::infer(const std::vector<Matrix>& xs) const {
  if (xs.empty()) throw std::invalid_argument("Lstm: empty sequence");
  const Eigen::Index B = xs.front().cols();
  Matrix h = Matrix::Zero(hidden(), B);
  Matrix c = Matrix::Zero(hidden(), B);
  std::vector<Matrix> hs;
  hs.reserve(xs.size());
  for (const auto& x : xs) {
    check_rows(x, in_dim(), "Lstm input");
    step(x, h, c);
    hs.push_back(h);
  }
  return hs;
}

std::vector<Matrix> Lstm::forward(const std::vector<Matrix>& xs) {
  if (xs.empty()) throw std::invalid_argument("Lstm: empty sequence");
  const Eigen::Index H = hidden();
  const Eigen::Index B = xs.front().cols();
  xs_ = xs;
  h_.assign(1, Matrix::Zero(H, B));
  c_.assign(1, Matrix::Zero(H, B));
  gates_.clear();
  std::vector<Matrix> hs;
  for (const auto& x : xs) {
    check_rows(x, in_dim(), "Lstm input");
    if (x.cols() != B) throw std::invalid_argument("Lstm: inconsistent batch width");
    Matrix a = w_x_.value * x + w_h_.value * h_.back();
    a.colwise() += b_.value.col(0);
    Matrix gates(4 * H, B);
    gates.topRows(H) = sigmoid(a.topRows(H));
    gates.middleRows(H, H) = sigmoid(a.middleRows(H, H));
    gates.middleRows(2 * H, H) = a.middleRows(2 * H, H).array().tanh().matrix();
    gates.bottomRows(H) = sigmoid(a.bottomRows(H));
    Matrix c = gates.middleRows(H, H).cwiseProduct(c_.back()) +
               gates.topRows(H).cwiseProduct(gates.middleRows(2 * H, H));
    Matrix h = gates.bottomRows(H).cwiseProduct(c.array().tanh().matrix());
    gates_.push_back(std::move(gates));
    c_.push_back(std::move(c));
    h_.push_back(h);
    hs.push_back(std::move(h));
  }
  cached_ = true;
  return hs;
}

std::vector<Matrix> Lstm::backward(const std::vector<Matrix>& dhs) {
  if (!cached_) throw std::logic_error("Lstm::backward without a cached forward pass");
  if (dhs.size() != xs_.size()) throw std::invalid_argument("Lstm::backward: sequence length mismatch");
  const Eigen::Index H = hidden();
  const Eigen::Index B = xs_.front().cols();
  std::vector<Matrix> dxs(xs_.size());
  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dc_next = Matrix::Zero(H, B);
  for (std::size_t t = xs_.size(); t-- > 0;) {
    const Matrix& gates = gates_[t];
    const auto i = gates.topRows(H).array();
    const auto f = gates.middleRows(H, H).array();
    const auto g = gates.middleRows(2 * H, H).array();
    const auto o = gates.bottomRows(H).array();
    const Eigen::ArrayXXd tanh_c = c_[t + 1].array().tanh();

    const Eigen::ArrayXXd dh = (dhs[t] + dh_next).array();
    const Eigen::ArrayXXd dc = dh * o * (1.0 - tanh_c.square()) + dc_next.array();

    Matrix da(4 * H, B);
    da.topRows(H) = (dc * g * i * (1.0 - i)).matrix();
    da.middleRows(H, H) = (dc * c_[t].array() * f * (1.0 - f)).matrix();
    da.middleRows(2 * H, H) = (dc * i * (1.0 - g.square())).matrix();
    da.bottomRows(H) = (dh * tanh_c * o * (1.0 - o)).matrix();

    w_x_.grad.noalias() += da * xs_[t].transpose();
    w_h_.grad.noalias() += da * h_[t].transpose();
    b_.grad += da.rowwise().sum();
    dxs[t] = w_x_.value.transpose() * da;
    dh_next = w_h_.value.transpose() * da;
    dc_next = (dc * f).matrix();
  }
  return dxs;
}

// ---------------------------------------------------------------- loss / optimiser

Loss mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw std::invalid_argument("mse_loss: shape mismatch");
  const double B = static_cast<double>(pred.cols());
  const Matrix diff = pred - target;
  return {diff.squaredNorm() / B, 2.0 * diff / B};
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be > 0");
}

void Adam::step(const ParamList& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.grad.rows() != m_[k].rows() || p.grad.cols() != m_[k].cols())
      throw std::invalid_argument("Adam: shape mismatch for " + p.name);
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * p.grad;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (m_[k].array() / bc1) / ((v_[k].array() / bc2).sqrt() + eps_);
  }
}

void zero_grad(const ParamList& params) {
  for (auto* p : params) p->grad.setZero();
}

void copy_params(const ConstParamList& from, const ParamList& to) {
  soft_update(from, to, 1.0);
}

void soft_update(const ConstParamList& online, const ParamList& target, double theta) {
  if (online.size() != target.size()) throw std::invalid_argument("soft_update: parameter count mismatch");
  for (std::size_t k = 0; k < online.size(); ++k) {
    const Matrix& src = online[k]->value;
    Matrix& dst = target[k]->value;
    if (src.rows() != dst.rows() || src.cols() != dst.cols())
      throw std::invalid_argument("soft_update: shape mismatch for " + online[k]->name);
    if (theta == 1.0)
      dst = src;
    else
      dst = theta * src + (1.0 - theta) * dst;
  }
}

bool all_finite(const ConstParamList& params) {
  for (const auto* p : params)
    if (!p->value.allFinite()) return false;
  return true;
}

double grad_norm(const ConstParamList& params) {
  double s = 0.0;
  for (const auto* p : params) s += p->grad.squaredNorm();
  return std::sqrt(s);
}

std::size_t parameter_count(const ConstParamList& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += static_cast<std::size_t>(p->value.size());
  return n;
}

}  // namespace mecvr::nn

#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

// Minimal differentiable layers. Batches are stored column-wise: an input
// of width `in` for B samples is an (in x B) matrix. Every layer caches what
// its backward pass needs during forward(); backward() accumulates into the
// parameter gradients and returns the gradient w.r.t. the layer input.
namespace mecvr::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

using ParamList = std::vector<Parameter*>;
using ConstParamList = std::vector<const Parameter*>;

enum class Activation { kLinear, kRelu, kTanh, kSigmoid, kSoftmax };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

/// Column-wise for softmax, elementwise otherwise.
Matrix activate(Activation a, const Matrix& pre);
/// Gradient w.r.t. the pre-activation given the activation output.
Matrix activation_backward(Activation a, const Matrix& out, const Matrix& dout);

class Dense {
public:
  Dense() = default;
  Dense(int in, int out, Activation act, Rng& rng, std::string name = "dense");

  Matrix forward(const Matrix& x);
  Matrix infer(const Matrix& x) const;
  Matrix backward(const Matrix& dy);

  int in_dim() const { return static_cast<int>(weight_.value.cols()); }
  int out_dim() const { return static_cast<int>(weight_.value.rows()); }
  Activation activation() const { return act_; }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  ParamList params() { return {&weight_, &bias_}; }
  ConstParamList params() const { return {&weight_, &bias_}; }

private:
  Parameter weight_;
  Parameter bias_;
  Activation act_ = Activation::kLinear;
  Matrix x_;
  Matrix y_;
  bool cached_ = false;
};

/// Inverted dropout: survivors are scaled by 1 / (1 - rate) during training,
/// identity at inference.
class Dropout {
public:
  explicit Dropout(double rate = 0.0);

  Matrix forward(const Matrix& x, bool training, Rng& rng);
  Matrix backward(const Matrix& dy) const;
  double rate() const { return rate_; }

private:
  double rate_;
  Matrix mask_;
  bool active_ = false;
};

Matrix dropout_apply(const Matrix& x, double rate, bool training, Rng& rng);

/// Stack of dense layers with optional dropout after each hidden layer.
class Mlp {
public:
  Mlp() = default;
  Mlp(int in, const std::vector<int>& hidden, int out, Activation hidden_act, Activation out_act,
      Rng& rng, const std::string& name = "mlp", double dropout = 0.0);

  Matrix forward(const Matrix& x, bool training = false, Rng* rng = nullptr);
  Matrix infer(const Matrix& x) const;
  Matrix backward(const Matrix& dy);

  int in_dim() const { return layers_.front().in_dim(); }
  int out_dim() const { return layers_.back().out_dim(); }
  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  ParamList params();
  ConstParamList params() const;

private:
  std::vector<Dense> layers_;
  std::vector<Dropout> dropouts_;
};

/// Single LSTM layer (gate order: input, forget, candidate, output). The
/// carried (h, c) state starts from zero for every sequence.
class Lstm {
public:
  Lstm() = default;
  Lstm(int in, int hidden, Rng& rng, std::string name = "lstm");

  /// xs[t] is (in x B); returns hs[t] (hidden x B).
  std::vector<Matrix> forward(const std::vector<Matrix>& xs);
  std::vector<Matrix> infer(const std::vector<Matrix>& xs) const;
  /// dhs[t] is the loss gradient w.r.t. hs[t]; returns gradients w.r.t. xs.
  std::vector<Matrix> backward(const std::vector<Matrix>& dhs);

  int in_dim() const { return static_cast<int>(w_x_.value.cols()); }
  int hidden() const { return static_cast<int>(w_h_.value.cols()); }
  const Matrix& final_cell() const { return c_.back(); }

  ParamList params() { return {&w_x_, &w_h_, &b_}; }
  ConstParamList params() const { return {&w_x_, &w_h_, &b_}; }

  /// One recurrence step, exposed for reference checks.
  void step(const Matrix& x, Matrix& h, Matrix& c) const;

private:
  Parameter w_x_;  // 4H x in
  Parameter w_h_;  // 4H x H
  Parameter b_;    // 4H x 1
  std::vector<Matrix> xs_, h_, c_, gates_;  // h_[0], c_[0] are the zero initial state
  bool cached_ = false;
};

struct Loss {
  double value = 0.0;
  Matrix grad;
};

/// (1/B) * sum over samples of the squared Euclidean error.
Loss mse_loss(const Matrix& pred, const Matrix& target);

/// Adam with bias correction. Moments are created on the first step and
/// must keep matching the parameter shapes afterwards.
class Adam {
public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(const ParamList& params);

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_, v_;
};

void zero_grad(const ParamList& params);
void copy_params(const ConstParamList& from, const ParamList& to);
/// target <- theta * online + (1 - theta) * target
void soft_update(const ConstParamList& online, const ParamList& target, double theta);
bool all_finite(const ConstParamList& params);
double grad_norm(const ConstParamList& params);
std::size_t parameter_count(const ConstParamList& params);

inline ConstParamList as_const(const ParamList& p) { return {p.begin(), p.end()}; }

}  // namespace mecvr::nn

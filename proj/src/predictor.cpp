#include "mecvr/predictor.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace mecvr {

void PredictorConfig::validate() const {
  if (window < 1) throw std::invalid_argument("predictor window must be >= 1");
  if (hidden < 1) throw std::invalid_argument("predictor hidden width must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("predictor learning rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("predictor dropout must lie in [0, 1)");
  if (batch < 1) throw std::invalid_argument("predictor batch must be >= 1");
  if (trace_length <= window) throw std::invalid_argument("predictor trace_length must exceed the window");
}

std::vector<double> encode_request(const TileGrid& grid, int k) {
  std::vector<double> v(static_cast<std::size_t>(grid.tile_count()), 0.0);
  for (TileId t : grid.fov_tiles(k)) v[static_cast<std::size_t>(t - 1)] = 1.0;
  return v;
}

Trace generate_trace(const std::vector<double>& gamma_space, const Matrix2D& transition, int K,
                     std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, gamma_space.size() - 1);
  MarkovZipfProcess chain(gamma_space, transition, pick(rng));
  std::vector<ZipfPmf> pmfs;
  for (double g : gamma_space) pmfs.push_back(zipf_pmf(g, K));

  Trace trace;
  trace.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) chain.advance(rng);
    const ZipfPmf& pmf = pmfs[chain.state()];
    trace.push_back({sample_request(pmf, rng), pmf.probabilities});
  }
  return trace;
}

std::vector<PredictorSample> build_dataset(const Trace& trace, std::size_t window) {
  if (window < 1 || trace.size() <= window)
    throw std::invalid_argument("trace of length " + std::to_string(trace.size()) +
                                " is too short for window " + std::to_string(window));
  std::vector<PredictorSample> out;
  out.reserve(trace.size() - window);
  for (std::size_t end = window; end < trace.size(); ++end) {
    PredictorSample s;
    for (std::size_t i = end - window; i < end; ++i) s.window.push_back(trace[i].request);
    s.label = trace[end].pmf;
    out.push_back(std::move(s));
  }
  return out;
}

double pmf_mse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("pmf_mse: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

PopularityPredictor::PopularityPredictor(TileGrid grid, PredictorConfig cfg, std::uint64_t seed)
    : grid_(std::move(grid)), cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const int N = grid_.tile_count();
  const int K = grid_.viewpoint_count();
  for (int k = 1; k <= K; ++k) encodings_.push_back(encode_request(grid_, k));
  lower_ = nn::Lstm(N, cfg_.hidden, rng, "predictor.lstm0");
  upper_ = nn::Lstm(cfg_.hidden, cfg_.hidden, rng, "predictor.lstm1");
  head_ = nn::Dense(cfg_.hidden, K, nn::Activation::kSoftmax, rng, "predictor.head");
}

void PopularityPredictor::check_window(const std::vector<int>& window) const {
  if (window.size() != cfg_.window)
    throw std::invalid_argument("predictor needs a window of " + std::to_string(cfg_.window) +
                                " requests, got " + std::to_string(window.size()));
  for (int k : window)
    if (k < 1 || k > static_cast<int>(encodings_.size()))
      throw std::invalid_argument("request " + std::to_string(k) + " out of range");
}

std::vector<nn::Matrix> PopularityPredictor::encode_batch(
    const std::vector<const PredictorSample*>& batch) const {
  const auto B = static_cast<Eigen::Index>(batch.size());
  std::vector<nn::Matrix> xs(cfg_.window, nn::Matrix::Zero(grid_.tile_count(), B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& w = batch[static_cast<std::size_t>(b)]->window;
    check_window(w);
    for (std::size_t t = 0; t < cfg_.window; ++t) {
      const auto& e = encodings_[static_cast<std::size_t>(w[t] - 1)];
      xs[t].col(b) = Eigen::Map<const nn::Vector>(e.data(), static_cast<Eigen::Index>(e.size()));
    }
  }
  return xs;
}

std::vector<double> PopularityPredictor::predict(const std::vector<int>& window) const {
  check_window(window);
  PredictorSample s{window, {}};
  const std::vector<const PredictorSample*> one{&s};
  const auto hs = upper_.infer(lower_.infer(encode_batch(one)));
  const nn::Matrix p = head_.infer(hs.back());
  return {p.data(), p.data() + p.size()};
}

double PopularityPredictor::evaluate(const std::vector<PredictorSample>& samples) const {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty sample set");
  double total = 0.0;
  for (const auto& s : samples) total += pmf_mse(predict(s.window), s.label);
  return total / static_cast<double>(samples.size());
}

double PopularityPredictor::train_step(const std::vector<const PredictorSample*>& batch, nn::Adam& opt,
                                       nn::Rng& rng) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  const auto B = static_cast<Eigen::Index>(batch.size());
  const int K = output_size();
  nn::Matrix target(K, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& label = batch[static_cast<std::size_t>(b)]->label;
    if (static_cast<int>(label.size()) != K) throw std::invalid_argument("label length mismatch");
    target.col(b) = Eigen::Map<const nn::Vector>(label.data(), K);
  }

  const auto params_list = params();
  nn::zero_grad(params_list);

  const std::size_t T = cfg_.window;
  std::vector<nn::Dropout> mid(T, nn::Dropout(cfg_.dropout));
  nn::Dropout top(cfg_.dropout);

  auto h1 = lower_.forward(encode_batch(batch));
  for (std::size_t t = 0; t < T; ++t) h1[t] = mid[t].forward(h1[t], true, rng);
  const auto h2 = upper_.forward(h1);
  const nn::Matrix pred = head_.forward(top.forward(h2.back(), true, rng));

  // Elementwise mean over K so the scale matches pmf_mse.
  nn::Loss loss = nn::mse_loss(pred, target);
  loss.value /= K;
  loss.grad /= K;

  std::vector<nn::Matrix> dh2(T, nn::Matrix::Zero(cfg_.hidden, B));
  dh2.back() = top.backward(head_.backward(loss.grad));
  auto dh1 = upper_.backward(dh2);
  for (std::size_t t = 0; t < T; ++t) dh1[t] = mid[t].backward(dh1[t]);
  lower_.backward(dh1);

  opt.step(params_list);
  if (!nn::all_finite(nn::as_const(params_list)))
    throw std::runtime_error("predictor parameters became non-finite");
  return loss.value;
}

nn::ParamList PopularityPredictor::params() {
  nn::ParamList p = lower_.params();
  for (auto* q : upper_.params()) p.push_back(q);
  for (auto* q : head_.params()) p.push_back(q);
  return p;
}

nn::ConstParamList PopularityPredictor::params() const {
  nn::ConstParamList p = lower_.params();
  for (const auto* q : upper_.params()) p.push_back(q);
  for (const auto* q : head_.params()) p.push_back(q);
  return p;
}

PredictorTrainReport train_predictor(PopularityPredictor& model,
                                     const std::vector<PredictorSample>& dataset,
                                     std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("train_predictor: empty dataset");
  const auto& cfg = model.config();
  nn::Rng rng(seed);
  nn::Adam opt(cfg.learning_rate);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  PredictorTrainReport report;
  while (report.iterations < cfg.iterations) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size() && report.iterations < cfg.iterations;
         start += cfg.batch) {
      std::vector<const PredictorSample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch); ++i)
        batch.push_back(&dataset[order[i]]);
      sum += model.train_step(batch, opt, rng);
      ++batches;
      ++report.iterations;
    }
    report.epoch_loss.push_back(sum / static_cast<double>(batches));
  }
  return report;
}

PopularityHook make_popularity_hook(std::shared_ptr<const PopularityPredictor> model) {
  if (!model) throw std::invalid_argument("make_popularity_hook: null model");
  return [model](const std::vector<int>& window) { return model->predict(window); };
}

}  // namespace mecvr

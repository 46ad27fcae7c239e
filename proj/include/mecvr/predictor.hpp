#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "mecvr/environment.hpp"
#include "mecvr/nn.hpp"
#include "mecvr/popularity.hpp"
#include "mecvr/tiling.hpp"

namespace mecvr {

struct PredictorConfig {
  std::size_t window = 20;
  int hidden = 64;
  double learning_rate = 1e-5;
  double dropout = 0.35;
  std::size_t batch = 32;
  std::size_t iterations = 1750;
  /// Length of the simulated trace used for pre-training.
  std::size_t trace_length = 5000;

  void validate() const;
};

/// Tile-membership indicator of the viewpoint's FoV (length N, Z ones).
std::vector<double> encode_request(const TileGrid& grid, int k);

struct TraceEntry {
  int request = 0;
  /// Ground-truth pmf the request was drawn from.
  std::vector<double> pmf;
};
using Trace = std::vector<TraceEntry>;

/// Simulated request stream from the Markov-modulated Zipf process, starting
/// in a uniformly drawn chain state.
Trace generate_trace(const std::vector<double>& gamma_space, const Matrix2D& transition, int K,
                     std::size_t length, std::uint64_t seed);

struct PredictorSample {
  std::vector<int> window;    // T_r requests, oldest first
  std::vector<double> label;  // pmf of the slot after the window
};

/// Sliding windows: a trace of length L yields L - window samples.
std::vector<PredictorSample> build_dataset(const Trace& trace, std::size_t window);

/// Mean over entries of the squared difference.
double pmf_mse(const std::vector<double>& a, const std::vector<double>& b);

/// Two stacked LSTM layers feeding a softmax head over the K viewpoints.
class PopularityPredictor {
public:
  PopularityPredictor(TileGrid grid, PredictorConfig cfg, std::uint64_t seed);

  /// Requires exactly `window` requests, oldest first.
  std::vector<double> predict(const std::vector<int>& window) const;

  /// One Adam step on the batch mean of the squared error; returns the
  /// pre-step loss.
  double train_step(const std::vector<const PredictorSample*>& batch, nn::Adam& opt, nn::Rng& rng);
  /// Loss on the batch without dropout and without touching gradients.
  double evaluate(const std::vector<PredictorSample>& samples) const;

  nn::ParamList params();
  nn::ConstParamList params() const;

  const PredictorConfig& config() const { return cfg_; }
  const TileGrid& grid() const { return grid_; }
  int output_size() const { return head_.out_dim(); }

private:
  std::vector<nn::Matrix> encode_batch(const std::vector<const PredictorSample*>& batch) const;
  void check_window(const std::vector<int>& window) const;

  TileGrid grid_;
  PredictorConfig cfg_;
  std::vector<std::vector<double>> encodings_;  // index k-1
  nn::Lstm lower_;
  nn::Lstm upper_;
  nn::Dense head_;
};

struct PredictorTrainReport {
  std::vector<double> epoch_loss;
  std::size_t iterations = 0;
};

/// Minibatch Adam over reshuffled epochs until cfg.iterations updates.
PredictorTrainReport train_predictor(PopularityPredictor& model,
                                     const std::vector<PredictorSample>& dataset,
                                     std::uint64_t seed);

/// Popularity hook backed by a frozen model.
PopularityHook make_popularity_hook(std::shared_ptr<const PopularityPredictor> model);

}  // namespace mecvr

#pragma once

#include <cstddef>
#include <deque>
#include <random>
#include <vector>

namespace mecvr {

using Rng = std::mt19937_64;

struct ZipfPmf {
  double gamma = 0.0;
  std::vector<double> probabilities;  // index 0 holds p_1

  int size() const { return static_cast<int>(probabilities.size()); }
};

/// p_k = k^-gamma / sum_l l^-gamma for k = 1..K.
ZipfPmf zipf_pmf(double gamma, int K);

/// Draws a 1-based index k with probability pmf[k-1].
int sample_request(const std::vector<double>& pmf, Rng& rng);
inline int sample_request(const ZipfPmf& pmf, Rng& rng) {
  return sample_request(pmf.probabilities, rng);
}

using Matrix2D = std::vector<std::vector<double>>;

/// Row-stochastic matrix with i.i.d. uniform(0,1) entries normalised per row.
Matrix2D random_transition_matrix(std::size_t states, Rng& rng);

/// Hidden Zipf exponent evolving on a finite Markov chain; one transition
/// per slot.
class MarkovZipfProcess {
public:
  MarkovZipfProcess(std::vector<double> gamma_space, Matrix2D transition,
                    std::size_t initial_state = 0);

  const std::vector<double>& gamma_space() const { return gamma_space_; }
  const Matrix2D& transition() const { return transition_; }
  std::size_t state() const { return current_; }
  double gamma() const { return gamma_space_[current_]; }
  std::size_t state_count() const { return gamma_space_.size(); }

  void set_state(std::size_t s);
  /// Samples the next state from the current row; returns the new exponent.
  double advance(Rng& rng);

private:
  std::vector<double> gamma_space_;
  Matrix2D transition_;
  std::size_t current_;
};

/// FIFO of the last T_r viewpoint requests.
class RequestRecorder {
public:
  explicit RequestRecorder(std::size_t capacity);

  void record(int k);
  void clear() { window_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return window_.size(); }
  bool full() const { return window_.size() == capacity_; }
  /// Oldest first.
  std::vector<int> window() const { return {window_.begin(), window_.end()}; }
  int latest() const { return window_.back(); }

private:
  std::size_t capacity_;
  std::deque<int> window_;
};

/// Fraction of each viewpoint 1..K in the window.
std::vector<double> empirical_frequencies(const std::vector<int>& window, int K);

}  // namespace mecvr

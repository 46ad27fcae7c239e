#include "mecvr/popularity.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mecvr {

ZipfPmf zipf_pmf(double gamma, int K) {
  if (K < 1) throw std::domain_error("zipf_pmf: K must be >= 1");
  if (!(gamma >= 0.0)) throw std::domain_error("zipf_pmf: gamma must be >= 0");
  ZipfPmf pmf;
  pmf.gamma = gamma;
  pmf.probabilities.resize(static_cast<std::size_t>(K));
  for (int k = 1; k <= K; ++k) pmf.probabilities[k - 1] = std::pow(static_cast<double>(k), -gamma);
  // Summing smallest-first keeps the normaliser accurate for large K.
  double norm = 0.0;
  for (int k = K; k >= 1; --k) norm += pmf.probabilities[k - 1];
  for (auto& p : pmf.probabilities) p /= norm;
  return pmf;
}

int sample_request(const std::vector<double>& pmf, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    acc += pmf[k];
    if (u < acc) return static_cast<int>(k) + 1;
  }
  // Rounding left u above the final partial sum: return the last non-zero entry.
  for (std::size_t k = pmf.size(); k-- > 0;)
    if (pmf[k] > 0.0) return static_cast<int>(k) + 1;
  throw std::domain_error("sample_request: pmf has no mass");
}

Matrix2D random_transition_matrix(std::size_t states, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix2D m(states, std::vector<double>(states));
  for (auto& row : m) {
    for (auto& v : row) v = unif(rng);
    const double s = std::accumulate(row.begin(), row.end(), 0.0);
    for (auto& v : row) v /= s;
  }
  return m;
}

MarkovZipfProcess::MarkovZipfProcess(std::vector<double> gamma_space, Matrix2D transition,
                                     std::size_t initial_state)
    : gamma_space_(std::move(gamma_space)), transition_(std::move(transition)), current_(0) {
  const std::size_t n = gamma_space_.size();
  if (n == 0) throw std::invalid_argument("MarkovZipfProcess: empty gamma space");
  if (transition_.size() != n)
    throw std::invalid_argument("MarkovZipfProcess: transition matrix must be |G| x |G|");
  for (const auto& row : transition_) {
    if (row.size() != n)
      throw std::invalid_argument("MarkovZipfProcess: transition matrix must be |G| x |G|");
    double s = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw std::invalid_argument("MarkovZipfProcess: negative transition entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("MarkovZipfProcess: transition rows must sum to 1");
  }
  for (double g : gamma_space_)
    if (!(g >= 0.0)) throw std::invalid_argument("MarkovZipfProcess: exponents must be >= 0");
  set_state(initial_state);
}

void MarkovZipfProcess::set_state(std::size_t s) {
  if (s >= gamma_space_.size()) throw std::out_of_range("MarkovZipfProcess: state out of range");
  current_ = s;
}

double MarkovZipfProcess::advance(Rng& rng) {
  current_ = static_cast<std::size_t>(sample_request(transition_[current_], rng) - 1);
  return gamma();
}

RequestRecorder::RequestRecorder(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("RequestRecorder: capacity must be >= 1");
}

void RequestRecorder::record(int k) {
  if (window_.size() == capacity_) window_.pop_front();
  window_.push_back(k);
}

std::vector<double> empirical_frequencies(const std::vector<int>& window, int K) {
  std::vector<double> f(static_cast<std::size_t>(K), 0.0);
  if (window.empty()) return f;
  for (int k : window) f.at(static_cast<std::size_t>(k - 1)) += 1.0;
  for (auto& v : f) v /= static_cast<double>(window.size());
  return f;
}

}  // namespace mecvr

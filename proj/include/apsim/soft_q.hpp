#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "apsim/distribution.hpp"
#include "apsim/mlp.hpp"
#include "apsim/rng.hpp"

namespace apsim {

/// sigma * log sum exp(q / sigma), stable for small sigma.
template <std::size_t N>
double soft_value(const std::array<double, N>& q, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("soft_value: sigma must be positive");
  const double top = *std::max_element(q.begin(), q.end());
  double sum = 0.0;
  for (double x : q) sum += std::exp((x - top) / sigma);
  return top + sigma * std::log(sum);
}

/// Boltzmann policy exp((q - V) / sigma).
template <std::size_t N>
Distribution<N> soft_policy(const std::array<double, N>& q, double sigma) {
  const double v = soft_value(q, sigma);
  std::array<double, N> w{};
  for (std::size_t i = 0; i < N; ++i) w[i] = std::exp((q[i] - v) / sigma);
  return normalized(w);
}

template <std::size_t In>
struct Transition {
  std::array<double, In> features{};
  std::size_t action = 0;
  double reward = 0.0;
  std::array<double, In> next_features{};
  bool terminal = false;
};

/// Fixed-capacity FIFO ring buffer.
template <class T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  void push(const T& item) {
    if (items_.size() < capacity_) {
      items_.push_back(item);
    } else {
      items_[head_] = item;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// i = 0 is the oldest stored item.
  const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  const T& sample(Rng& rng) const { return items_[rng.below(items_.size())]; }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<T> items_;
};

struct SoftQConfig {
  double learning_rate = 5e-4;
  std::size_t batch_size = 50;
  std::size_t buffer_capacity = 1'000'000;
  long epochs = 100'000;  // gradient steps
  std::size_t warmup = 1000;
  double tau = 0.01;
  double sigma = 0.25;
  double gamma = 0.95;
  std::vector<int> hidden = {64, 128, 64};

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
    if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
    if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  }
};

/// Q-network over In features and Out discrete actions with its temperature.
template <std::size_t In, std::size_t Out>
struct SoftQNetwork {
  Mlp net;
  double sigma = 0.25;

  static std::vector<int> shape(const std::vector<int>& hidden) {
    std::vector<int> sizes{static_cast<int>(In)};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(static_cast<int>(Out));
    return sizes;
  }

  std::array<double, Out> q_values(const std::array<double, In>& features) const {
    const std::vector<double> out = net.forward(features);
    std::array<double, Out> q{};
    std::copy(out.begin(), out.end(), q.begin());
    return q;
  }

  Distribution<Out> policy(const std::array<double, In>& features) const {
    return soft_policy(q_values(features), sigma);
  }

  double value(const std::array<double, In>& features) const {
    return soft_value(q_values(features), sigma);
  }
};

/// Bootstrapped soft Bellman target computed with the target network.
template <std::size_t In, std::size_t Out>
double td_target(const Transition<In>& tr, const SoftQNetwork<In, Out>& target, double gamma) {
  if (tr.terminal) return tr.reward;
  return tr.reward + gamma * target.value(tr.next_features);
}

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step) : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Online network, EMA target network, replay buffer and Adam state for
/// semi-gradient soft-Q regression with an L1 loss.
template <std::size_t In, std::size_t Out>
class SoftQLearner {
 public:
  SoftQLearner(const SoftQConfig& config, std::uint64_t init_seed, std::uint64_t batch_seed)
      : config_(config), buffer_(config.buffer_capacity), batch_rng_(batch_seed) {
    config_.validate();
    online_.net = Mlp(SoftQNetwork<In, Out>::shape(config_.hidden));
    online_.sigma = config_.sigma;
    Rng init(init_seed);
    online_.net.randomize(init);
    target_ = online_;
    adam_ = Adam(online_.net.parameter_count(), config_.learning_rate);
    grad_.assign(online_.net.parameter_count(), 0.0);
  }

  const SoftQNetwork<In, Out>& online() const { return online_; }
  const SoftQNetwork<In, Out>& target() const { return target_; }
  const ReplayBuffer<Transition<In>>& buffer() const { return buffer_; }
  const SoftQConfig& config() const { return config_; }
  long steps() const { return steps_; }

  void observe(const Transition<In>& tr) { buffer_.push(tr); }

  bool ready() const { return buffer_.size() >= std::max(config_.warmup, config_.batch_size); }

  /// One minibatch gradient step followed by the target update. Returns the mean L1 loss.
  double train_step() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
    const double inv_batch = 1.0 / static_cast<double>(config_.batch_size);
    double loss = 0.0;
    for (std::size_t k = 0; k < config_.batch_size; ++k) {
      const Transition<In>& tr = buffer_.sample(batch_rng_);
      const double y = td_target(tr, target_, config_.gamma);
      online_.net.forward(tr.features, ws_);
      const double q = ws_.values.back()[tr.action];
      const double err = q - y;
      loss += std::abs(err) * inv_batch;
      std::array<double, Out> dq{};
      dq[tr.action] = (err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0)) * inv_batch;
      online_.net.backward(ws_, dq, grad_);
    }
    if (!std::isfinite(loss)) {
      throw DivergenceError("soft-Q training diverged: non-finite loss at step " +
                                std::to_string(steps_),
                            steps_);
    }
    adam_.step(online_.net.parameters(), grad_);
    ema_update(target_.net, online_.net, config_.tau);
    ++steps_;
    return loss;
  }

 private:
  SoftQConfig config_;
  SoftQNetwork<In, Out> online_;
  SoftQNetwork<In, Out> target_;
  ReplayBuffer<Transition<In>> buffer_;
  Adam adam_;
  Rng batch_rng_;
  std::vector<double> grad_;
  Mlp::Workspace ws_;
  long steps_ = 0;
};

struct TrainingReport {
  long gradient_steps = 0;
  long episodes = 0;
  std::vector<double> loss_trace;  // mean L1 loss per block of 1000 steps
};

/// Sub-stream tags of a training run.
enum class TrainingStream : std::uint64_t { Environment = 1, Initialization = 2, Minibatch = 3 };

/// Shared episode/update loop. `play` simulates one episode with the given
/// online network and environment stream and returns its transitions; every
/// stored transition is followed by one gradient step once the warmup is
/// filled, until `epochs` steps have been taken.
template <std::size_t In, std::size_t Out, class PlayEpisode>
SoftQNetwork<In, Out> run_soft_q_training(const SoftQConfig& config, std::uint64_t seed,
                                          PlayEpisode&& play, TrainingReport* report = nullptr) {
  SoftQLearner<In, Out> learner(
      config, derive_seed(seed, static_cast<std::uint64_t>(TrainingStream::Initialization)),
      derive_seed(seed, static_cast<std::uint64_t>(TrainingStream::Minibatch)));
  Rng env(derive_seed(seed, static_cast<std::uint64_t>(TrainingStream::Environment)));
  TrainingReport local;
  double block_loss = 0.0;
  long block_count = 0;
  while (learner.steps() < config.epochs) {
    const std::vector<Transition<In>> transitions = play(learner.online(), env);
    if (transitions.empty()) throw std::logic_error("run_soft_q_training: episode produced no transitions");
    ++local.episodes;
    for (const auto& tr : transitions) {
      learner.observe(tr);
      if (!learner.ready() || learner.steps() >= config.epochs) continue;
      block_loss += learner.train_step();
      if (++block_count == 1000) {
        local.loss_trace.push_back(block_loss / static_cast<double>(block_count));
        block_loss = 0.0;
        block_count = 0;
      }
    }
  }
  local.gradient_steps = learner.steps();
  if (report) *report = std::move(local);
  return learner.online();
}

}  // namespace apsim

#pragma once

#include <cstdint>
#include <cstring>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bcqforge/data/cohort.hpp"
#include "bcqforge/error.hpp"
#include "bcqforge/nn/tensor.hpp"
#include "bcqforge/random.hpp"

namespace bcqforge::data {

/// A trajectory after encoding: one latent state per bin plus its logged actions and rewards.
struct EncodedTrajectory {
  std::size_t trajectory = 0;  // index into the source Cohort
  nn::Tensor states;           // [T, H]
  std::vector<int> actions;    // T − 1
  std::vector<double> rewards; // T − 1

  std::size_t length() const { return states.rows(); }
};

using EncodeFn = std::function<nn::Tensor(const Trajectory&)>;
using RewardFn = std::function<std::vector<double>(const Trajectory&)>;

inline std::vector<EncodedTrajectory> encode_split(const Cohort& cohort, Split split, const EncodeFn& encode,
                                                   const RewardFn& reward) {
  std::vector<EncodedTrajectory> out;
  for (std::size_t i : cohort.indices(split)) {
    const Trajectory& t = cohort.trajectories[i];
    EncodedTrajectory e{i, encode(t), t.actions, reward(t)};
    if (e.states.rows() != t.length()) throw ConfigError("encoder returned wrong number of states");
    if (e.rewards.size() != t.num_transitions()) throw ConfigError("reward function returned wrong number of rewards");
    out.push_back(std::move(e));
  }
  return out;
}

struct Transition {
  std::span<const double> state;
  int action = 0;
  double reward = 0.0;
  std::span<const double> next_state;
  bool done = false;
  std::size_t trajectory = 0;
};

struct Minibatch {
  nn::Tensor states;       // [B, H]
  nn::Tensor next_states;  // [B, H]
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  std::vector<std::size_t> indices;  // buffer rows

  std::size_t size() const { return actions.size(); }
};

/// Offline transition store. Immutable once built; sampling goes through BufferSampler.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;

  /// One transition per consecutive bin pair; the last one of each trajectory is terminal.
  /// Trajectories with fewer than two bins contribute nothing and are reported in `warnings`.
  static ReplayBuffer from_encoded(const std::vector<EncodedTrajectory>& trajectories,
                                   std::vector<std::string>* warnings = nullptr) {
    ReplayBuffer b;
    for (const auto& e : trajectories) {
      if (e.length() < 2) {
        if (warnings) warnings->push_back("trajectory " + std::to_string(e.trajectory) + " has T < 2; skipped");
        continue;
      }
      if (b.dim_ == 0) b.dim_ = e.states.cols();
      if (e.states.cols() != b.dim_) throw ConfigError("replay buffer: inconsistent state width");
      const std::size_t n = e.length() - 1;
      for (std::size_t t = 0; t < n; ++t) {
        auto s = e.states.row_span(t);
        auto s2 = e.states.row_span(t + 1);
        b.states_.insert(b.states_.end(), s.begin(), s.end());
        b.next_states_.insert(b.next_states_.end(), s2.begin(), s2.end());
        b.actions_.push_back(e.actions.at(t));
        b.rewards_.push_back(e.rewards.at(t));
        b.dones_.push_back(t + 1 == n ? 1 : 0);
        b.trajectory_.push_back(e.trajectory);
      }
    }
    return b;
  }

  /// Direct construction from parallel arrays (states are row-major [N, dim]).
  static ReplayBuffer from_arrays(std::size_t dim, std::vector<double> states, std::vector<int> actions,
                                  std::vector<double> rewards, std::vector<double> next_states,
                                  std::vector<std::uint8_t> dones, std::vector<std::size_t> trajectory = {}) {
    ReplayBuffer b;
    b.dim_ = dim;
    const std::size_t n = actions.size();
    if (states.size() != n * dim || next_states.size() != n * dim || rewards.size() != n || dones.size() != n) {
      throw ConfigError("replay buffer: array sizes disagree");
    }
    if (trajectory.empty()) trajectory.assign(n, 0);
    b.states_ = std::move(states);
    b.next_states_ = std::move(next_states);
    b.actions_ = std::move(actions);
    b.rewards_ = std::move(rewards);
    b.dones_ = std::move(dones);
    b.trajectory_ = std::move(trajectory);
    return b;
  }

  std::size_t size() const { return actions_.size(); }
  bool empty() const { return actions_.empty(); }
  std::size_t state_dim() const { return dim_; }

  Transition at(std::size_t i) const {
    return {{states_.data() + i * dim_, dim_}, actions_.at(i), rewards_.at(i),
            {next_states_.data() + i * dim_, dim_}, dones_.at(i) != 0, trajectory_.at(i)};
  }

  std::span<const double> states() const { return states_; }
  std::span<const double> next_states() const { return next_states_; }
  std::span<const int> actions() const { return actions_; }

  Minibatch gather(const std::vector<std::size_t>& idx) const {
    Minibatch mb;
    mb.states = nn::Tensor::matrix(idx.size(), dim_);
    mb.next_states = nn::Tensor::matrix(idx.size(), dim_);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const std::size_t i = idx[r];
      std::memcpy(mb.states.values().data() + r * dim_, states_.data() + i * dim_, dim_ * sizeof(double));
      std::memcpy(mb.next_states.values().data() + r * dim_, next_states_.data() + i * dim_, dim_ * sizeof(double));
      mb.actions.push_back(static_cast<std::size_t>(actions_[i]));
      mb.rewards.push_back(rewards_[i]);
      mb.dones.push_back(dones_[i]);
    }
    mb.indices = idx;
    return mb;
  }

  /// FNV-1a over every stored byte.
  std::uint64_t content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* c = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) {
        h ^= c[i];
        h *= 1099511628211ULL;
      }
    };
    mix(states_.data(), states_.size() * sizeof(double));
    mix(next_states_.data(), next_states_.size() * sizeof(double));
    mix(actions_.data(), actions_.size() * sizeof(int));
    mix(rewards_.data(), rewards_.size() * sizeof(double));
    mix(dones_.data(), dones_.size());
    return h;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<double> states_;
  std::vector<double> next_states_;
  std::vector<int> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> dones_;
  std::vector<std::size_t> trajectory_;
};

/// Uniform sampling with replacement from a buffer it does not own.
class BufferSampler {
 public:
  BufferSampler(const ReplayBuffer& buffer, std::uint64_t seed) : buffer_(&buffer), rng_(seed) {
    if (buffer.empty()) throw InputError("replay buffer is empty");
  }

  std::vector<std::size_t> sample_indices(std::size_t batch) {
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = uniform_index(rng_, buffer_->size());
    return idx;
  }

  Minibatch sample(std::size_t batch) { return buffer_->gather(sample_indices(batch)); }

 private:
  const ReplayBuffer* buffer_;
  Rng rng_;
};

/// Encodes the train split and flattens it into transitions.
inline ReplayBuffer build_buffer(const Cohort& cohort, const EncodeFn& encode, const RewardFn& reward,
                                 std::vector<std::string>* warnings = nullptr) {
  return ReplayBuffer::from_encoded(encode_split(cohort, Split::train, encode, reward), warnings);
}

}  // namespace bcqforge::data

#pragma once

// Baseline learners: n-step advantage actor-critic, PPO, and Double-DQN with
// a uniform FIFO replay buffer. The loss kernels here are shared with the
// decoupled trainers.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/SparseCore>

#include "derl/nn.hpp"

namespace derl {

/// One environment step. behavior_prob is pi_beta(a|s) at collection time.
struct Transition {
  Vec state;
  int action = 0;
  double reward_ext = 0.0;
  double reward_train = 0.0;
  Vec next_state;
  bool done = false;
  double behavior_prob = 1.0;
};

/// n_steps x K transitions. Column/element t * num_envs + k holds step t of
/// lane k.
struct RolloutBatch {
  int n_steps = 0;
  int num_envs = 0;
  Mat states;
  std::vector<int> actions;
  Vec rewards;      // training reward (combined for baselines)
  Vec rewards_ext;  // extrinsic only
  Mat next_states;  // terminal observation on done steps
  std::vector<bool> dones;
  Vec behavior_probs;  // pi_beta(a_t|s_t)
  Mat behavior_dists;  // full pi_beta(.|s_t), one column per step
  Vec bootstrap_values;  // V(s_{t+n}) per lane

  int size() const { return n_steps * num_envs; }
  int index(int t, int lane) const { return t * num_envs + lane; }
  Transition transition(int i) const;
};

/// Discounted n-step targets per element, bootstrapping from the lane's
/// bootstrap value and never across a done.
Vec n_step_returns(const RolloutBatch& batch, double gamma);
Vec n_step_returns(const Vec& rewards, const std::vector<bool>& dones, const Vec& bootstrap_values, int n_steps,
                   int num_envs, double gamma);

/// Uniform draw from a categorical distribution.
int sample_action(const Vec& probs, std::mt19937_64& rng);

/// argmax with ties to the lowest index.
template <typename Derived>
int greedy_action(const Eigen::MatrixBase<Derived>& scores) {
  return argmax(scores);
}

// --- shared loss kernels ---------------------------------------------------

struct LossAndGrads {
  double loss = 0.0;
  Grads grads;
};

/// Extra terms of an actor loss beyond -w * log pi(a|s) * A.
struct ActorTerms {
  const Vec* weights = nullptr;      // per-sample multipliers (importance weights); 1 when null
  double entropy_coef = 0.0;         // subtracts entropy_coef * H(pi(s))
  const Mat* kl_reference = nullptr;  // adds kl_coef * KL(pi(s) || reference(s))
  double kl_coef = 0.0;
};

/// mean_i [ -w_i log pi(a_i|s_i) A_i - c_H H(pi(s_i)) + c_KL KL(pi(s_i) || q_i) ].
/// Advantages, weights and reference distributions are constants.
double actor_loss(const Net& policy, const Mat& states, const std::vector<int>& actions, const Vec& advantages,
                  const ActorTerms& terms);
LossAndGrads actor_loss_and_grads(const Net& policy, const Mat& states, const std::vector<int>& actions,
                                  const Vec& advantages, const ActorTerms& terms);

/// coef * mean_i w_i (V(s_i) - target_i)^2 with constant targets.
double value_loss(const Net& value, const Mat& states, const Vec& targets, double coef, const Vec* weights = nullptr);
LossAndGrads value_loss_and_grads(const Net& value, const Mat& states, const Vec& targets, double coef,
                                  const Vec* weights = nullptr);

/// PPO clipped surrogate: -mean_i min(r_i A_i, clip(r_i, 1 - eps, 1 + eps) A_i)
/// where r_i = pi(a_i|s_i) / reference_prob_i. Also adds the optional
/// entropy/KL terms (weights are ignored).
double clipped_surrogate_loss(const Net& policy, const Mat& states, const std::vector<int>& actions,
                              const Vec& advantages, const Vec& reference_probs, double clip, const ActorTerms& terms);
LossAndGrads clipped_surrogate_loss_and_grads(const Net& policy, const Mat& states, const std::vector<int>& actions,
                                              const Vec& advantages, const Vec& reference_probs, double clip,
                                              const ActorTerms& terms);

/// One sample's contribution to the clipped surrogate loss, for spot checks of the clip rule.
double clipped_surrogate_term(double ratio, double advantage, double clip);

/// coef * mean_i max((V - G)^2, (V_old + clip(V - V_old, -eps, eps) - G)^2), optionally weighted.
LossAndGrads clipped_value_loss_and_grads(const Net& value, const Mat& states, const Vec& targets,
                                          const Vec& old_values, double clip, double coef,
                                          const Vec* weights = nullptr);
double clipped_value_loss(const Net& value, const Mat& states, const Vec& targets, const Vec& old_values, double clip,
                          double coef, const Vec* weights = nullptr);

// --- actor-critic ----------------------------------------------------------

struct ActorCriticConfig {
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::ReLU;
  double learning_rate = 1e-3;
  double adam_eps = 1e-3;
  double max_grad_norm = 0.5;
  double entropy_coef = 1e-4;
  double value_coef = 0.5;
  double gamma = 0.99;
  int n_steps = 5;
};

struct PpoConfig {
  int epochs = 10;
  int minibatches = 4;
  double clip_ratio = 0.1;
  bool clip_value_loss = true;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double policy_grad_norm = 0.0;
  double value_grad_norm = 0.0;
  double mean_is_weight = 1.0;
  double max_is_weight = 1.0;
  double mean_kl = 0.0;
  int clamp_events = 0;
};

/// Separate policy and value networks, each with its own Adam state.
class ActorCritic {
 public:
  ActorCritic() = default;
  ActorCritic(int observation_size, int num_actions, const ActorCriticConfig& cfg, std::uint64_t seed);

  Mat probs(const Mat& states) const;
  Vec probs(const Vec& state) const;
  Vec values(const Mat& states) const;
  double value(const Vec& state) const;
  int act(const Vec& state, std::mt19937_64& rng) const;
  int greedy(const Vec& state) const;

  /// Clips each network's gradient to max_grad_norm and takes one Adam step.
  void apply(Grads& policy_grads, Grads& value_grads, UpdateStats& stats);

  Net& policy() { return policy_; }
  Net& value_net() { return value_; }
  const Net& policy() const { return policy_; }
  const Net& value_net() const { return value_; }
  const ActorCriticConfig& config() const { return cfg_; }
  ActorCriticConfig& config() { return cfg_; }

 private:
  ActorCriticConfig cfg_;
  Net policy_;
  Net value_;
};

/// One A2C step on a rollout: advantages G - V(s) from n-step targets on
/// batch.rewards. Optional KL regularizer toward per-sample reference
/// distributions.
UpdateStats a2c_update(ActorCritic& ac, const RolloutBatch& batch, const Mat* kl_reference = nullptr,
                       double kl_coef = 0.0);

/// PPO epochs over shuffled minibatches of a rollout collected by `ac`.
UpdateStats ppo_update(ActorCritic& ac, const RolloutBatch& batch, const PpoConfig& ppo, std::mt19937_64& rng);

// --- DQN -------------------------------------------------------------------

/// Bounded FIFO ring; uniform sampling without replacement within a batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  /// Oldest-first view index i.
  Transition at(std::size_t i) const;
  /// Writes the stored state and next state of view index i into columns.
  void copy_states(std::size_t i, Eigen::Ref<Vec> state, Eigen::Ref<Vec> next_state) const;
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;

 private:
  // Observations are stored sparse; one-hot states cost one entry each.
  struct Stored {
    Eigen::SparseVector<double> state;
    Eigen::SparseVector<double> next_state;
    int action = 0;
    double reward_ext = 0.0;
    double reward_train = 0.0;
    bool done = false;
    double behavior_prob = 1.0;
  };
  const Stored& slot(std::size_t i) const;

  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Stored> data_;
};

struct DqnConfig {
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::Tanh;
  double learning_rate = 1e-3;
  double adam_eps = 1e-3;
  double max_grad_norm = 0.5;
  double gamma = 0.99;
  double tau = 0.01;
  int batch_size = 256;
  std::size_t buffer_capacity = 100000;
};

struct DqnStats {
  bool skipped = true;
  double loss = 0.0;
  double mean_q = 0.0;
  double grad_norm = 0.0;
};

/// r + gamma * Q_target(s', argmax_a Q_online(s', a)), or r on terminal steps.
Vec double_dqn_targets(const Net& online, const Net& target, const Vec& rewards, const Mat& next_states,
                       const std::vector<bool>& dones, double gamma);

class DqnLearner {
 public:
  DqnLearner(int observation_size, int num_actions, const DqnConfig& cfg, std::uint64_t seed);

  /// Samples a batch and takes one step; no-op while the buffer holds fewer
  /// than batch_size transitions.
  DqnStats update(std::mt19937_64& rng);
  /// One step on an explicit batch of buffer indices.
  DqnStats update_on(const std::vector<std::size_t>& indices);

  Vec q_values(const Vec& state) const { return online_.forward(state); }
  int greedy(const Vec& state) const { return greedy_action(online_.forward(state)); }

  ReplayBuffer& buffer() { return buffer_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  Net& online() { return online_; }
  Net& target() { return target_; }
  const Net& online() const { return online_; }
  const Net& target() const { return target_; }
  const DqnConfig& config() const { return cfg_; }

 private:
  DqnConfig cfg_;
  Net online_;
  Net target_;
  ReplayBuffer buffer_;
};

// --- trainer interface -----------------------------------------------------

/// What the run loop needs from a learner: a behavior distribution to act
/// with, bootstrap values for rollouts, an update per collected block, and a
/// greedy evaluation policy.
class Trainer {
 public:
  virtual ~Trainer() = default;

  virtual int block_length() const = 0;
  virtual int num_actions() const = 0;
  /// Behavior-policy probabilities, one column per state.
  virtual Mat behavior_probs(const Mat& states) const = 0;
  /// Values used to bootstrap the behavior learner's n-step targets.
  virtual Vec bootstrap_values(const Mat& states) const = 0;
  virtual UpdateStats update(const RolloutBatch& batch) = 0;
  /// Action of the evaluated policy (exploitation policy for decoupled learners).
  virtual int greedy(const Vec& state) const = 0;
  /// Hash of every learned parameter, for side-effect checks.
  virtual std::uint64_t parameter_hash() const = 0;
};

class A2cTrainer final : public Trainer {
 public:
  A2cTrainer(int observation_size, int num_actions, const ActorCriticConfig& cfg, std::uint64_t seed);
  int block_length() const override { return ac_.config().n_steps; }
  int num_actions() const override { return ac_.policy().output_size(); }
  Mat behavior_probs(const Mat& states) const override { return ac_.probs(states); }
  Vec bootstrap_values(const Mat& states) const override { return ac_.values(states); }
  UpdateStats update(const RolloutBatch& batch) override { return a2c_update(ac_, batch); }
  int greedy(const Vec& state) const override { return ac_.greedy(state); }
  std::uint64_t parameter_hash() const override;
  ActorCritic& actor_critic() { return ac_; }

 private:
  ActorCritic ac_;
};

class PpoTrainer final : public Trainer {
 public:
  PpoTrainer(int observation_size, int num_actions, const ActorCriticConfig& cfg, const PpoConfig& ppo,
             std::uint64_t seed);
  int block_length() const override { return ac_.config().n_steps; }
  int num_actions() const override { return ac_.policy().output_size(); }
  Mat behavior_probs(const Mat& states) const override { return ac_.probs(states); }
  Vec bootstrap_values(const Mat& states) const override { return ac_.values(states); }
  UpdateStats update(const RolloutBatch& batch) override { return ppo_update(ac_, batch, ppo_, rng_); }
  int greedy(const Vec& state) const override { return ac_.greedy(state); }
  std::uint64_t parameter_hash() const override;

 private:
  ActorCritic ac_;
  PpoConfig ppo_;
  std::mt19937_64 rng_;
};

/// Stand-alone Double-DQN acting epsilon-greedily on the training reward.
class DqnTrainer final : public Trainer {
 public:
  DqnTrainer(int observation_size, int num_actions, const DqnConfig& cfg, int block_length, double epsilon,
             std::uint64_t seed);
  int block_length() const override { return block_length_; }
  int num_actions() const override { return learner_.online().output_size(); }
  Mat behavior_probs(const Mat& states) const override;
  Vec bootstrap_values(const Mat& states) const override { return Vec::Zero(states.cols()); }
  UpdateStats update(const RolloutBatch& batch) override;
  int greedy(const Vec& state) const override { return learner_.greedy(state); }
  std::uint64_t parameter_hash() const override;

 private:
  DqnLearner learner_;
  int block_length_;
  double epsilon_;
  std::mt19937_64 rng_;
};

/// FNV-style hash over the raw bytes of parameter sets.
std::uint64_t hash_parameters(std::initializer_list<const Grads*> sets);

}  // namespace derl

#pragma once

// Decoupled exploration/exploitation. An A2C exploration policy pi_beta acts
// and learns from extrinsic plus intrinsic (or purely intrinsic) rewards; a
// separate exploitation learner pi_e trains only on the extrinsic rewards of
// pi_beta's data:
//
//   DeA2C  importance-weighted actor-critic on each staged block
//   DePPO  PPO surrogate whose ratio is taken against the recorded pi_beta
//   DeDQN  Double-DQN on a persistent replay buffer, no correction
//
// Optional KL regularizers pull each policy toward the other:
//   alpha_beta * KL(pi_beta || pi_e) in the exploration actor loss,
//   alpha_e    * KL(pi_e || pi_beta) in the exploitation actor loss,
// with gradients flowing only into the regularized policy.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "derl/agents.hpp"

namespace derl {

enum class ExploitKind { A2C, PPO, DQN };

/// Floor applied to pi_beta(a|s) before forming an importance weight.
inline constexpr double kBehaviorProbFloor = 1e-8;
/// Floor applied to the second argument of kl_divergence.
inline constexpr double kKlFloor = 1e-8;

/// pi_e(a|s) / max(pi_beta(a|s), floor). Increments *clamp_events when the
/// floor was applied.
double is_weight(double pi_e_prob, double pi_beta_prob, int* clamp_events = nullptr);

/// Retrace truncation with lambda = 1: min(1, rho).
inline double retrace_clip(double rho) { return rho < 1.0 ? rho : 1.0; }

/// sum_a p_a (log p_a - log max(q_a, floor)), with 0 log 0 = 0.
double kl_divergence(const Vec& p, const Vec& q);
double kl_divergence(const Categorical<double>& p, const Categorical<double>& q);

/// Reward the exploration learner trains on: lambda * r_int in
/// intrinsic-only mode, r_ext + lambda * r_int otherwise.
double exploration_reward(double r_ext, double r_int, double lambda, bool pure_intrinsic);

struct DecoupledConfig {
  ExploitKind exploit = ExploitKind::A2C;
  int t_dec = 1;
  double alpha_beta = 0.0;
  double alpha_e = 0.0;
  bool retrace = false;
  bool pure_intrinsic = false;
};

/// r_ext + gamma * V(s') (zero bootstrap on done) per element.
Vec one_step_targets(const Net& value, const RolloutBatch& batch, double gamma);

/// Extrinsic n-step targets inside the staged data: for step t of a lane,
/// sum_{j<m} gamma^j r_ext(t+j) + gamma^m V(s'_{t+m-1}) with
/// m = min(n, steps left in the data), cut at the first done. n = 1 gives
/// one_step_targets.
Vec exploit_targets(const Net& value, const RolloutBatch& batch, double gamma, int n);

/// Importance weights of the batch under `policy`, optionally Retrace-clipped.
Vec importance_weights(const Net& policy, const RolloutBatch& batch, bool retrace, UpdateStats* stats = nullptr);

/// The DeA2C objective on a staged batch, with importance weights held
/// constant: actor E[-rho log pi_e(a|s) A] - c_H H + alpha_e KL(pi_e||pi_beta)
/// and value value_coef * E[rho (V(s) - G)^2], where G is
/// exploit_targets with the learner's n_steps and A = G - V(s); G and A are
/// constants.
struct DecoupledLoss {
  LossAndGrads actor;
  LossAndGrads value;
};
DecoupledLoss dea2c_loss_and_grads(const ActorCritic& exploit, const RolloutBatch& batch, const Vec& rho,
                                   double alpha_e);
double dea2c_actor_loss(const ActorCritic& exploit, const RolloutBatch& batch, const Vec& rho, const Vec& advantages,
                        double alpha_e);

/// One DeA2C step of pi_e on D.
UpdateStats dea2c_exploit_update(ActorCritic& exploit, const RolloutBatch& batch, bool retrace, double alpha_e);

/// DePPO: epochs of clipped-surrogate minibatch steps with ratio
/// pi_e(a|s) / pi_beta(a|s), importance-weighted (clipped) value loss.
UpdateStats deppo_exploit_update(ActorCritic& exploit, const RolloutBatch& batch, const PpoConfig& ppo, bool retrace,
                                 double alpha_e, std::mt19937_64& rng);

/// DeDQN: pushes nothing, just one Double-DQN step on the learner's buffer.
DqnStats dedqn_exploit_update(DqnLearner& learner, std::mt19937_64& rng);

/// Exploration A2C step on a block whose rewards already hold the training
/// reward; adds alpha_beta * KL(pi_beta || pi_e) against exploit_probs.
UpdateStats exploration_update(ActorCritic& explore, const RolloutBatch& batch, const Mat* exploit_probs,
                               double alpha_beta);

/// Concatenates rollout blocks of equal lane count along time.
RolloutBatch concat_blocks(const std::vector<RolloutBatch>& blocks);

class DecoupledTrainer final : public Trainer {
 public:
  DecoupledTrainer(int observation_size, int num_actions, const ActorCriticConfig& explore_cfg,
                   const ActorCriticConfig& exploit_cfg, const PpoConfig& ppo, const DqnConfig& dqn,
                   const DecoupledConfig& cfg, std::uint64_t seed);

  int block_length() const override { return explore_.config().n_steps; }
  int num_actions() const override { return explore_.policy().output_size(); }
  Mat behavior_probs(const Mat& states) const override { return explore_.probs(states); }
  Vec bootstrap_values(const Mat& states) const override { return explore_.values(states); }
  /// Exploration step, staging of (s, a, r_ext, s') into D, and an
  /// exploitation step every t_dec blocks. D is cleared after each
  /// on-policy-style exploitation step; the DQN buffer persists.
  UpdateStats update(const RolloutBatch& batch) override;
  int greedy(const Vec& state) const override;
  std::uint64_t parameter_hash() const override;

  /// Exploitation policy probabilities; the greedy one-hot of Q for DeDQN.
  Mat exploit_probs(const Mat& states) const;

  ActorCritic& exploration() { return explore_; }
  const ActorCritic& exploration() const { return explore_; }
  ActorCritic& exploitation() { return exploit_; }
  DqnLearner* q_learner() { return dqn_ ? &*dqn_ : nullptr; }
  std::size_t staged_blocks() const { return staged_.size(); }
  std::size_t staged_transitions() const;
  const DecoupledConfig& config() const { return cfg_; }
  std::int64_t exploit_updates() const { return exploit_updates_; }

 private:
  DecoupledConfig cfg_;
  PpoConfig ppo_;
  ActorCritic explore_;
  ActorCritic exploit_;
  std::optional<DqnLearner> dqn_;
  std::vector<RolloutBatch> staged_;
  std::int64_t ticks_ = 0;
  std::int64_t exploit_updates_ = 0;
  std::mt19937_64 rng_;
};

}  // namespace derl

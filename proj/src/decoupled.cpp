#include "derl/decoupled.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "derl/errors.hpp"
#include "derl/rng.hpp"

namespace derl {

namespace {

void check_finite(double loss, const char* where, const UpdateStats& stats) {
  if (!std::isfinite(loss))
    throw NumericError(std::string(where) + ": non-finite loss (mean rho " + std::to_string(stats.mean_is_weight) +
                       ", max rho " + std::to_string(stats.max_is_weight) + ")");
}

Mat gather_columns(const Mat& m, const std::vector<int>& idx) {
  Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

Vec gather(const Vec& v, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(idx[j]);
  return out;
}

void check_staged(const RolloutBatch& batch) {
  if (batch.size() == 0) throw UsageError("exploitation update on an empty staging store");
  if (batch.behavior_probs.size() != batch.size() || batch.next_states.cols() != batch.size() ||
      batch.rewards_ext.size() != batch.size())
    throw UsageError("staged batch lacks behavior probabilities, next states or extrinsic rewards");
}

double mean_entropy(const Mat& probs) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) h += entropy(probs.col(j));
  return probs.cols() > 0 ? h / static_cast<double>(probs.cols()) : 0.0;
}

double mean_kl(const Mat& p, const Mat& q) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) s += kl_divergence(Vec(p.col(j)), Vec(q.col(j)));
  return p.cols() > 0 ? s / static_cast<double>(p.cols()) : 0.0;
}

}  // namespace

double is_weight(double pi_e_prob, double pi_beta_prob, int* clamp_events) {
  if (pi_beta_prob < kBehaviorProbFloor) {
    if (clamp_events != nullptr) ++*clamp_events;
    pi_beta_prob = kBehaviorProbFloor;
  }
  return pi_e_prob / pi_beta_prob;
}

double kl_divergence(const Vec& p, const Vec& q) {
  if (p.size() != q.size()) throw ConfigError("kl_divergence: size mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= 0.0) continue;
    kl += p(i) * (std::log(p(i)) - std::log(std::max(q(i), kKlFloor)));
  }
  return std::max(kl, 0.0);
}

double kl_divergence(const Categorical<double>& p, const Categorical<double>& q) {
  return kl_divergence(p.probs, q.probs);
}

double exploration_reward(double r_ext, double r_int, double lambda, bool pure_intrinsic) {
  return pure_intrinsic ? lambda * r_int : r_ext + lambda * r_int;
}

Vec one_step_targets(const Net& value, const RolloutBatch& batch, double gamma) {
  const Vec v_next = value.forward_batch(batch.next_states).row(0).transpose();
  Vec y(batch.size());
  for (int i = 0; i < batch.size(); ++i)
    y(i) = batch.rewards_ext(i) + (batch.dones[static_cast<std::size_t>(i)] ? 0.0 : gamma * v_next(i));
  return y;
}

Vec exploit_targets(const Net& value, const RolloutBatch& batch, double gamma, int n) {
  if (n < 1) throw ConfigError("exploitation n_steps must be >= 1");
  if (n == 1) return one_step_targets(value, batch, gamma);
  const Vec v_next = value.forward_batch(batch.next_states).row(0).transpose();
  const int L = batch.n_steps;
  const int K = batch.num_envs;
  Vec y(batch.size());
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < L; ++t) {
      double g = 0.0;
      double discount = 1.0;
      const int horizon = std::min(n, L - t);
      for (int j = 0; j < horizon; ++j) {
        const int i = batch.index(t + j, k);
        g += discount * batch.rewards_ext(i);
        if (batch.dones[static_cast<std::size_t>(i)]) break;
        discount *= gamma;
        if (j == horizon - 1) g += discount * v_next(i);
      }
      y(batch.index(t, k)) = g;
    }
  }
  return y;
}

Vec importance_weights(const Net& policy, const RolloutBatch& batch, bool retrace, UpdateStats* stats) {
  const Mat p = softmax_columns(policy.forward_batch(batch.states));
  Vec rho(batch.size());
  int clamps = 0;
  for (int i = 0; i < batch.size(); ++i) {
    const double w = is_weight(p(batch.actions[static_cast<std::size_t>(i)], i), batch.behavior_probs(i), &clamps);
    rho(i) = retrace ? retrace_clip(w) : w;
  }
  if (stats != nullptr) {
    // Diagnostics report the raw weights, before any truncation.
    double sum = 0.0, mx = 0.0;
    for (int i = 0; i < batch.size(); ++i) {
      const double w = is_weight(p(batch.actions[static_cast<std::size_t>(i)], i), batch.behavior_probs(i));
      sum += w;
      mx = std::max(mx, w);
    }
    stats->mean_is_weight = sum / static_cast<double>(batch.size());
    stats->max_is_weight = mx;
    stats->clamp_events += clamps;
  }
  return rho;
}

namespace {

ActorTerms exploit_terms(const ActorCritic& exploit, const RolloutBatch& batch, const Vec* rho, double alpha_e) {
  ActorTerms terms;
  terms.weights = rho;
  terms.entropy_coef = exploit.config().entropy_coef;
  if (alpha_e != 0.0) {
    if (batch.behavior_dists.cols() != batch.size())
      throw UsageError("KL regularizer needs the recorded behavior distributions");
    terms.kl_reference = &batch.behavior_dists;
    terms.kl_coef = alpha_e;
  }
  return terms;
}

}  // namespace

double dea2c_actor_loss(const ActorCritic& exploit, const RolloutBatch& batch, const Vec& rho, const Vec& advantages,
                        double alpha_e) {
  return actor_loss(exploit.policy(), batch.states, batch.actions, advantages,
                    exploit_terms(exploit, batch, &rho, alpha_e));
}

DecoupledLoss dea2c_loss_and_grads(const ActorCritic& exploit, const RolloutBatch& batch, const Vec& rho,
                                   double alpha_e) {
  check_staged(batch);
  const auto& cfg = exploit.config();
  const Vec targets = exploit_targets(exploit.value_net(), batch, cfg.gamma, cfg.n_steps);
  const Vec advantages = targets - exploit.values(batch.states);
  DecoupledLoss out;
  out.actor = actor_loss_and_grads(exploit.policy(), batch.states, batch.actions, advantages,
                                   exploit_terms(exploit, batch, &rho, alpha_e));
  out.value = value_loss_and_grads(exploit.value_net(), batch.states, targets, cfg.value_coef, &rho);
  return out;
}

UpdateStats dea2c_exploit_update(ActorCritic& exploit, const RolloutBatch& batch, bool retrace, double alpha_e) {
  check_staged(batch);
  UpdateStats stats;
  const Vec rho = importance_weights(exploit.policy(), batch, retrace, &stats);
  DecoupledLoss l = dea2c_loss_and_grads(exploit, batch, rho, alpha_e);
  check_finite(l.actor.loss, "dea2c policy loss", stats);
  check_finite(l.value.loss, "dea2c value loss", stats);
  stats.policy_loss = l.actor.loss;
  stats.value_loss = l.value.loss;
  const Mat p = exploit.probs(batch.states);
  stats.entropy = mean_entropy(p);
  if (batch.behavior_dists.cols() == batch.size()) stats.mean_kl = mean_kl(p, batch.behavior_dists);
  exploit.apply(l.actor.grads, l.value.grads, stats);
  return stats;
}

UpdateStats deppo_exploit_update(ActorCritic& exploit, const RolloutBatch& batch, const PpoConfig& ppo, bool retrace,
                                 double alpha_e, std::mt19937_64& rng) {
  check_staged(batch);
  const auto& cfg = exploit.config();
  const int n = batch.size();
  if (ppo.minibatches < 1 || ppo.minibatches > n) throw ConfigError("deppo: minibatches must be in [1, batch size]");
  UpdateStats stats;
  const Vec rho = importance_weights(exploit.policy(), batch, retrace, &stats);
  {
    const Mat p = exploit.probs(batch.states);
    stats.entropy = mean_entropy(p);
    if (batch.behavior_dists.cols() == n) stats.mean_kl = mean_kl(p, batch.behavior_dists);
  }
  const Vec targets = exploit_targets(exploit.value_net(), batch, cfg.gamma, cfg.n_steps);
  const Vec old_values = exploit.values(batch.states);
  const Vec advantages = targets - old_values;
  Vec reference(n);
  for (int i = 0; i < n; ++i) reference(i) = std::max(batch.behavior_probs(i), kBehaviorProbFloor);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int steps = 0;
  double policy_loss = 0.0, value_loss_sum = 0.0;
  for (int epoch = 0; epoch < ppo.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int mb = 0; mb < ppo.minibatches; ++mb) {
      const int lo = mb * n / ppo.minibatches;
      const int hi = (mb + 1) * n / ppo.minibatches;
      const std::vector<int> idx(order.begin() + lo, order.begin() + hi);
      const Mat s = gather_columns(batch.states, idx);
      std::vector<int> a;
      a.reserve(idx.size());
      for (int i : idx) a.push_back(batch.actions[static_cast<std::size_t>(i)]);
      const Vec w = gather(rho, idx);
      Mat dists;
      ActorTerms terms;
      terms.entropy_coef = cfg.entropy_coef;
      if (alpha_e != 0.0) {
        if (batch.behavior_dists.cols() != n)
          throw UsageError("KL regularizer needs the recorded behavior distributions");
        dists = gather_columns(batch.behavior_dists, idx);
        terms.kl_reference = &dists;
        terms.kl_coef = alpha_e;
      }
      LossAndGrads pl = clipped_surrogate_loss_and_grads(exploit.policy(), s, a, gather(advantages, idx),
                                                         gather(reference, idx), ppo.clip_ratio, terms);
      const Vec g = gather(targets, idx);
      LossAndGrads vl = ppo.clip_value_loss
                            ? clipped_value_loss_and_grads(exploit.value_net(), s, g, gather(old_values, idx),
                                                           ppo.clip_ratio, cfg.value_coef, &w)
                            : value_loss_and_grads(exploit.value_net(), s, g, cfg.value_coef, &w);
      check_finite(pl.loss, "deppo policy loss", stats);
      check_finite(vl.loss, "deppo value loss", stats);
      policy_loss += pl.loss;
      value_loss_sum += vl.loss;
      exploit.apply(pl.grads, vl.grads, stats);
      ++steps;
    }
  }
  if (steps > 0) {
    stats.policy_loss = policy_loss / steps;
    stats.value_loss = value_loss_sum / steps;
  }
  return stats;
}

DqnStats dedqn_exploit_update(DqnLearner& learner, std::mt19937_64& rng) { return learner.update(rng); }

UpdateStats exploration_update(ActorCritic& explore, const RolloutBatch& batch, const Mat* exploit_probs,
                               double alpha_beta) {
  if (alpha_beta == 0.0) return a2c_update(explore, batch);
  if (exploit_probs == nullptr || exploit_probs->cols() != batch.size())
    throw UsageError("exploration KL regularizer needs exploitation probabilities per sample");
  return a2c_update(explore, batch, exploit_probs, alpha_beta);
}

RolloutBatch concat_blocks(const std::vector<RolloutBatch>& blocks) {
  if (blocks.empty()) return {};
  if (blocks.size() == 1) return blocks.front();
  int total = 0;
  int steps = 0;
  const auto& f = blocks.front();
  for (const auto& b : blocks) {
    if (b.num_envs != f.num_envs) throw UsageError("concat_blocks: lane counts differ");
    total += b.size();
    steps += b.n_steps;
  }
  RolloutBatch out;
  out.n_steps = steps;
  out.num_envs = f.num_envs;
  out.states.resize(f.states.rows(), total);
  out.next_states.resize(f.next_states.rows(), total);
  out.rewards.resize(total);
  out.rewards_ext.resize(total);
  out.behavior_probs.resize(total);
  const bool dists = f.behavior_dists.cols() == f.size();
  if (dists) out.behavior_dists.resize(f.behavior_dists.rows(), total);
  int at = 0;
  for (const auto& b : blocks) {
    const int n = b.size();
    out.states.middleCols(at, n) = b.states;
    out.next_states.middleCols(at, n) = b.next_states;
    out.rewards.segment(at, n) = b.rewards;
    out.rewards_ext.segment(at, n) = b.rewards_ext;
    out.behavior_probs.segment(at, n) = b.behavior_probs;
    if (dists) out.behavior_dists.middleCols(at, n) = b.behavior_dists;
    out.actions.insert(out.actions.end(), b.actions.begin(), b.actions.end());
    out.dones.insert(out.dones.end(), b.dones.begin(), b.dones.end());
    at += n;
  }
  out.bootstrap_values = blocks.back().bootstrap_values;
  return out;
}

// --- trainer ---------------------------------------------------------------

DecoupledTrainer::DecoupledTrainer(int observation_size, int num_actions, const ActorCriticConfig& explore_cfg,
                                   const ActorCriticConfig& exploit_cfg, const PpoConfig& ppo, const DqnConfig& dqn,
                                   const DecoupledConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      ppo_(ppo),
      explore_(observation_size, num_actions, explore_cfg, derive_seed(seed, {401})),
      exploit_(observation_size, num_actions, exploit_cfg, derive_seed(seed, {402})),
      rng_(derive_seed(seed, {403})) {
  if (cfg.t_dec < 1) throw ConfigError("decoupled.t_dec must be >= 1");
  if (cfg.alpha_beta < 0.0 || cfg.alpha_e < 0.0) throw ConfigError("KL coefficients must be >= 0");
  if (cfg.exploit == ExploitKind::DQN) dqn_.emplace(observation_size, num_actions, dqn, derive_seed(seed, {404}));
}

Mat DecoupledTrainer::exploit_probs(const Mat& states) const {
  if (!dqn_) return exploit_.probs(states);
  const Mat q = dqn_->online().forward_batch(states);
  Mat p = Mat::Zero(q.rows(), q.cols());
  for (Eigen::Index j = 0; j < q.cols(); ++j) p(greedy_action(q.col(j)), j) = 1.0;
  return p;
}

int DecoupledTrainer::greedy(const Vec& state) const { return dqn_ ? dqn_->greedy(state) : exploit_.greedy(state); }

std::uint64_t DecoupledTrainer::parameter_hash() const {
  if (dqn_)
    return hash_parameters({&explore_.policy().parameters(), &explore_.value_net().parameters(),
                            &dqn_->online().parameters(), &dqn_->target().parameters()});
  return hash_parameters({&explore_.policy().parameters(), &explore_.value_net().parameters(),
                          &exploit_.policy().parameters(), &exploit_.value_net().parameters()});
}

std::size_t DecoupledTrainer::staged_transitions() const {
  std::size_t n = 0;
  for (const auto& b : staged_) n += static_cast<std::size_t>(b.size());
  return n;
}

UpdateStats DecoupledTrainer::update(const RolloutBatch& batch) {
  // Exploration step first, regularized toward the live exploitation policy.
  Mat reference;
  if (cfg_.alpha_beta != 0.0) reference = exploit_probs(batch.states);
  UpdateStats stats = exploration_update(explore_, batch, cfg_.alpha_beta != 0.0 ? &reference : nullptr,
                                         cfg_.alpha_beta);

  // KL(pi_e, pi_beta) over the visited states, before pi_e moves.
  stats.mean_kl = mean_kl(exploit_probs(batch.states), batch.behavior_dists);

  if (dqn_) {
    for (int i = 0; i < batch.size(); ++i) {
      Transition t = batch.transition(i);
      t.reward_train = t.reward_ext;
      dqn_->buffer().push(std::move(t));
    }
  } else {
    staged_.push_back(batch);
  }
  if (++ticks_ % cfg_.t_dec != 0) return stats;

  UpdateStats e;
  if (dqn_) {
    const DqnStats d = dedqn_exploit_update(*dqn_, rng_);
    if (!d.skipped) ++exploit_updates_;
    return stats;
  }
  const RolloutBatch d = concat_blocks(staged_);
  e = cfg_.exploit == ExploitKind::PPO ? deppo_exploit_update(exploit_, d, ppo_, cfg_.retrace, cfg_.alpha_e, rng_)
                                       : dea2c_exploit_update(exploit_, d, cfg_.retrace, cfg_.alpha_e);
  staged_.clear();
  ++exploit_updates_;
  stats.mean_is_weight = e.mean_is_weight;
  stats.max_is_weight = e.max_is_weight;
  stats.clamp_events = e.clamp_events;
  return stats;
}

}  // namespace derl

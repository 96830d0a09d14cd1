#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "derl/decoupled.hpp"
#include "test_util.hpp"

using namespace derl;
using derl::testing::max_abs_diff;
using derl::testing::max_fd_error;
using derl::testing::random_batch;
using derl::testing::random_distribution;

namespace {

ActorCriticConfig small_ac(int n_steps) {
  ActorCriticConfig c;
  c.hidden = {12, 10};
  c.activation = Activation::Tanh;
  c.learning_rate = 1e-2;
  c.entropy_coef = 0.02;
  c.n_steps = n_steps;
  return c;
}

// Records behavior data as if `policy` had acted.
void set_behavior(RolloutBatch& b, const Net& policy) {
  b.behavior_dists = softmax_columns(policy.forward_batch(b.states));
  for (int i = 0; i < b.size(); ++i) b.behavior_probs(i) = b.behavior_dists(b.actions[static_cast<std::size_t>(i)], i);
}

double cosine(const Grads& a, const Grads& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a.coeff(i) * b.coeff(i);
  return dot / std::sqrt(a.squared_norm() * b.squared_norm());
}

}  // namespace

TEST(IsWeight, Examples) {
  EXPECT_EQ(is_weight(0.5, 0.25), 2.0);
  EXPECT_EQ(is_weight(0.3, 0.3), 1.0);
  int clamps = 0;
  EXPECT_NEAR(is_weight(0.9, 1e-12, &clamps), 0.9 / 1e-8, 1e-6);
  EXPECT_EQ(clamps, 1);
  is_weight(0.9, 0.5, &clamps);
  EXPECT_EQ(clamps, 1);
}

TEST(RetraceClip, Examples) {
  EXPECT_EQ(retrace_clip(9.0), 1.0);
  EXPECT_EQ(retrace_clip(0.3), 0.3);
  EXPECT_EQ(retrace_clip(1.0), 1.0);
  for (double r : {0.0, 0.5, 1.0, 3.0, 1e9}) {
    EXPECT_GE(retrace_clip(r), 0.0);
    EXPECT_LE(retrace_clip(r), 1.0);
    EXPECT_EQ(retrace_clip(retrace_clip(r)), retrace_clip(r));
  }
}

TEST(Kl, Examples) {
  Vec p(2), q(2);
  p << 1.0, 0.0;
  q << 0.5, 0.5;
  EXPECT_NEAR(kl_divergence(p, q), 0.693147, 1e-6);
  p << 0.75, 0.25;
  EXPECT_NEAR(kl_divergence(p, q), 0.130812, 1e-6);
  EXPECT_EQ(kl_divergence(q, q), 0.0);
}

TEST(Kl, NonnegativeOnRandomPairs) {
  std::mt19937_64 rng(50);
  std::uniform_int_distribution<int> size(2, 6);
  for (int i = 0; i < 10000; ++i) {
    const int n = size(rng);
    const Vec p = random_distribution(n, rng);
    const Vec q = random_distribution(n, rng);
    ASSERT_GE(kl_divergence(p, q), 0.0);
    ASSERT_LT(kl_divergence(p, p), 1e-15);
    if ((p - q).cwiseAbs().maxCoeff() > 1e-3) {
      ASSERT_GT(kl_divergence(p, q), 0.0);
    }
  }
}

TEST(ExplorationReward, Modes) {
  EXPECT_EQ(exploration_reward(0.5, 2.0, 0.25, false), 1.0);
  EXPECT_EQ(exploration_reward(0.5, 2.0, 0.25, true), 0.5);
  EXPECT_EQ(exploration_reward(-7.0, 0.0, 1.0, true), 0.0);
  EXPECT_EQ(exploration_reward(0.5, 9.0, 0.0, false), 0.5);
}

TEST(ExploitTargets, OneStepCase) {
  std::mt19937_64 rng(51);
  Net value({5, 8, 1}, Activation::Tanh, 1);
  const RolloutBatch b = random_batch(5, 3, 4, 2, rng);
  const Vec y = exploit_targets(value, b, 0.9, 1);
  const Vec v = value.forward_batch(b.next_states).row(0).transpose();
  for (int i = 0; i < b.size(); ++i)
    EXPECT_NEAR(y(i), b.rewards_ext(i) + (b.dones[static_cast<std::size_t>(i)] ? 0.0 : 0.9 * v(i)), 1e-15);
  EXPECT_TRUE(y == one_step_targets(value, b, 0.9));
}

TEST(ExploitTargets, NStepOracle) {
  std::mt19937_64 rng(52);
  Net value({5, 8, 1}, Activation::Tanh, 1);
  RolloutBatch b = random_batch(5, 3, 6, 3, rng, 0.25);
  const double g = 0.9;
  const int n = 3;
  const Vec y = exploit_targets(value, b, g, n);
  const Vec v = value.forward_batch(b.next_states).row(0).transpose();
  for (int k = 0; k < 3; ++k) {
    for (int t = 0; t < 6; ++t) {
      // Recursive form: G_t = r_t + g * (done ? 0 : (last ? V(s'_t) : G_{t+1})), truncated at t + n.
      const int end = std::min(t + n, 6);
      double expect = 0.0;
      for (int j = end - 1; j >= t; --j) {
        const int i = b.index(j, k);
        const bool last = j == end - 1;
        const double next = b.dones[static_cast<std::size_t>(i)] ? 0.0 : (last ? v(i) : expect);
        expect = b.rewards_ext(i) + g * next;
      }
      EXPECT_NEAR(y(b.index(t, k)), expect, 1e-12) << t << "," << k;
    }
  }
}

TEST(Dea2c, GradientsMatchCentralDifferences) {
  std::mt19937_64 rng(53);
  ActorCritic exploit(6, 3, small_ac(5), 3);
  const RolloutBatch b = random_batch(6, 3, 5, 2, rng);
  const Vec rho = importance_weights(exploit.policy(), b, false);
  const DecoupledLoss l = dea2c_loss_and_grads(exploit, b, rho, 0.3);
  // Targets and advantages are constants of the loss.
  const Vec targets = exploit_targets(exploit.value_net(), b, exploit.config().gamma, 5);
  const Vec adv = targets - exploit.values(b.states);
  EXPECT_NEAR(l.actor.loss, dea2c_actor_loss(exploit, b, rho, adv, 0.3), 1e-12);
  EXPECT_GE(l.actor.grads.size() + l.value.grads.size(), 100u);
  EXPECT_LT(max_fd_error(exploit.policy().parameters(), l.actor.grads,
                         [&] { return dea2c_actor_loss(exploit, b, rho, adv, 0.3); }, 200, rng),
            1e-4);
  EXPECT_LT(max_fd_error(exploit.value_net().parameters(), l.value.grads,
                         [&] { return value_loss(exploit.value_net(), b.states, targets, exploit.config().value_coef, &rho); },
                         200, rng),
            1e-4);
}

TEST(Dea2c, KlTermHasZeroGradientAtSymmetricPoint) {
  std::mt19937_64 rng(54);
  Net policy({6, 12, 3}, Activation::Tanh, 5);
  RolloutBatch b = random_batch(6, 3, 4, 2, rng);
  set_behavior(b, policy);
  ActorTerms terms;
  terms.kl_reference = &b.behavior_dists;
  terms.kl_coef = 0.5;
  const Vec zero = Vec::Zero(b.size());
  const LossAndGrads lg = actor_loss_and_grads(policy, b.states, b.actions, zero, terms);
  EXPECT_NEAR(lg.loss, 0.0, 1e-15);
  EXPECT_LT(std::sqrt(lg.grads.squared_norm()), 1e-12);
  const double h = 1e-5;
  for (std::size_t i = 0; i < 50; ++i) {
    double& p = policy.parameters().coeff(i);
    const double saved = p;
    p = saved + h;
    const double up = actor_loss(policy, b.states, b.actions, zero, terms);
    p = saved - h;
    const double down = actor_loss(policy, b.states, b.actions, zero, terms);
    p = saved;
    EXPECT_NEAR((up - down) / (2 * h), 0.0, 1e-8);
  }
}

TEST(Dea2c, ZeroAdvantageLeavesPolicyUntouched) {
  std::mt19937_64 rng(55);
  ActorCriticConfig cfg = small_ac(1);
  cfg.entropy_coef = 0.0;
  cfg.gamma = 0.0;
  ActorCritic exploit(6, 3, cfg, 3);
  RolloutBatch b = random_batch(6, 3, 3, 2, rng);
  b.rewards_ext = exploit.values(b.states);  // gamma = 0: target equals V(s)
  const Grads before = exploit.policy().parameters();
  dea2c_exploit_update(exploit, b, false, 0.0);
  EXPECT_TRUE(exploit.policy().parameters() == before);
}

TEST(Dea2c, OnPolicyReductionToA2c) {
  std::mt19937_64 rng(56);
  const int L = 5;
  ActorCritic a2c(6, 3, small_ac(L), 7);
  ActorCritic dea2c = a2c;
  for (int step = 0; step < 3; ++step) {
    RolloutBatch b = random_batch(6, 3, L, 4, rng);
    set_behavior(b, dea2c.policy());
    b.rewards = b.rewards_ext;
    const Vec v_next = dea2c.values(b.next_states);
    for (int k = 0; k < 4; ++k) b.bootstrap_values(k) = v_next(b.index(L - 1, k));
    UpdateStats s;
    const Vec rho = importance_weights(dea2c.policy(), b, false, &s);
    EXPECT_EQ(rho.minCoeff(), 1.0);
    EXPECT_EQ(rho.maxCoeff(), 1.0);
    a2c_update(a2c, b);
    dea2c_exploit_update(dea2c, b, false, 0.0);
    EXPECT_LT(max_abs_diff(a2c.policy().parameters(), dea2c.policy().parameters()), 1e-12);
    EXPECT_LT(max_abs_diff(a2c.value_net().parameters(), dea2c.value_net().parameters()), 1e-12);
  }
}

TEST(Deppo, InfiniteClipMatchesDea2cDirection) {
  std::mt19937_64 rng(57);
  ActorCritic exploit(6, 3, small_ac(4), 9);
  const RolloutBatch b = random_batch(6, 3, 4, 4, rng);
  const Vec rho = importance_weights(exploit.policy(), b, false);
  const Vec targets = exploit_targets(exploit.value_net(), b, exploit.config().gamma, 4);
  const Vec adv = targets - exploit.values(b.states);
  ActorTerms terms;
  terms.entropy_coef = exploit.config().entropy_coef;
  const LossAndGrads ppo =
      clipped_surrogate_loss_and_grads(exploit.policy(), b.states, b.actions, adv, b.behavior_probs, 1e12, terms);
  const DecoupledLoss dea2c = dea2c_loss_and_grads(exploit, b, rho, 0.0);
  EXPECT_GT(cosine(ppo.grads, dea2c.actor.grads), 0.99);
}

TEST(Deppo, ClipRuleAndOnPolicyStart) {
  EXPECT_EQ(clipped_surrogate_term(1.5, 1.0, 0.1), -1.1);
  std::mt19937_64 rng(58);
  ActorCritic exploit(6, 3, small_ac(4), 9);
  RolloutBatch b = random_batch(6, 3, 4, 2, rng);
  set_behavior(b, exploit.policy());
  const Vec rho = importance_weights(exploit.policy(), b, false);
  EXPECT_EQ(rho.minCoeff(), 1.0);
  EXPECT_EQ(rho.maxCoeff(), 1.0);
  PpoConfig ppo;
  ppo.epochs = 2;
  ppo.minibatches = 2;
  const UpdateStats s = deppo_exploit_update(exploit, b, ppo, false, 0.1, rng);
  EXPECT_EQ(s.mean_is_weight, 1.0);
  EXPECT_EQ(exploit.policy().step_count(), 4);
}

TEST(ImportanceWeights, RetraceAndDiagnostics) {
  std::mt19937_64 rng(59);
  Net policy({6, 12, 3}, Activation::Tanh, 5);
  RolloutBatch b = random_batch(6, 3, 4, 2, rng);
  b.behavior_probs(0) = 1e-12;
  UpdateStats raw_stats, clipped_stats;
  const Vec raw = importance_weights(policy, b, false, &raw_stats);
  const Vec clipped = importance_weights(policy, b, true, &clipped_stats);
  EXPECT_EQ(raw_stats.clamp_events, 1);
  EXPECT_LE(clipped.maxCoeff(), 1.0);
  for (int i = 0; i < b.size(); ++i) EXPECT_EQ(clipped(i), std::min(1.0, raw(i)));
  EXPECT_EQ(raw_stats.max_is_weight, raw.maxCoeff());
  EXPECT_NEAR(raw_stats.mean_is_weight, raw.mean(), 1e-9);
  EXPECT_EQ(clipped_stats.max_is_weight, raw.maxCoeff());
}

TEST(ConcatBlocks, KeepsLaneLayout) {
  std::mt19937_64 rng(60);
  const RolloutBatch a = random_batch(4, 2, 3, 2, rng);
  const RolloutBatch b = random_batch(4, 2, 2, 2, rng);
  const RolloutBatch c = concat_blocks({a, b});
  EXPECT_EQ(c.n_steps, 5);
  EXPECT_EQ(c.num_envs, 2);
  for (int k = 0; k < 2; ++k) {
    for (int t = 0; t < 3; ++t) EXPECT_EQ(c.rewards_ext(c.index(t, k)), a.rewards_ext(a.index(t, k)));
    for (int t = 0; t < 2; ++t) {
      EXPECT_EQ(c.rewards_ext(c.index(3 + t, k)), b.rewards_ext(b.index(t, k)));
      EXPECT_TRUE(c.states.col(c.index(3 + t, k)) == b.states.col(b.index(t, k)));
      EXPECT_EQ(c.actions[static_cast<std::size_t>(c.index(3 + t, k))], b.actions[static_cast<std::size_t>(b.index(t, k))]);
    }
  }
  EXPECT_THROW(concat_blocks({a, random_batch(4, 2, 3, 3, rng)}), UsageError);
}

namespace derl {
void PrintTo(ExploitKind kind, std::ostream* os) {
  *os << (kind == ExploitKind::A2C ? "a2c" : kind == ExploitKind::PPO ? "ppo" : "dqn");
}
}  // namespace derl

class TrainerStaging : public ::testing::TestWithParam<ExploitKind> {};

TEST_P(TrainerStaging, StoreClearedOrPersistent) {
  std::mt19937_64 rng(61);
  DecoupledConfig cfg;
  cfg.exploit = GetParam();
  cfg.t_dec = 3;
  DqnConfig dqn;
  dqn.hidden = {8};
  dqn.batch_size = 16;
  PpoConfig ppo;
  ppo.epochs = 2;
  ppo.minibatches = 2;
  DecoupledTrainer t(6, 3, small_ac(4), small_ac(4), ppo, dqn, cfg, 1);
  for (int block = 1; block <= 9; ++block) {
    RolloutBatch b = random_batch(6, 3, 4, 2, rng);
    set_behavior(b, t.exploration().policy());
    const std::size_t buffer_before = t.q_learner() ? t.q_learner()->buffer().size() : 0;
    t.update(b);
    if (GetParam() == ExploitKind::DQN) {
      EXPECT_EQ(t.staged_blocks(), 0u);
      EXPECT_EQ(t.q_learner()->buffer().size(), buffer_before + 8);
      for (std::size_t i = 0; i < t.q_learner()->buffer().size(); ++i) {
        const Transition tr = t.q_learner()->buffer().at(i);
        ASSERT_EQ(tr.reward_train, tr.reward_ext);
      }
    } else {
      EXPECT_EQ(t.staged_blocks(), static_cast<std::size_t>(block % 3));
    }
    EXPECT_EQ(t.exploit_updates(), block / 3);
  }
}

INSTANTIATE_TEST_SUITE_P(Kinds, TrainerStaging, ::testing::Values(ExploitKind::A2C, ExploitKind::PPO, ExploitKind::DQN),
                         [](const ::testing::TestParamInfo<ExploitKind>& info) {
                           return info.param == ExploitKind::A2C   ? std::string("A2c")
                                  : info.param == ExploitKind::PPO ? std::string("Ppo")
                                                                   : std::string("Dqn");
                         });

TEST(DecoupledTrainer, ExplorationKlPullsTowardExploitation) {
  std::mt19937_64 rng(62);
  DecoupledConfig cfg;
  cfg.alpha_beta = 5.0;
  DecoupledTrainer t(6, 3, small_ac(4), small_ac(4), {}, {}, cfg, 2);
  const RolloutBatch probe = random_batch(6, 3, 4, 2, rng);
  auto kl_now = [&] {
    const Mat pb = t.exploration().probs(probe.states);
    const Mat pe = t.exploit_probs(probe.states);
    double s = 0.0;
    for (int i = 0; i < probe.size(); ++i) s += kl_divergence(Vec(pb.col(i)), Vec(pe.col(i)));
    return s;
  };
  const double before = kl_now();
  for (int i = 0; i < 30; ++i) {
    RolloutBatch b = probe;
    b.rewards.setZero();
    set_behavior(b, t.exploration().policy());
    const Mat pe = t.exploit_probs(b.states);
    exploration_update(t.exploration(), b, &pe, 5.0);
  }
  EXPECT_LT(kl_now(), before);
}

TEST(DecoupledTrainer, DqnExploitProbsAreGreedyOneHot) {
  DecoupledConfig cfg;
  cfg.exploit = ExploitKind::DQN;
  DqnConfig dqn;
  dqn.hidden = {8};
  DecoupledTrainer t(4, 3, small_ac(4), small_ac(4), {}, dqn, cfg, 3);
  const Mat p = t.exploit_probs(Mat::Identity(4, 4));
  for (Eigen::Index j = 0; j < 4; ++j) {
    EXPECT_EQ(p.col(j).sum(), 1.0);
    EXPECT_EQ(p.col(j).maxCoeff(), 1.0);
    EXPECT_EQ(argmax(p.col(j)), t.greedy(Vec(Mat::Identity(4, 4).col(j))));
  }
}

TEST(DecoupledTrainer, DedqnEmptyBufferIsNoOp) {
  DqnConfig dqn;
  dqn.hidden = {8};
  DqnLearner learner(4, 2, dqn, 0);
  std::mt19937_64 rng(0);
  const Grads before = learner.online().parameters();
  EXPECT_TRUE(dedqn_exploit_update(learner, rng).skipped);
  EXPECT_TRUE(learner.online().parameters() == before);
}

TEST(DecoupledTrainer, InvalidSettingsRejected) {
  DecoupledConfig cfg;
  cfg.t_dec = 0;
  EXPECT_THROW(DecoupledTrainer(4, 2, small_ac(4), small_ac(4), {}, {}, cfg, 0), ConfigError);
  cfg.t_dec = 1;
  cfg.alpha_e = -1.0;
  EXPECT_THROW(DecoupledTrainer(4, 2, small_ac(4), small_ac(4), {}, {}, cfg, 0), ConfigError);
}

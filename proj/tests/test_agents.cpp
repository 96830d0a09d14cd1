#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "derl/agents.hpp"
#include "derl/decoupled.hpp"
#include "derl/envs.hpp"
#include "test_util.hpp"

using namespace derl;
using derl::testing::max_fd_error;
using derl::testing::random_batch;
using derl::testing::random_matrix;
using derl::testing::random_vector;

namespace {

ActorCriticConfig small_ac(int n_steps = 5) {
  ActorCriticConfig c;
  c.hidden = {12, 10};
  c.activation = Activation::Tanh;
  c.learning_rate = 1e-2;
  c.entropy_coef = 0.03;
  c.n_steps = n_steps;
  return c;
}

std::vector<int> random_actions(int n, int num_actions, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, num_actions - 1);
  std::vector<int> a;
  for (int i = 0; i < n; ++i) a.push_back(d(rng));
  return a;
}

Mat random_dists(int actions, int n, std::mt19937_64& rng) {
  Mat q(actions, n);
  for (int i = 0; i < n; ++i) q.col(i) = derl::testing::random_distribution(actions, rng);
  return q;
}

}  // namespace

TEST(NStepReturns, HandComputed) {
  // 3 steps, 2 lanes; lane 1 terminates at t = 1.
  Vec r(6);
  r << 1, 2, 3, 4, 5, 6;
  const std::vector<bool> d{false, false, false, true, false, false};
  Vec boot(2);
  boot << 10, 20;
  const double g = 0.5;
  const Vec y = n_step_returns(r, d, boot, 3, 2, g);
  EXPECT_NEAR(y(4), 5 + g * 10, 1e-15);            // t=2 lane 0
  EXPECT_NEAR(y(2), 3 + g * y(4), 1e-15);          // t=1 lane 0
  EXPECT_NEAR(y(0), 1 + g * y(2), 1e-15);          // t=0 lane 0
  EXPECT_NEAR(y(5), 6 + g * 20, 1e-15);            // t=2 lane 1
  EXPECT_NEAR(y(3), 4, 1e-15);                     // done: no bootstrap
  EXPECT_NEAR(y(1), 2 + g * 4, 1e-15);
}

TEST(SampleAction, FrequenciesMatchProbabilities) {
  std::mt19937_64 rng(0);
  Vec p(3);
  p << 0.2, 0.5, 0.3;
  std::vector<int> n(3, 0);
  for (int i = 0; i < 100000; ++i) ++n[static_cast<std::size_t>(sample_action(p, rng))];
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(n[static_cast<std::size_t>(a)] / 1e5, p(a), 0.01);
}

TEST(ActorLoss, GradientWithWeightsEntropyAndKl) {
  std::mt19937_64 rng(31);
  Net policy({6, 12, 4}, Activation::Tanh, 3);
  const Mat s = random_matrix(6, 9, rng);
  const auto a = random_actions(9, 4, rng);
  const Vec adv = random_vector(9, rng);
  const Vec w = random_vector(9, rng).cwiseAbs();
  const Mat q = random_dists(4, 9, rng);
  ActorTerms terms;
  terms.weights = &w;
  terms.entropy_coef = 0.1;
  terms.kl_reference = &q;
  terms.kl_coef = 0.4;
  LossAndGrads lg = actor_loss_and_grads(policy, s, a, adv, terms);
  auto loss = [&] { return actor_loss(policy, s, a, adv, terms); };
  EXPECT_NEAR(lg.loss, loss(), 1e-12);
  EXPECT_GE(lg.grads.size(), 100u);
  EXPECT_LT(max_fd_error(policy.parameters(), lg.grads, loss, 200, rng), 1e-4);
}

TEST(ActorLoss, KlTermAloneGradient) {
  std::mt19937_64 rng(32);
  Net policy({5, 16, 3}, Activation::Tanh, 4);
  const Mat s = random_matrix(5, 8, rng);
  const auto a = random_actions(8, 3, rng);
  const Vec zero = Vec::Zero(8);
  const Mat q = random_dists(3, 8, rng);
  ActorTerms terms;
  terms.kl_reference = &q;
  terms.kl_coef = 1.0;
  LossAndGrads lg = actor_loss_and_grads(policy, s, a, zero, terms);
  const Mat p = softmax_columns(policy.forward_batch(s));
  double oracle = 0.0;
  for (int i = 0; i < 8; ++i)
    for (int k = 0; k < 3; ++k) oracle += p(k, i) * std::log(p(k, i) / q(k, i));
  EXPECT_NEAR(lg.loss, oracle / 8.0, 1e-12);
  EXPECT_LT(max_fd_error(policy.parameters(), lg.grads, [&] { return actor_loss(policy, s, a, zero, terms); }, 150,
                         rng),
            1e-4);
}

TEST(ValueLoss, WeightedGradient) {
  std::mt19937_64 rng(33);
  Net value({6, 14, 1}, Activation::Tanh, 5);
  const Mat s = random_matrix(6, 10, rng);
  const Vec y = random_vector(10, rng);
  const Vec w = random_vector(10, rng).cwiseAbs();
  LossAndGrads lg = value_loss_and_grads(value, s, y, 0.5, &w);
  const Vec v = value.forward_batch(s).row(0).transpose();
  EXPECT_NEAR(lg.loss, 0.5 * (w.array() * (v - y).array().square()).mean(), 1e-12);
  EXPECT_LT(max_fd_error(value.parameters(), lg.grads, [&] { return value_loss(value, s, y, 0.5, &w); }, 150, rng),
            1e-4);
}

TEST(ClippedSurrogate, TermRule) {
  EXPECT_EQ(clipped_surrogate_term(1.5, 2.0, 0.2), -1.2 * 2.0);
  EXPECT_EQ(clipped_surrogate_term(0.5, 2.0, 0.2), -0.5 * 2.0);
  EXPECT_EQ(clipped_surrogate_term(0.5, -2.0, 0.2), 0.8 * 2.0);
  EXPECT_EQ(clipped_surrogate_term(1.1, -1.0, 0.2), 1.1);
}

TEST(ClippedSurrogate, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(34);
  Net policy({6, 12, 3}, Activation::Tanh, 6);
  const Mat s = random_matrix(6, 12, rng);
  const auto a = random_actions(12, 3, rng);
  const Vec adv = random_vector(12, rng);
  const Mat p = softmax_columns(policy.forward_batch(s));
  Vec ref(12);
  std::uniform_real_distribution<double> u(0.5, 1.6);
  for (int i = 0; i < 12; ++i) ref(i) = p(a[static_cast<std::size_t>(i)], i) * u(rng);
  ActorTerms terms;
  terms.entropy_coef = 0.05;
  LossAndGrads lg = clipped_surrogate_loss_and_grads(policy, s, a, adv, ref, 0.2, terms);
  auto loss = [&] { return clipped_surrogate_loss(policy, s, a, adv, ref, 0.2, terms); };
  EXPECT_NEAR(lg.loss, loss(), 1e-12);
  EXPECT_LT(max_fd_error(policy.parameters(), lg.grads, loss, 150, rng), 1e-4);
}

TEST(ClippedValueLoss, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(35);
  Net value({6, 14, 1}, Activation::Tanh, 7);
  const Mat s = random_matrix(6, 10, rng);
  const Vec y = random_vector(10, rng);
  const Vec old = value.forward_batch(s).row(0).transpose() + 0.3 * random_vector(10, rng);
  const Vec w = random_vector(10, rng).cwiseAbs();
  LossAndGrads lg = clipped_value_loss_and_grads(value, s, y, old, 0.1, 0.5, &w);
  EXPECT_LT(max_fd_error(value.parameters(), lg.grads,
                         [&] { return clipped_value_loss(value, s, y, old, 0.1, 0.5, &w); }, 150, rng),
            1e-4);
}

TEST(ClippedSurrogate, InfiniteClipIsPolicyGradient) {
  std::mt19937_64 rng(36);
  Net policy({6, 12, 3}, Activation::Tanh, 8);
  const Mat s = random_matrix(6, 16, rng);
  const auto a = random_actions(16, 3, rng);
  const Vec adv = random_vector(16, rng);
  const Mat p = softmax_columns(policy.forward_batch(s));
  Vec current(16);
  for (int i = 0; i < 16; ++i) current(i) = p(a[static_cast<std::size_t>(i)], i);
  const LossAndGrads ppo = clipped_surrogate_loss_and_grads(policy, s, a, adv, current, 1e12, {});
  const LossAndGrads pg = actor_loss_and_grads(policy, s, a, adv, {});
  double dot = 0.0;
  for (std::size_t i = 0; i < pg.grads.size(); ++i) dot += ppo.grads.coeff(i) * pg.grads.coeff(i);
  const double cosine = dot / std::sqrt(ppo.grads.squared_norm() * pg.grads.squared_norm());
  EXPECT_NEAR(cosine, 1.0, 1e-12);
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.state = Vec::Zero(2);
    t.next_state = Vec::Zero(2);
    t.action = i;
    buf.push(t);
  }
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf.at(0).action, 2);
  EXPECT_EQ(buf.at(1).action, 3);
  EXPECT_EQ(buf.at(2).action, 4);
}

TEST(ReplayBuffer, RoundTripAndDistinctSamples) {
  std::mt19937_64 rng(1);
  ReplayBuffer buf(100);
  Transition t;
  t.state = random_vector(5, rng);
  t.next_state = Vec::Zero(5);
  t.next_state(3) = 1.0;
  t.action = 2;
  t.reward_ext = -0.5;
  t.reward_train = 0.25;
  t.done = true;
  t.behavior_prob = 0.4;
  buf.push(t);
  const Transition back = buf.at(0);
  EXPECT_TRUE(back.state == t.state);
  EXPECT_TRUE(back.next_state == t.next_state);
  EXPECT_EQ(back.action, 2);
  EXPECT_EQ(back.reward_ext, -0.5);
  EXPECT_EQ(back.reward_train, 0.25);
  EXPECT_TRUE(back.done);
  EXPECT_EQ(back.behavior_prob, 0.4);
  for (int i = 0; i < 40; ++i) buf.push(t);
  const auto idx = buf.sample_indices(30, rng);
  EXPECT_EQ(std::set<std::size_t>(idx.begin(), idx.end()).size(), 30u);
  for (auto i : idx) EXPECT_LT(i, buf.size());
}

TEST(DoubleDqn, TargetsUseOnlineArgmaxAndTargetValue) {
  Net online({2, 3}, Activation::Tanh, 1);
  Net target({2, 3}, Activation::Tanh, 2);
  Mat s2(2, 2);
  s2 << 0.3, -1.0, 0.7, 0.2;
  Vec r(2);
  r << 1.0, -2.0;
  const Vec y = double_dqn_targets(online, target, r, s2, {false, true}, 0.9);
  const int a = argmax(online.forward(s2.col(0)));
  EXPECT_NEAR(y(0), 1.0 + 0.9 * target.forward(s2.col(0))(a), 1e-15);
  EXPECT_EQ(y(1), -2.0);
}

TEST(DqnLearner, TabularConvergenceToValueIteration) {
  // One-hot states and a linear Q network make the learner tabular.
  const int n = 5;
  DeepSeaEnv env(n, 3);
  struct Edge {
    int next;
    double reward;
    bool done;
  };
  std::map<std::pair<int, int>, Edge> edges;
  for (int code = 0; code < (1 << n); ++code) {
    env.reset();
    int s = 0;
    for (int t = 0; t < n; ++t) {
      const int a = (code >> t) & 1;
      const StepResult r = env.step(a);
      edges[{s, a}] = {r.obs_index, r.reward, r.done};
      s = r.obs_index;
    }
  }
  const double gamma = 0.99;
  std::map<std::pair<int, int>, double> q;
  for (int sweep = 0; sweep < 2 * n; ++sweep) {
    for (const auto& [key, e] : edges) {
      double best = 0.0;
      if (!e.done) best = std::max(q[{e.next, 0}], q[{e.next, 1}]);
      q[key] = e.reward + gamma * best;
    }
  }

  DqnConfig cfg;
  cfg.hidden = {};
  cfg.learning_rate = 0.01;
  cfg.adam_eps = 1e-8;
  cfg.max_grad_norm = 100.0;
  cfg.tau = 0.05;
  cfg.gamma = gamma;
  cfg.batch_size = static_cast<int>(edges.size());
  DqnLearner learner(n * n, 2, cfg, 0);
  for (const auto& [key, e] : edges) {
    Transition t;
    t.state = env.one_hot(key.first);
    t.action = key.second;
    t.next_state = env.one_hot(e.next);
    t.reward_ext = t.reward_train = e.reward;
    t.done = e.done;
    learner.buffer().push(t);
  }
  std::vector<std::size_t> all(edges.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  for (int step = 0; step < 6000; ++step) learner.update_on(all);
  double worst = 0.0;
  for (const auto& [key, value] : q)
    worst = std::max(worst, std::abs(learner.q_values(env.one_hot(key.first))(key.second) - value));
  EXPECT_LT(worst, 1e-2);
}

TEST(DqnLearner, SkipsUntilBufferHoldsABatch) {
  DqnConfig cfg;
  cfg.hidden = {4};
  cfg.batch_size = 8;
  DqnLearner learner(3, 2, cfg, 0);
  std::mt19937_64 rng(0);
  Transition t;
  t.state = Vec::Zero(3);
  t.next_state = Vec::Zero(3);
  for (int i = 0; i < 7; ++i) learner.buffer().push(t);
  EXPECT_TRUE(learner.update(rng).skipped);
  learner.buffer().push(t);
  EXPECT_FALSE(learner.update(rng).skipped);
}

TEST(A2c, UpdateReducesLossOnFixedBatch) {
  std::mt19937_64 rng(40);
  ActorCritic ac(6, 3, small_ac(4), 2);
  const RolloutBatch b = random_batch(6, 3, 4, 2, rng);
  const Vec y = n_step_returns(b, ac.config().gamma);
  const double before = value_loss(ac.value_net(), b.states, y, 1.0);
  for (int i = 0; i < 50; ++i) a2c_update(ac, b);
  EXPECT_LT(value_loss(ac.value_net(), b.states, y, 1.0), before);
}

TEST(A2c, GradientClippingBoundsEachNetwork) {
  std::mt19937_64 rng(41);
  ActorCriticConfig cfg = small_ac();
  cfg.max_grad_norm = 1e-3;
  ActorCritic ac(6, 3, cfg, 2);
  RolloutBatch b = random_batch(6, 3, 5, 2, rng);
  b.rewards *= 1000.0;
  const UpdateStats s = a2c_update(ac, b);
  EXPECT_GT(s.value_grad_norm, 1e-3);
  EXPECT_GT(s.policy_grad_norm, 1e-3);
  // After one step the first moment is 0.1 * (clipped gradient).
  EXPECT_NEAR(std::sqrt(ac.value_net().first_moment().squared_norm()), 1e-4, 1e-12);
  EXPECT_NEAR(std::sqrt(ac.policy().first_moment().squared_norm()), 1e-4, 1e-12);
}

TEST(Ppo, EpochsAndMinibatchesRun) {
  std::mt19937_64 rng(42);
  ActorCritic ac(6, 3, small_ac(4), 2);
  const RolloutBatch b = random_batch(6, 3, 4, 2, rng);
  PpoConfig ppo;
  ppo.epochs = 3;
  ppo.minibatches = 2;
  const Grads before = ac.policy().parameters();
  ppo_update(ac, b, ppo, rng);
  EXPECT_FALSE(ac.policy().parameters() == before);
  EXPECT_EQ(ac.policy().step_count(), 6);
  ppo.minibatches = 100;
  EXPECT_THROW(ppo_update(ac, b, ppo, rng), ConfigError);
}

TEST(Trainers, ParameterHashTracksUpdates) {
  std::mt19937_64 rng(43);
  A2cTrainer t(6, 3, small_ac(4), 1);
  const auto h0 = t.parameter_hash();
  EXPECT_EQ(h0, A2cTrainer(6, 3, small_ac(4), 1).parameter_hash());
  t.update(random_batch(6, 3, 4, 2, rng));
  EXPECT_NE(t.parameter_hash(), h0);
}

TEST(DqnTrainer, EpsilonGreedyBehavior) {
  DqnConfig cfg;
  cfg.hidden = {4};
  DqnTrainer t(3, 4, cfg, 5, 0.2, 0);
  const Mat p = t.behavior_probs(Mat::Identity(3, 3));
  for (Eigen::Index j = 0; j < 3; ++j) {
    EXPECT_NEAR(p.col(j).sum(), 1.0, 1e-15);
    EXPECT_NEAR(p.col(j).maxCoeff(), 0.8 + 0.05, 1e-15);
    EXPECT_NEAR(p.col(j).minCoeff(), 0.05, 1e-15);
  }
}

#include "derl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "derl/errors.hpp"
#include "derl/rng.hpp"

namespace derl {

namespace {

Mat log_softmax_columns(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double m = logits.col(j).maxCoeff();
    const double lse = m + std::log((logits.col(j).array() - m).exp().sum());
    out.col(j) = logits.col(j).array() - lse;
  }
  return out;
}

void check_finite(double loss, const char* where) {
  if (!std::isfinite(loss)) throw NumericError(std::string(where) + ": non-finite loss");
}

void check_batch(const Mat& states, std::size_t actions, Eigen::Index advantages) {
  if (static_cast<Eigen::Index>(actions) != states.cols() || advantages != states.cols())
    throw ConfigError("loss: batch size mismatch between states, actions and advantages");
}

// Entropy and KL contributions to the loss and to dL/dlogits for column j.
double regularizer_terms(const Mat& probs, const Mat& logp, Eigen::Index j, const ActorTerms& terms, Mat* d_logits,
                         double scale) {
  double loss = 0.0;
  if (terms.entropy_coef != 0.0) {
    const double h = -(probs.col(j).array() * logp.col(j).array()).sum();
    loss -= terms.entropy_coef * h;
    if (d_logits != nullptr)
      d_logits->col(j).array() +=
          scale * terms.entropy_coef * probs.col(j).array() * (logp.col(j).array() + h);
  }
  if (terms.kl_reference != nullptr && terms.kl_coef != 0.0) {
    const Eigen::ArrayXd log_q = terms.kl_reference->col(j).array().max(1e-8).log();
    const Eigen::ArrayXd diff = logp.col(j).array() - log_q;
    const double kl = (probs.col(j).array() * diff).sum();
    loss += terms.kl_coef * kl;
    if (d_logits != nullptr) d_logits->col(j).array() += scale * terms.kl_coef * probs.col(j).array() * (diff - kl);
  }
  return loss;
}

template <typename Fn>
LossAndGrads policy_backprop(const Net& policy, const Mat& states, Fn&& fill) {
  Net::Tape tape;
  const Mat logits = policy.forward_batch(states, tape);
  const Mat logp = log_softmax_columns(logits);
  const Mat probs = logp.array().exp().matrix();
  Mat d_logits = Mat::Zero(logits.rows(), logits.cols());
  LossAndGrads out;
  out.loss = fill(probs, logp, &d_logits);
  out.grads = policy.backward(tape, d_logits);
  return out;
}

template <typename Fn>
double policy_forward(const Net& policy, const Mat& states, Fn&& fill) {
  const Mat logp = log_softmax_columns(policy.forward_batch(states));
  const Mat probs = logp.array().exp().matrix();
  return fill(probs, logp, nullptr);
}

}  // namespace

Transition RolloutBatch::transition(int i) const {
  Transition t;
  t.state = states.col(i);
  t.action = actions[static_cast<std::size_t>(i)];
  t.reward_train = rewards(i);
  t.reward_ext = rewards_ext.size() > 0 ? rewards_ext(i) : rewards(i);
  t.next_state = next_states.size() > 0 ? Vec(next_states.col(i)) : Vec();
  t.done = dones[static_cast<std::size_t>(i)];
  t.behavior_prob = behavior_probs.size() > 0 ? behavior_probs(i) : 1.0;
  return t;
}

Vec n_step_returns(const Vec& rewards, const std::vector<bool>& dones, const Vec& bootstrap_values, int n_steps,
                   int num_envs, double gamma) {
  if (rewards.size() != static_cast<Eigen::Index>(n_steps) * num_envs ||
      dones.size() != static_cast<std::size_t>(rewards.size()) || bootstrap_values.size() != num_envs)
    throw ConfigError("n_step_returns: inconsistent batch shape");
  Vec out(rewards.size());
  for (int k = 0; k < num_envs; ++k) {
    double g = bootstrap_values(k);
    for (int t = n_steps - 1; t >= 0; --t) {
      const int i = t * num_envs + k;
      g = dones[static_cast<std::size_t>(i)] ? rewards(i) : rewards(i) + gamma * g;
      out(i) = g;
    }
  }
  return out;
}

Vec n_step_returns(const RolloutBatch& batch, double gamma) {
  return n_step_returns(batch.rewards, batch.dones, batch.bootstrap_values, batch.n_steps, batch.num_envs, gamma);
}

int sample_action(const Vec& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs(i);
    if (x < acc) return static_cast<int>(i);
  }
  // Rounding left x above the cumulative sum: take the last action with mass.
  for (Eigen::Index i = probs.size(); i-- > 0;)
    if (probs(i) > 0) return static_cast<int>(i);
  return 0;
}

// --- loss kernels ----------------------------------------------------------

namespace {

auto actor_fill(const std::vector<int>& actions, const Vec& advantages, const ActorTerms& terms) {
  return [&actions, &advantages, &terms](const Mat& probs, const Mat& logp, Mat* d_logits) {
    const Eigen::Index batch = probs.cols();
    const double scale = 1.0 / static_cast<double>(batch);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < batch; ++j) {
      const int a = actions[static_cast<std::size_t>(j)];
      const double w = terms.weights != nullptr ? (*terms.weights)(j) : 1.0;
      loss -= w * logp(a, j) * advantages(j);
      if (d_logits != nullptr) {
        // d(-w A log pi_a)/dz = -w A (onehot_a - pi)
        d_logits->col(j) += scale * w * advantages(j) * probs.col(j);
        (*d_logits)(a, j) -= scale * w * advantages(j);
      }
      loss += regularizer_terms(probs, logp, j, terms, d_logits, scale);
    }
    return loss * scale;
  };
}

auto surrogate_fill(const std::vector<int>& actions, const Vec& advantages, const Vec& reference_probs, double clip,
                    const ActorTerms& terms) {
  return [&, clip](const Mat& probs, const Mat& logp, Mat* d_logits) {
    const Eigen::Index batch = probs.cols();
    const double scale = 1.0 / static_cast<double>(batch);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < batch; ++j) {
      const int a = actions[static_cast<std::size_t>(j)];
      const double ratio = std::exp(logp(a, j)) / reference_probs(j);
      const double adv = advantages(j);
      const double unclipped = ratio * adv;
      const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;
      loss -= std::min(unclipped, clipped);
      if (d_logits != nullptr && unclipped <= clipped) {
        // d(-ratio A)/dz = -ratio A (onehot_a - pi)
        d_logits->col(j) += scale * unclipped * probs.col(j);
        (*d_logits)(a, j) -= scale * unclipped;
      }
      loss += regularizer_terms(probs, logp, j, terms, d_logits, scale);
    }
    return loss * scale;
  };
}

}  // namespace

double actor_loss(const Net& policy, const Mat& states, const std::vector<int>& actions, const Vec& advantages,
                  const ActorTerms& terms) {
  check_batch(states, actions.size(), advantages.size());
  return policy_forward(policy, states, actor_fill(actions, advantages, terms));
}

LossAndGrads actor_loss_and_grads(const Net& policy, const Mat& states, const std::vector<int>& actions,
                                  const Vec& advantages, const ActorTerms& terms) {
  check_batch(states, actions.size(), advantages.size());
  return policy_backprop(policy, states, actor_fill(actions, advantages, terms));
}

double clipped_surrogate_term(double ratio, double advantage, double clip) {
  return -std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

double clipped_surrogate_loss(const Net& policy, const Mat& states, const std::vector<int>& actions,
                              const Vec& advantages, const Vec& reference_probs, double clip,
                              const ActorTerms& terms) {
  check_batch(states, actions.size(), advantages.size());
  return policy_forward(policy, states, surrogate_fill(actions, advantages, reference_probs, clip, terms));
}

LossAndGrads clipped_surrogate_loss_and_grads(const Net& policy, const Mat& states, const std::vector<int>& actions,
                                              const Vec& advantages, const Vec& reference_probs, double clip,
                                              const ActorTerms& terms) {
  check_batch(states, actions.size(), advantages.size());
  return policy_backprop(policy, states, surrogate_fill(actions, advantages, reference_probs, clip, terms));
}

double value_loss(const Net& value, const Mat& states, const Vec& targets, double coef, const Vec* weights) {
  const Vec v = value.forward_batch(states).row(0).transpose();
  Eigen::ArrayXd sq = (v - targets).array().square();
  if (weights != nullptr) sq *= weights->array();
  return coef * sq.mean();
}

LossAndGrads value_loss_and_grads(const Net& value, const Mat& states, const Vec& targets, double coef,
                                  const Vec* weights) {
  if (targets.size() != states.cols()) throw ConfigError("value loss: batch size mismatch");
  Net::Tape tape;
  const Vec v = value.forward_batch(states, tape).row(0).transpose();
  Eigen::ArrayXd diff = (v - targets).array();
  const Eigen::ArrayXd w = weights != nullptr ? Eigen::ArrayXd(weights->array()) : Eigen::ArrayXd::Ones(diff.size());
  LossAndGrads out;
  out.loss = coef * (w * diff.square()).mean();
  Mat upstream = (coef * 2.0 * w * diff / static_cast<double>(diff.size())).matrix().transpose();
  out.grads = value.backward(tape, upstream);
  return out;
}

namespace {

double clipped_value_impl(const Net& value, const Mat& states, const Vec& targets, const Vec& old_values, double clip,
                          double coef, const Vec* weights, LossAndGrads* out) {
  if (targets.size() != states.cols() || old_values.size() != states.cols())
    throw ConfigError("clipped value loss: batch size mismatch");
  Net::Tape tape;
  const Vec v = out != nullptr ? Vec(value.forward_batch(states, tape).row(0).transpose())
                               : Vec(value.forward_batch(states).row(0).transpose());
  const Eigen::Index n = v.size();
  Mat upstream = Mat::Zero(1, n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights != nullptr ? (*weights)(i) : 1.0;
    const double delta = v(i) - old_values(i);
    const double vc = old_values(i) + std::clamp(delta, -clip, clip);
    const double u = (v(i) - targets(i)) * (v(i) - targets(i));
    const double c = (vc - targets(i)) * (vc - targets(i));
    if (u >= c) {
      loss += w * u;
      upstream(0, i) = 2.0 * w * (v(i) - targets(i));
    } else {
      loss += w * c;
      upstream(0, i) = std::abs(delta) < clip ? 2.0 * w * (vc - targets(i)) : 0.0;
    }
  }
  loss *= coef / static_cast<double>(n);
  if (out != nullptr) {
    out->loss = loss;
    out->grads = value.backward(tape, upstream * (coef / static_cast<double>(n)));
  }
  return loss;
}

}  // namespace

LossAndGrads clipped_value_loss_and_grads(const Net& value, const Mat& states, const Vec& targets,
                                          const Vec& old_values, double clip, double coef, const Vec* weights) {
  LossAndGrads out;
  clipped_value_impl(value, states, targets, old_values, clip, coef, weights, &out);
  return out;
}

double clipped_value_loss(const Net& value, const Mat& states, const Vec& targets, const Vec& old_values, double clip,
                          double coef, const Vec* weights) {
  return clipped_value_impl(value, states, targets, old_values, clip, coef, weights, nullptr);
}

// --- actor-critic ----------------------------------------------------------

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
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

}  // namespace

ActorCritic::ActorCritic(int observation_size, int num_actions, const ActorCriticConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      policy_(layer_sizes(observation_size, cfg.hidden, num_actions), cfg.activation, derive_seed(seed, {101})),
      value_(layer_sizes(observation_size, cfg.hidden, 1), cfg.activation, derive_seed(seed, {102})) {}

Mat ActorCritic::probs(const Mat& states) const { return softmax_columns(policy_.forward_batch(states)); }
Vec ActorCritic::probs(const Vec& state) const { return softmax(policy_.forward(state)); }
Vec ActorCritic::values(const Mat& states) const { return value_.forward_batch(states).row(0).transpose(); }
double ActorCritic::value(const Vec& state) const { return value_.forward(state)(0); }
int ActorCritic::act(const Vec& state, std::mt19937_64& rng) const { return sample_action(probs(state), rng); }
int ActorCritic::greedy(const Vec& state) const { return greedy_action(policy_.forward(state)); }

void ActorCritic::apply(Grads& policy_grads, Grads& value_grads, UpdateStats& stats) {
  stats.policy_grad_norm = clip_global_norm(policy_grads, cfg_.max_grad_norm);
  stats.value_grad_norm = clip_global_norm(value_grads, cfg_.max_grad_norm);
  policy_.adam_step(policy_grads, cfg_.learning_rate, cfg_.adam_eps);
  value_.adam_step(value_grads, cfg_.learning_rate, cfg_.adam_eps);
}

UpdateStats a2c_update(ActorCritic& ac, const RolloutBatch& batch, const Mat* kl_reference, double kl_coef) {
  const auto& cfg = ac.config();
  const Vec targets = n_step_returns(batch, cfg.gamma);
  const Vec advantages = targets - ac.values(batch.states);
  ActorTerms terms;
  terms.entropy_coef = cfg.entropy_coef;
  terms.kl_reference = kl_reference;
  terms.kl_coef = kl_coef;
  LossAndGrads pl = actor_loss_and_grads(ac.policy(), batch.states, batch.actions, advantages, terms);
  LossAndGrads vl = value_loss_and_grads(ac.value_net(), batch.states, targets, cfg.value_coef);
  check_finite(pl.loss, "a2c policy loss");
  check_finite(vl.loss, "a2c value loss");
  UpdateStats stats;
  stats.policy_loss = pl.loss;
  stats.value_loss = vl.loss;
  const Mat p = ac.probs(batch.states);
  double h = 0.0;
  for (Eigen::Index j = 0; j < p.cols(); ++j) h += entropy(p.col(j));
  stats.entropy = h / static_cast<double>(p.cols());
  ac.apply(pl.grads, vl.grads, stats);
  return stats;
}

UpdateStats ppo_update(ActorCritic& ac, const RolloutBatch& batch, const PpoConfig& ppo, std::mt19937_64& rng) {
  const auto& cfg = ac.config();
  const int n = batch.size();
  if (ppo.minibatches < 1 || ppo.minibatches > n) throw ConfigError("ppo: minibatches must be in [1, batch size]");
  const Vec targets = n_step_returns(batch, cfg.gamma);
  const Vec old_values = ac.values(batch.states);
  const Vec advantages = targets - old_values;
  const Mat old_probs_full = ac.probs(batch.states);
  Vec old_probs(n);
  for (int i = 0; i < n; ++i) old_probs(i) = old_probs_full(batch.actions[static_cast<std::size_t>(i)], i);

  ActorTerms terms;
  terms.entropy_coef = cfg.entropy_coef;
  UpdateStats stats;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  int steps = 0;
  for (int epoch = 0; epoch < ppo.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (int mb = 0; mb < ppo.minibatches; ++mb) {
      const int lo = mb * n / ppo.minibatches;
      const int hi = (mb + 1) * n / ppo.minibatches;
      const std::vector<int> idx(order.begin() + lo, order.begin() + hi);
      const Mat s = gather_columns(batch.states, idx);
      std::vector<int> a;
      for (int i : idx) a.push_back(batch.actions[static_cast<std::size_t>(i)]);
      const Vec adv = gather(advantages, idx);
      const Vec g = gather(targets, idx);
      LossAndGrads pl = clipped_surrogate_loss_and_grads(ac.policy(), s, a, adv, gather(old_probs, idx),
                                                         ppo.clip_ratio, terms);
      LossAndGrads vl = ppo.clip_value_loss
                            ? clipped_value_loss_and_grads(ac.value_net(), s, g, gather(old_values, idx),
                                                           ppo.clip_ratio, cfg.value_coef)
                            : value_loss_and_grads(ac.value_net(), s, g, cfg.value_coef);
      check_finite(pl.loss, "ppo policy loss");
      check_finite(vl.loss, "ppo value loss");
      stats.policy_loss += pl.loss;
      stats.value_loss += vl.loss;
      ac.apply(pl.grads, vl.grads, stats);
      ++steps;
    }
  }
  stats.policy_loss /= steps;
  stats.value_loss /= steps;
  return stats;
}

// --- replay ----------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  Stored s;
  s.state = t.state.sparseView();
  s.next_state = t.next_state.sparseView();
  s.action = t.action;
  s.reward_ext = t.reward_ext;
  s.reward_train = t.reward_train;
  s.done = t.done;
  s.behavior_prob = t.behavior_prob;
  if (data_.size() < capacity_) {
    data_.push_back(std::move(s));
    return;
  }
  data_[head_] = std::move(s);
  head_ = (head_ + 1) % capacity_;
}

const ReplayBuffer::Stored& ReplayBuffer::slot(std::size_t i) const {
  if (i >= data_.size()) throw UsageError("ReplayBuffer::at out of range");
  return data_[(head_ + i) % data_.size()];
}

Transition ReplayBuffer::at(std::size_t i) const {
  const Stored& s = slot(i);
  Transition t;
  t.state = Vec(s.state);
  t.next_state = Vec(s.next_state);
  t.action = s.action;
  t.reward_ext = s.reward_ext;
  t.reward_train = s.reward_train;
  t.done = s.done;
  t.behavior_prob = s.behavior_prob;
  return t;
}

void ReplayBuffer::copy_states(std::size_t i, Eigen::Ref<Vec> state, Eigen::Ref<Vec> next_state) const {
  const Stored& s = slot(i);
  state = s.state;
  next_state = s.next_state;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
  if (batch > data_.size()) throw UsageError("ReplayBuffer: batch larger than buffer");
  // Floyd's algorithm: distinct indices in O(batch).
  std::vector<std::size_t> out;
  std::unordered_set<std::size_t> seen;
  out.reserve(batch);
  const std::size_t n = data_.size();
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> dist(0, j);
    std::size_t t = dist(rng);
    if (!seen.insert(t).second) {
      seen.insert(j);
      t = j;
    }
    out.push_back(t);
  }
  return out;
}

// --- DQN -------------------------------------------------------------------

Vec double_dqn_targets(const Net& online, const Net& target, const Vec& rewards, const Mat& next_states,
                       const std::vector<bool>& dones, double gamma) {
  const Mat q_online = online.forward_batch(next_states);
  const Mat q_target = target.forward_batch(next_states);
  Vec y(rewards.size());
  for (Eigen::Index j = 0; j < rewards.size(); ++j) {
    y(j) = rewards(j);
    if (!dones[static_cast<std::size_t>(j)]) y(j) += gamma * q_target(greedy_action(q_online.col(j)), j);
  }
  return y;
}

DqnLearner::DqnLearner(int observation_size, int num_actions, const DqnConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      online_(layer_sizes(observation_size, cfg.hidden, num_actions), cfg.activation, derive_seed(seed, {201})),
      target_(online_),
      buffer_(cfg.buffer_capacity) {}

DqnStats DqnLearner::update(std::mt19937_64& rng) {
  if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) return {};
  return update_on(buffer_.sample_indices(static_cast<std::size_t>(cfg_.batch_size), rng));
}

DqnStats DqnLearner::update_on(const std::vector<std::size_t>& indices) {
  const auto b = static_cast<Eigen::Index>(indices.size());
  if (b == 0) return {};
  const Eigen::Index obs = online_.input_size();
  Mat s(obs, b), s_next(obs, b);
  Vec r(b);
  std::vector<bool> dones(indices.size());
  std::vector<int> actions(indices.size());
  for (Eigen::Index j = 0; j < b; ++j) {
    const std::size_t i = indices[static_cast<std::size_t>(j)];
    buffer_.copy_states(i, s.col(j), s_next.col(j));
    const Transition t = buffer_.at(i);
    r(j) = t.reward_train;
    dones[static_cast<std::size_t>(j)] = t.done;
    actions[static_cast<std::size_t>(j)] = t.action;
  }
  const Vec y = double_dqn_targets(online_, target_, r, s_next, dones, cfg_.gamma);
  Net::Tape tape;
  const Mat q = online_.forward_batch(s, tape);
  Mat upstream = Mat::Zero(q.rows(), b);
  DqnStats stats;
  stats.skipped = false;
  for (Eigen::Index j = 0; j < b; ++j) {
    const int a = actions[static_cast<std::size_t>(j)];
    const double diff = q(a, j) - y(j);
    stats.loss += diff * diff;
    stats.mean_q += q(a, j);
    upstream(a, j) = 2.0 * diff / static_cast<double>(b);
  }
  stats.loss /= static_cast<double>(b);
  stats.mean_q /= static_cast<double>(b);
  check_finite(stats.loss, "dqn loss");
  Grads g = online_.backward(tape, upstream);
  stats.grad_norm = clip_global_norm(g, cfg_.max_grad_norm);
  online_.adam_step(g, cfg_.learning_rate, cfg_.adam_eps);
  target_.soft_update_from(online_, cfg_.tau);
  return stats;
}

// --- trainers --------------------------------------------------------------

std::uint64_t hash_parameters(std::initializer_list<const Grads*> sets) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const double* p, Eigen::Index n) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < static_cast<std::size_t>(n) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const Grads* s : sets) {
    for (const auto& w : s->weights) mix(w.data(), w.size());
    for (const auto& b : s->biases) mix(b.data(), b.size());
  }
  return h;
}

A2cTrainer::A2cTrainer(int observation_size, int num_actions, const ActorCriticConfig& cfg, std::uint64_t seed)
    : ac_(observation_size, num_actions, cfg, seed) {}

std::uint64_t A2cTrainer::parameter_hash() const {
  return hash_parameters({&ac_.policy().parameters(), &ac_.value_net().parameters()});
}

PpoTrainer::PpoTrainer(int observation_size, int num_actions, const ActorCriticConfig& cfg, const PpoConfig& ppo,
                       std::uint64_t seed)
    : ac_(observation_size, num_actions, cfg, seed), ppo_(ppo), rng_(derive_seed(seed, {301})) {}

std::uint64_t PpoTrainer::parameter_hash() const {
  return hash_parameters({&ac_.policy().parameters(), &ac_.value_net().parameters()});
}

DqnTrainer::DqnTrainer(int observation_size, int num_actions, const DqnConfig& cfg, int block_length,
                       double epsilon, std::uint64_t seed)
    : learner_(observation_size, num_actions, cfg, seed),
      block_length_(block_length),
      epsilon_(epsilon),
      rng_(derive_seed(seed, {302})) {}

Mat DqnTrainer::behavior_probs(const Mat& states) const {
  const Mat q = learner_.online().forward_batch(states);
  const double uniform = epsilon_ / static_cast<double>(q.rows());
  Mat p = Mat::Constant(q.rows(), q.cols(), uniform);
  for (Eigen::Index j = 0; j < q.cols(); ++j) p(greedy_action(q.col(j)), j) += 1.0 - epsilon_;
  return p;
}

UpdateStats DqnTrainer::update(const RolloutBatch& batch) {
  for (int i = 0; i < batch.size(); ++i) learner_.buffer().push(batch.transition(i));
  const DqnStats d = learner_.update(rng_);
  UpdateStats stats;
  stats.value_loss = d.loss;
  stats.value_grad_norm = d.grad_norm;
  return stats;
}

std::uint64_t DqnTrainer::parameter_hash() const {
  return hash_parameters({&learner_.online().parameters(), &learner_.target().parameters()});
}

}  // namespace derl

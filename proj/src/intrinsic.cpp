#include "derl/intrinsic.hpp"

#include <cmath>
#include <random>

#include "derl/errors.hpp"
#include "derl/rng.hpp"

namespace derl {

IntrinsicKind parse_intrinsic_kind(const std::string& name) {
  if (name == "none") return IntrinsicKind::None;
  if (name == "count") return IntrinsicKind::Count;
  if (name == "hash_count") return IntrinsicKind::HashCount;
  if (name == "icm") return IntrinsicKind::Icm;
  if (name == "rnd") return IntrinsicKind::Rnd;
  if (name == "ride") return IntrinsicKind::Ride;
  throw ConfigError("unknown intrinsic reward '" + name + "'");
}

std::string to_string(IntrinsicKind kind) {
  switch (kind) {
    case IntrinsicKind::None: return "none";
    case IntrinsicKind::Count: return "count";
    case IntrinsicKind::HashCount: return "hash_count";
    case IntrinsicKind::Icm: return "icm";
    case IntrinsicKind::Rnd: return "rnd";
    case IntrinsicKind::Ride: return "ride";
  }
  return "none";
}

bool is_count_based(IntrinsicKind kind) { return kind == IntrinsicKind::Count || kind == IntrinsicKind::HashCount; }

bool is_prediction_based(IntrinsicKind kind) {
  return kind == IntrinsicKind::Icm || kind == IntrinsicKind::Rnd || kind == IntrinsicKind::Ride;
}

// --- counts ----------------------------------------------------------------

CountTable::CountTable(double increment) : increment_(increment) {
  if (!(increment > 0)) throw ConfigError("count increment must be positive");
}

double CountTable::reward(std::uint64_t key) {
  double& n = counts_[key];
  n += increment_;
  return 1.0 / std::sqrt(n);
}

double CountTable::mass(std::uint64_t key) const {
  auto it = counts_.find(key);
  return it == counts_.end() ? 0.0 : it->second;
}

SimHasher::SimHasher(int observation_size, int key_bits, std::uint64_t seed) {
  if (key_bits < 1) throw ConfigError("hash_k must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  projection_.resize(key_bits, observation_size);
  for (Eigen::Index j = 0; j < projection_.cols(); ++j)
    for (Eigen::Index i = 0; i < projection_.rows(); ++i) projection_(i, j) = normal(rng);
}

std::vector<bool> SimHasher::bits(const Vec& obs) const {
  if (obs.size() != projection_.cols()) throw ConfigError("SimHasher: observation size mismatch");
  const Vec proj = projection_ * obs;
  std::vector<bool> out(static_cast<std::size_t>(proj.size()));
  for (Eigen::Index i = 0; i < proj.size(); ++i) out[static_cast<std::size_t>(i)] = proj(i) >= 0.0;
  return out;
}

std::uint64_t SimHasher::key(const Vec& obs) const {
  const std::vector<bool> b = bits(obs);
  std::uint64_t word = 0;
  std::uint64_t folded = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i]) word |= std::uint64_t{1} << (i % 64);
    if (i % 64 == 63 || i + 1 == b.size()) {
      folded = b.size() <= 64 ? word : mix64(folded ^ word);
      word = 0;
    }
  }
  return folded;
}

// --- normalizer ------------------------------------------------------------

RunningNormalizer::RunningNormalizer(int width, Mode mode, bool enabled)
    : mode_(mode), enabled_(enabled), mean_(Vec::Zero(width)), m2_(Vec::Zero(width)) {}

Vec RunningNormalizer::variance() const {
  if (count_ == 0) return Vec::Ones(mean_.size());
  return m2_ / static_cast<double>(count_);
}

Vec RunningNormalizer::update(const Vec& x) {
  if (!enabled_) return x;
  if (x.size() != mean_.size()) throw ConfigError("RunningNormalizer: width mismatch");
  ++count_;
  const Vec delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_ += delta.cwiseProduct(x - mean_);
  return normalize(x);
}

double RunningNormalizer::update(double x) {
  Vec v(1);
  v(0) = x;
  return update(v)(0);
}

Vec RunningNormalizer::normalize(const Vec& x) const {
  if (!enabled_) return x;
  const Vec scale = (variance().array() + kEpsilon).sqrt().matrix();
  if (mode_ == Mode::Center) return (x - mean_).cwiseQuotient(scale);
  return x.cwiseQuotient(scale);
}

double RunningNormalizer::normalize(double x) const {
  Vec v(1);
  v(0) = x;
  return normalize(v)(0);
}

// --- ICM -------------------------------------------------------------------

namespace {

std::vector<int> sizes_with(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

Mat hstack(const Mat& a, const Mat& b) {
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Mat vstack(const Mat& a, const Mat& b) {
  Mat out(a.rows() + b.rows(), a.cols());
  out << a, b;
  return out;
}

void check_finite(double loss, const char* where) {
  if (!std::isfinite(loss)) throw NumericError(std::string(where) + ": non-finite loss");
}

}  // namespace

IcmModel::IcmModel(const PredictionModelConfig& cfg)
    : cfg_(cfg),
      embed_(sizes_with(cfg.observation_size, cfg.embed_hidden, cfg.embed_dim), cfg.activation,
             derive_seed(cfg.seed, {1})),
      forward_({cfg.embed_dim + cfg.num_actions, cfg.head_hidden, cfg.embed_dim}, cfg.activation,
               derive_seed(cfg.seed, {2})),
      inverse_({2 * cfg.embed_dim, cfg.head_hidden, cfg.num_actions}, cfg.activation, derive_seed(cfg.seed, {3})) {}

Mat IcmModel::forward_input(const Mat& embedded, const std::vector<int>& actions) const {
  if (static_cast<Eigen::Index>(actions.size()) != embedded.cols())
    throw ConfigError("ICM: one action per transition required");
  Mat x = Mat::Zero(cfg_.embed_dim + cfg_.num_actions, embedded.cols());
  x.topRows(cfg_.embed_dim) = embedded;
  for (std::size_t j = 0; j < actions.size(); ++j) {
    if (actions[j] < 0 || actions[j] >= cfg_.num_actions) throw ConfigError("ICM: action out of range");
    x(cfg_.embed_dim + actions[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return x;
}

Vec IcmModel::prediction_error(const Mat& states, const std::vector<int>& actions, const Mat& next_states) const {
  const Mat e = embed_.forward_batch(states);
  const Mat e_next = embed_.forward_batch(next_states);
  const Mat pred = forward_.forward_batch(forward_input(e, actions));
  return (pred - e_next).colwise().squaredNorm().transpose();
}

Vec IcmModel::embedding_change(const Mat& states, const Mat& next_states) const {
  return (embed_.forward_batch(next_states) - embed_.forward_batch(states)).colwise().squaredNorm().transpose();
}

double IcmModel::loss(const Mat& states, const std::vector<int>& actions, const Mat& next_states) const {
  const Eigen::Index batch = states.cols();
  const Mat e = embed_.forward_batch(states);
  const Mat e_next = embed_.forward_batch(next_states);
  const Mat pred = forward_.forward_batch(forward_input(e, actions));
  const double forward_loss = (pred - e_next).squaredNorm() / static_cast<double>(batch * cfg_.embed_dim);
  const Mat logits = inverse_.forward_batch(vstack(e, e_next));
  double inverse_loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const Vec p = softmax(logits.col(j));
    inverse_loss -= std::log(p(actions[static_cast<std::size_t>(j)]));
  }
  inverse_loss /= static_cast<double>(batch);
  return cfg_.forward_coef * forward_loss + cfg_.inverse_coef * inverse_loss;
}

IcmModel::Gradients IcmModel::gradients(const Mat& states, const std::vector<int>& actions,
                                        const Mat& next_states) const {
  const Eigen::Index batch = states.cols();
  const int dim = cfg_.embed_dim;
  Net::Tape embed_tape;
  const Mat both = embed_.forward_batch(hstack(states, next_states), embed_tape);
  const Mat e = both.leftCols(batch);
  const Mat e_next = both.rightCols(batch);

  Net::Tape fwd_tape;
  const Mat pred = forward_.forward_batch(forward_input(e, actions), fwd_tape);
  const Mat diff = pred - e_next;
  const double forward_loss = diff.squaredNorm() / static_cast<double>(batch * dim);
  const Mat d_pred = cfg_.forward_coef * 2.0 * diff / static_cast<double>(batch * dim);

  Net::Tape inv_tape;
  const Mat logits = inverse_.forward_batch(vstack(e, e_next), inv_tape);
  Mat d_logits = softmax_columns(logits);
  double inverse_loss = 0.0;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const int a = actions[static_cast<std::size_t>(j)];
    inverse_loss -= std::log(d_logits(a, j));
    d_logits(a, j) -= 1.0;
  }
  inverse_loss /= static_cast<double>(batch);
  d_logits *= cfg_.inverse_coef / static_cast<double>(batch);

  Gradients g;
  g.loss = cfg_.forward_coef * forward_loss + cfg_.inverse_coef * inverse_loss;
  Mat d_fwd_in;
  g.forward = forward_.backward(fwd_tape, d_pred, &d_fwd_in);
  Mat d_inv_in;
  g.inverse = inverse_.backward(inv_tape, d_logits, &d_inv_in);

  Mat d_embed(dim, 2 * batch);
  d_embed.leftCols(batch) = d_fwd_in.topRows(dim) + d_inv_in.topRows(dim);
  d_embed.rightCols(batch) = d_inv_in.bottomRows(dim);
  g.embedding = embed_.backward(embed_tape, d_embed);
  return g;
}

double IcmModel::update(const Mat& states, const std::vector<int>& actions, const Mat& next_states) {
  Gradients g = gradients(states, actions, next_states);
  check_finite(g.loss, "ICM update");
  embed_.adam_step(g.embedding, cfg_.learning_rate, cfg_.adam_eps);
  forward_.adam_step(g.forward, cfg_.learning_rate, cfg_.adam_eps);
  inverse_.adam_step(g.inverse, cfg_.learning_rate, cfg_.adam_eps);
  return g.loss;
}

Vec IcmModel::reward_and_update(const Mat& states, const std::vector<int>& actions, const Mat& next_states) {
  Vec r = prediction_error(states, actions, next_states);
  update(states, actions, next_states);
  return r;
}

// --- RND -------------------------------------------------------------------

RndModel::RndModel(const PredictionModelConfig& cfg)
    : cfg_(cfg),
      target_(sizes_with(cfg.observation_size, cfg.embed_hidden, cfg.embed_dim), cfg.activation,
              derive_seed(cfg.seed, {11})),
      predictor_(sizes_with(cfg.observation_size, cfg.embed_hidden, cfg.embed_dim), cfg.activation,
                 derive_seed(cfg.seed, {12})) {}

Vec RndModel::prediction_error(const Mat& states) const {
  return (predictor_.forward_batch(states) - target_.forward_batch(states)).colwise().squaredNorm().transpose();
}

double RndModel::loss(const Mat& states) const {
  return (predictor_.forward_batch(states) - target_.forward_batch(states)).squaredNorm() /
         static_cast<double>(states.cols() * cfg_.embed_dim);
}

Grads RndModel::gradients(const Mat& states) const {
  Net::Tape tape;
  const Mat pred = predictor_.forward_batch(states, tape);
  const Mat diff = pred - target_.forward_batch(states);
  return predictor_.backward(tape, 2.0 * diff / static_cast<double>(states.cols() * cfg_.embed_dim));
}

Vec RndModel::reward_and_update(const Mat& states) {
  Vec r = prediction_error(states);
  check_finite(r.sum(), "RND update");
  predictor_.adam_step(gradients(states), cfg_.learning_rate, cfg_.adam_eps);
  return r;
}

// --- RIDE ------------------------------------------------------------------

RideModel::RideModel(const PredictionModelConfig& cfg, int num_lanes)
    : icm_(cfg), episodic_(static_cast<std::size_t>(num_lanes), CountTable(1.0)) {}

double RideModel::reward(int lane, const Vec& state, const Vec& next_state, int next_index) {
  const double change = (icm_.embedding().forward(next_state) - icm_.embedding().forward(state)).squaredNorm();
  const double inv_sqrt_count = episodic_.at(static_cast<std::size_t>(lane)).reward(static_cast<std::uint64_t>(next_index));
  return change * inv_sqrt_count;
}

Vec RideModel::reward_and_update(const IntrinsicBatch& batch) {
  const Vec change = icm_.embedding_change(batch.states, batch.next_states);
  Vec r(batch.size());
  for (int i = 0; i < batch.size(); ++i) {
    auto& table = episodic_.at(static_cast<std::size_t>(i));
    r(i) = change(i) * table.reward(static_cast<std::uint64_t>(batch.next_indices[static_cast<std::size_t>(i)]));
  }
  icm_.update(batch.states, batch.actions, batch.next_states);
  for (int i = 0; i < batch.size(); ++i)
    if (batch.dones[static_cast<std::size_t>(i)]) begin_episode(i);
  return r;
}

void RideModel::begin_episode(int lane) { episodic_.at(static_cast<std::size_t>(lane)).clear(); }

// --- generators ------------------------------------------------------------

namespace {

class NoIntrinsic final : public IntrinsicGenerator {
 public:
  Vec compute(const IntrinsicBatch& batch) override { return Vec::Zero(batch.size()); }
  IntrinsicKind kind() const override { return IntrinsicKind::None; }
};

class CountIntrinsic final : public IntrinsicGenerator {
 public:
  explicit CountIntrinsic(double increment) : table_(increment) {}
  Vec compute(const IntrinsicBatch& batch) override {
    Vec r(batch.size());
    for (int i = 0; i < batch.size(); ++i)
      r(i) = table_.reward(static_cast<std::uint64_t>(batch.next_indices[static_cast<std::size_t>(i)]));
    return r;
  }
  IntrinsicKind kind() const override { return IntrinsicKind::Count; }

 private:
  CountTable table_;
};

class HashCountIntrinsic final : public IntrinsicGenerator {
 public:
  HashCountIntrinsic(double increment, int obs_size, int k, std::uint64_t seed)
      : table_(increment), hasher_(obs_size, k, seed) {}
  Vec compute(const IntrinsicBatch& batch) override {
    Vec r(batch.size());
    for (int i = 0; i < batch.size(); ++i) r(i) = table_.reward(hasher_.key(batch.next_states.col(i)));
    return r;
  }
  IntrinsicKind kind() const override { return IntrinsicKind::HashCount; }

 private:
  CountTable table_;
  SimHasher hasher_;
};

class IcmIntrinsic final : public IntrinsicGenerator {
 public:
  explicit IcmIntrinsic(const PredictionModelConfig& cfg) : model_(cfg) {}
  Vec compute(const IntrinsicBatch& batch) override {
    return model_.reward_and_update(batch.states, batch.actions, batch.next_states);
  }
  IntrinsicKind kind() const override { return IntrinsicKind::Icm; }

 private:
  IcmModel model_;
};

class RndIntrinsic final : public IntrinsicGenerator {
 public:
  explicit RndIntrinsic(const PredictionModelConfig& cfg) : model_(cfg) {}
  Vec compute(const IntrinsicBatch& batch) override { return model_.reward_and_update(batch.next_states); }
  IntrinsicKind kind() const override { return IntrinsicKind::Rnd; }

 private:
  RndModel model_;
};

class RideIntrinsic final : public IntrinsicGenerator {
 public:
  RideIntrinsic(const PredictionModelConfig& cfg, int lanes) : model_(cfg, lanes) {}
  Vec compute(const IntrinsicBatch& batch) override { return model_.reward_and_update(batch); }
  IntrinsicKind kind() const override { return IntrinsicKind::Ride; }

 private:
  RideModel model_;
};

}  // namespace

std::unique_ptr<IntrinsicGenerator> make_intrinsic(const IntrinsicConfig& cfg) {
  switch (cfg.kind) {
    case IntrinsicKind::None: return std::make_unique<NoIntrinsic>();
    case IntrinsicKind::Count: return std::make_unique<CountIntrinsic>(cfg.count_increment);
    case IntrinsicKind::HashCount:
      return std::make_unique<HashCountIntrinsic>(cfg.count_increment, cfg.model.observation_size, cfg.hash_k,
                                                  derive_seed(cfg.model.seed, {21}));
    case IntrinsicKind::Icm: return std::make_unique<IcmIntrinsic>(cfg.model);
    case IntrinsicKind::Rnd: return std::make_unique<RndIntrinsic>(cfg.model);
    case IntrinsicKind::Ride: return std::make_unique<RideIntrinsic>(cfg.model, cfg.num_lanes);
  }
  throw ConfigError("unknown intrinsic kind");
}

}  // namespace derl

#pragma once

// Intrinsic rewards: tabular counts, SimHash pseudo-counts, ICM, RND and
// RIDE, plus the running normalizers used on observations and rewards.

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "derl/nn.hpp"

namespace derl {

enum class IntrinsicKind { None, Count, HashCount, Icm, Rnd, Ride };

IntrinsicKind parse_intrinsic_kind(const std::string& name);
std::string to_string(IntrinsicKind kind);
bool is_count_based(IntrinsicKind kind);
bool is_prediction_based(IntrinsicKind kind);

/// r = r_ext + lambda * r_int.
inline double combine(double r_ext, double r_int, double lambda) { return r_ext + lambda * r_int; }

/// Visitation masses keyed by a discrete state key. reward() increments first,
/// so the first visit with increment c pays 1/sqrt(c).
class CountTable {
 public:
  explicit CountTable(double increment = 1.0);

  double reward(std::uint64_t key);
  double mass(std::uint64_t key) const;
  double increment() const { return increment_; }
  std::size_t size() const { return counts_.size(); }
  bool empty() const { return counts_.empty(); }
  void clear() { counts_.clear(); }

 private:
  double increment_;
  std::unordered_map<std::uint64_t, double> counts_;
};

/// Locality-sensitive hashing by signs of a fixed Gaussian projection.
class SimHasher {
 public:
  SimHasher(int observation_size, int key_bits, std::uint64_t seed);

  /// Bit i is set when row i of the projection has a nonnegative dot product
  /// with obs (sign(0) = +1).
  std::vector<bool> bits(const Vec& obs) const;
  /// Bits packed into one word. Exact for key_bits <= 64; longer keys are
  /// folded through a 64-bit mixer.
  std::uint64_t key(const Vec& obs) const;

  int key_bits() const { return static_cast<int>(projection_.rows()); }
  const Mat& projection() const { return projection_; }

 private:
  Mat projection_;
};

/// Welford running mean/variance over fixed-width vectors (population
/// variance). Scalar streams use width 1.
class RunningNormalizer {
 public:
  enum class Mode { Center, ScaleOnly };

  RunningNormalizer() = default;
  RunningNormalizer(int width, Mode mode, bool enabled);

  /// Folds x into the statistics, then returns its normalized value.
  Vec update(const Vec& x);
  double update(double x);
  /// Normalizes with the current statistics without updating them.
  Vec normalize(const Vec& x) const;
  double normalize(double x) const;

  bool enabled() const { return enabled_; }
  std::int64_t count() const { return count_; }
  const Vec& mean() const { return mean_; }
  Vec variance() const;

  static constexpr double kEpsilon = 1e-8;

 private:
  Mode mode_ = Mode::Center;
  bool enabled_ = false;
  std::int64_t count_ = 0;
  Vec mean_;
  Vec m2_;
};

/// One step of K lanes as seen by an intrinsic generator. next_states holds
/// the observation each step produced (terminal observation on done lanes).
struct IntrinsicBatch {
  Mat states;
  std::vector<int> state_indices;
  std::vector<int> actions;
  Mat next_states;
  std::vector<int> next_indices;
  std::vector<bool> dones;

  int size() const { return static_cast<int>(actions.size()); }
};

struct PredictionModelConfig {
  int observation_size = 0;
  int num_actions = 0;
  std::vector<int> embed_hidden{64, 64};
  int embed_dim = 16;
  int head_hidden = 64;
  Activation activation = Activation::ReLU;
  double learning_rate = 1e-5;
  double adam_eps = 1e-8;
  double forward_coef = 5.0;
  double inverse_coef = 1.0;
  std::uint64_t seed = 0;
};

/// Embedding phi, forward model (phi(s), onehot(a)) -> phi(s'), inverse model
/// (phi(s), phi(s')) -> action logits, trained jointly on
/// forward_coef * MSE + inverse_coef * cross-entropy. The forward-model target
/// phi(s') is held constant in the forward loss.
class IcmModel {
 public:
  struct Gradients {
    double loss = 0.0;
    Grads embedding;
    Grads forward;
    Grads inverse;
  };

  explicit IcmModel(const PredictionModelConfig& cfg);

  /// Forward-prediction error ||phi_hat(s') - phi(s')||^2 per column.
  Vec prediction_error(const Mat& states, const std::vector<int>& actions, const Mat& next_states) const;
  /// ||phi(s') - phi(s)||^2 per column.
  Vec embedding_change(const Mat& states, const Mat& next_states) const;

  double loss(const Mat& states, const std::vector<int>& actions, const Mat& next_states) const;
  Gradients gradients(const Mat& states, const std::vector<int>& actions, const Mat& next_states) const;
  /// One Adam step on every sub-network. Returns the loss before the step.
  double update(const Mat& states, const std::vector<int>& actions, const Mat& next_states);

  /// Prediction error computed before the update, then one update.
  Vec reward_and_update(const Mat& states, const std::vector<int>& actions, const Mat& next_states);

  Net& embedding() { return embed_; }
  Net& forward_model() { return forward_; }
  Net& inverse_model() { return inverse_; }
  const Net& embedding() const { return embed_; }
  const PredictionModelConfig& config() const { return cfg_; }

 private:
  Mat forward_input(const Mat& embedded, const std::vector<int>& actions) const;

  PredictionModelConfig cfg_;
  Net embed_;
  Net forward_;
  Net inverse_;
};

/// Fixed random target network and a trained predictor; the reward is the
/// predictor's squared error.
class RndModel {
 public:
  explicit RndModel(const PredictionModelConfig& cfg);

  Vec prediction_error(const Mat& states) const;
  double loss(const Mat& states) const;
  Grads gradients(const Mat& states) const;
  Vec reward_and_update(const Mat& states);

  Net& predictor() { return predictor_; }
  const Net& target() const { return target_; }

 private:
  PredictionModelConfig cfg_;
  Net target_;
  Net predictor_;
};

/// ICM machinery plus one episodic count table per lane. The reward is
/// ||phi(s') - phi(s)||^2 / sqrt(N_ep(s')).
class RideModel {
 public:
  RideModel(const PredictionModelConfig& cfg, int num_lanes);

  /// Increments the lane's episodic count of next_index and returns the
  /// impact reward for one transition. Does not train.
  double reward(int lane, const Vec& state, const Vec& next_state, int next_index);
  Vec reward_and_update(const IntrinsicBatch& batch);
  void begin_episode(int lane);

  const CountTable& episodic_counts(int lane) const { return episodic_[static_cast<std::size_t>(lane)]; }
  IcmModel& icm() { return icm_; }

 private:
  IcmModel icm_;
  std::vector<CountTable> episodic_;
};

/// The generator a trainer consults once per vectorized step.
class IntrinsicGenerator {
 public:
  virtual ~IntrinsicGenerator() = default;
  /// Intrinsic reward per lane; learned models take one update on the batch.
  virtual Vec compute(const IntrinsicBatch& batch) = 0;
  virtual IntrinsicKind kind() const = 0;
};

struct IntrinsicConfig {
  IntrinsicKind kind = IntrinsicKind::None;
  double count_increment = 1.0;
  int hash_k = 16;
  PredictionModelConfig model;
  int num_lanes = 4;
};

std::unique_ptr<IntrinsicGenerator> make_intrinsic(const IntrinsicConfig& cfg);

}  // namespace derl

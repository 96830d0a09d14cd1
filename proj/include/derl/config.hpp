#pragma once

// Experiment configuration: a flat, sectioned key = value document
//
//   gamma = 0.99
//   [env]
//   name = deepsea
//   size = 10
//   [algo]
//   name = dea2c
//
// Keys may also be written fully dotted (`env.size = 10`) anywhere. Values
// resolve as command-line overrides > file > per-(env, algo, intrinsic)
// defaults. Unknown keys, malformed values and out-of-range values raise
// ConfigError naming the key.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "derl/agents.hpp"
#include "derl/decoupled.hpp"
#include "derl/envs.hpp"
#include "derl/intrinsic.hpp"

namespace derl {

inline constexpr const char* kVersion = "derl 0.1.0";

enum class Algo { A2C, PPO, DQN, DeA2C, DePPO, DeDQN };

Algo parse_algo(const std::string& name);
std::string to_string(Algo algo);
bool is_decoupled(Algo algo);

/// Learner hyperparameters. Fields that a learner does not use are carried
/// but ignored (e.g. tau for actor-critic learners).
struct AgentParams {
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::ReLU;
  double learning_rate = 1e-3;
  double adam_eps = 1e-3;
  double max_grad_norm = 0.5;
  double entropy_coef = 1e-4;
  double value_coef = 0.5;
  int n_steps = 5;
  int epochs = 10;
  int minibatches = 4;
  double clip_ratio = 0.1;
  bool clip_value_loss = true;
  double tau = 0.01;
  int batch_size = 256;
  int buffer_capacity = 100000;
  double epsilon = 0.1;  // epsilon-greedy exploration of the stand-alone DQN

  bool operator==(const AgentParams&) const = default;
};

struct IntrinsicParams {
  IntrinsicKind kind = IntrinsicKind::None;
  double lambda = 1.0;
  double count_increment = 1.0;
  int hash_k = 16;
  double learning_rate = 1e-5;
  double forward_coef = 5.0;
  double inverse_coef = 1.0;

  bool operator==(const IntrinsicParams&) const = default;
};

struct ScheduleParams {
  std::int64_t episodes = 100000;
  std::int64_t eval_every = 1000;
  int eval_episodes = 8;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};

  bool operator==(const ScheduleParams&) const = default;
};

struct DecoupledParams {
  int t_dec = 1;
  double alpha_beta = 0.0;
  double alpha_e = 0.0;
  bool retrace = false;
  bool pure_intrinsic = false;

  bool operator==(const DecoupledParams&) const = default;
};

struct ExperimentConfig {
  EnvSpec env;
  Algo algo = Algo::A2C;
  AgentParams agent;    // [algo]: the learner of a baseline, pi_e of a decoupled run
  AgentParams explore;  // [explore]: pi_beta of a decoupled run
  IntrinsicParams intrinsic;
  DecoupledParams decoupled;
  ScheduleParams schedule;
  double gamma = 0.99;
  bool normalize_obs = false;
  bool normalize_rewards = false;
  int num_envs = 4;

  ActorCriticConfig actor_critic_config() const;
  ActorCriticConfig exploration_config() const;
  PpoConfig ppo_config() const;
  DqnConfig dqn_config() const;
  DecoupledConfig decoupled_config() const;
  IntrinsicConfig intrinsic_config(int observation_size, int num_actions, std::uint64_t seed) const;
  /// "<algo>-<intrinsic>", e.g. "dea2c-count".
  std::string cell_name() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Defaults for a combination; total over every env, algo and intrinsic.
ExperimentConfig default_config(const std::string& env_name, Algo algo, IntrinsicKind intrinsic);

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Parses "key=value" (CLI form).
std::pair<std::string, std::string> parse_assignment(const std::string& text);

/// Resolves a document plus CLI overrides into a validated config.
ExperimentConfig parse_config(const std::string& document, const Overrides& overrides = {});
ExperimentConfig load_config(const std::string& path, const Overrides& overrides = {});

/// Range checks; throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);

/// Optional [meta] section of an emitted snapshot.
struct SnapshotMeta {
  std::uint64_t seed = 0;
  double optimal_return = 0.0;
};

/// Canonical document listing every key; parse_config(emit(c)) == c.
std::string emit_config(const ExperimentConfig& cfg, const SnapshotMeta* meta = nullptr);

/// Every known key in canonical order.
std::vector<std::string> config_keys();
/// Canonical text of one key's value.
std::string config_value(const ExperimentConfig& cfg, const std::string& key);

enum class SweepKind { Lambda, Decay };
SweepKind parse_sweep_kind(const std::string& name);
std::string to_string(SweepKind kind);

struct SweepPoint {
  std::string label;  // "<kind>-<value>"
  std::string key;
  double value = 0.0;
  ExperimentConfig config;
};

const std::vector<double>& lambda_sweep_values();
const std::vector<double>& count_decay_values();
const std::vector<double>& learning_rate_decay_values();

/// Copies of base differing only in the swept key. Decay sweeps vary the
/// count increment for count-based rewards and the model learning rate for
/// prediction-based ones; a decay sweep without intrinsic reward is a
/// UsageError.
std::vector<SweepPoint> generate_sweep(SweepKind kind, const ExperimentConfig& base);

/// Shortest round-trip text of a double.
std::string format_double(double x);

}  // namespace derl

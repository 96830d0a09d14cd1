#include "derl/envs.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <random>
#include <unordered_map>

namespace derl {

std::string EnvSpec::task_name() const {
  if (name == "deepsea") return "deepsea-" + std::to_string(size);
  return "hallway-" + std::to_string(n_left) + "-" + std::to_string(n_right);
}

// --- DeepSea ---------------------------------------------------------------

DeepSeaEnv::DeepSeaEnv(int size, std::uint64_t task_seed) : size_(size) {
  if (size < 1) throw ConfigError("deepsea size must be >= 1");
  std::mt19937_64 rng(task_seed);
  flip_.resize(static_cast<std::size_t>(size));
  for (int r = 0; r < size; ++r) flip_[static_cast<std::size_t>(r)] = (rng() >> 63) != 0;
}

int DeepSeaEnv::observation_index() const {
  // After the final step the agent has left the grid; it is reported on the
  // bottom row so the observation stays one-hot.
  const int r = std::min(row_, size_ - 1);
  return r * size_ + column_;
}

StepResult DeepSeaEnv::reset(std::uint64_t) {
  row_ = 0;
  column_ = 0;
  return {one_hot(observation_index()), observation_index(), 0.0, false};
}

StepResult DeepSeaEnv::step(int action) {
  if (done()) throw UsageError("deepsea: step after episode end");
  if (action < 0 || action > 1) throw UsageError("deepsea: action must be 0 or 1");
  double reward = 0.0;
  const bool right = action == right_action(row_);
  if (right) {
    if (row_ == size_ - 1 && column_ == size_ - 1) reward += 1.0;
    reward -= 0.01 / static_cast<double>(size_);
    column_ = std::min(column_ + 1, size_ - 1);
  } else {
    column_ = std::max(column_ - 1, 0);
  }
  ++row_;
  return {one_hot(observation_index()), observation_index(), reward, done()};
}

std::uint64_t DeepSeaEnv::state_key() const {
  return static_cast<std::uint64_t>(row_) * static_cast<std::uint64_t>(size_ + 1) +
         static_cast<std::uint64_t>(column_);
}

// --- Hallway ---------------------------------------------------------------

HallwayEnv::HallwayEnv(int n_left, int n_right) : n_left_(n_left), n_right_(n_right) {
  if (n_left < 1) throw ConfigError("hallway n_left must be >= 1");
  if (n_right < 0) throw ConfigError("hallway n_right must be >= 0");
}

StepResult HallwayEnv::reset(std::uint64_t) {
  position_ = 0;
  t_ = 0;
  stays_ = 0;
  reached_ = false;
  return {one_hot(position_), position_, 0.0, false};
}

StepResult HallwayEnv::step(int action) {
  if (done()) throw UsageError("hallway: step after episode end");
  if (action < kLeft || action > kRight) throw UsageError("hallway: action must be 0, 1 or 2");
  double reward = 0.0;
  const int last = n_left_ + n_right_;
  const bool was_at_goal = position_ == n_left_;
  if (action == kLeft) {
    position_ = std::max(position_ - 1, 0);
  } else {
    reward -= 0.01;
    if (action == kRight) position_ = std::min(position_ + 1, last);
  }
  if (action == kStay && was_at_goal) {
    ++stays_;
    if (stays_ % kStayBonusPeriod == 0) reward += 1.0;
  } else {
    stays_ = 0;
  }
  if (position_ == n_left_ && !reached_) {
    reached_ = true;
    reward += 1.0;
  }
  ++t_;
  return {one_hot(position_), position_, reward, done()};
}

std::uint64_t HallwayEnv::state_key() const {
  const auto h = static_cast<std::uint64_t>(horizon() + 1);
  return ((static_cast<std::uint64_t>(position_) * h + static_cast<std::uint64_t>(t_)) * h +
          static_cast<std::uint64_t>(stays_)) *
             2 +
         (reached_ ? 1 : 0);
}

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  if (spec.name == "deepsea") return std::make_unique<DeepSeaEnv>(spec.size, spec.task_seed);
  if (spec.name == "hallway") return std::make_unique<HallwayEnv>(spec.n_left, spec.n_right);
  throw ConfigError("unknown env '" + spec.name + "'");
}

// --- VecEnv ----------------------------------------------------------------

VecEnv::VecEnv(const Env& prototype, int num_envs) {
  if (num_envs < 1) throw ConfigError("VecEnv needs at least one env");
  for (int i = 0; i < num_envs; ++i) envs_.push_back(prototype.clone());
}

std::vector<StepResult> VecEnv::reset(std::uint64_t seed) {
  std::vector<StepResult> out;
  for (auto& e : envs_) out.push_back(e->reset(seed));
  return out;
}

std::vector<VecEnv::LaneStep> VecEnv::step(const std::vector<int>& actions) {
  if (actions.size() != envs_.size()) throw UsageError("VecEnv::step: expected one action per env");
  std::vector<LaneStep> out(envs_.size());
  for (std::size_t i = 0; i < envs_.size(); ++i) {
    StepResult r = envs_[i]->step(actions[i]);
    LaneStep& lane = out[i];
    lane.reward = r.reward;
    lane.done = r.done;
    lane.terminal_index = r.obs_index;
    lane.terminal_observation = r.observation;
    if (r.done) {
      StepResult fresh = envs_[i]->reset();
      lane.observation = std::move(fresh.observation);
      lane.obs_index = fresh.obs_index;
    } else {
      lane.observation = std::move(r.observation);
      lane.obs_index = r.obs_index;
    }
  }
  return out;
}

// --- Solver ----------------------------------------------------------------

double solve_optimal_return(const Env& env) {
  std::unique_ptr<Env> root = env.clone();
  root->reset();
  std::unordered_map<std::uint64_t, double> memo;
  const int actions = root->num_actions();
  std::function<double(const Env&)> value = [&](const Env& state) -> double {
    if (state.done()) return 0.0;
    const std::uint64_t key = state.state_key();
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < actions; ++a) {
      std::unique_ptr<Env> next = state.clone();
      const double r = next->step(a).reward;
      best = std::max(best, r + value(*next));
    }
    memo.emplace(key, best);
    return best;
  };
  return value(*root);
}

double solve_optimal_return(const EnvSpec& spec) { return solve_optimal_return(*make_env(spec)); }

}  // namespace derl

#pragma once

// Sparse-reward gridworlds (DeepSea, Hallway), a lockstep vectorized wrapper
// and an exact finite-horizon solver.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "derl/nn.hpp"

namespace derl {

struct EnvSpec {
  std::string name = "deepsea";  // "deepsea" | "hallway"
  int size = 10;                 // DeepSea N
  int n_left = 10;               // Hallway N_l
  int n_right = 0;               // Hallway N_r
  std::uint64_t task_seed = 0;   // DeepSea action map

  std::string task_name() const;  // e.g. "deepsea-10", "hallway-10-0"
  bool operator==(const EnvSpec&) const = default;
};

struct StepResult {
  Vec observation;
  int obs_index = 0;  // position of the 1 in the one-hot observation
  double reward = 0.0;
  bool done = false;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual std::unique_ptr<Env> clone() const = 0;
  virtual int num_actions() const = 0;
  virtual int observation_size() const = 0;
  virtual int horizon() const = 0;

  // Episodes are deterministic; the seed is accepted for interface symmetry
  // and has no effect on the dynamics.
  virtual StepResult reset(std::uint64_t seed = 0) = 0;
  virtual StepResult step(int action) = 0;

  virtual bool done() const = 0;
  virtual int timestep() const = 0;
  /// Packs the full episode state (including time and counters) for memoization.
  virtual std::uint64_t state_key() const = 0;

  Vec one_hot(int index) const {
    Vec v = Vec::Zero(observation_size());
    v(index) = 1.0;
    return v;
  }
};

/// N x N grid. The agent starts top-left, descends one row per step and picks
/// one of two actions whose left/right meaning is fixed per row from the task
/// seed. Right costs 0.01/N; moving right from the bottom-right cell pays +1.
class DeepSeaEnv final : public Env {
 public:
  explicit DeepSeaEnv(int size, std::uint64_t task_seed = 0);

  std::unique_ptr<Env> clone() const override { return std::make_unique<DeepSeaEnv>(*this); }
  int num_actions() const override { return 2; }
  int observation_size() const override { return size_ * size_; }
  int horizon() const override { return size_; }
  StepResult reset(std::uint64_t seed = 0) override;
  StepResult step(int action) override;
  bool done() const override { return row_ >= size_; }
  int timestep() const override { return row_; }
  std::uint64_t state_key() const override;

  int size() const { return size_; }
  int row() const { return row_; }
  int column() const { return column_; }
  /// The action index that moves right in the given row.
  int right_action(int row) const { return flip_[static_cast<std::size_t>(row)] ? 0 : 1; }
  int observation_index() const;

 private:
  int size_;
  std::vector<bool> flip_;
  int row_ = 0;
  int column_ = 0;
};

/// Hallway of N_l + N_r + 1 cells with the goal at N_l. Actions: 0 left,
/// 1 stay, 2 right. Right and stay cost 0.01; the first arrival at the goal
/// pays +1 and every 10th consecutive stay at the goal pays +1.
class HallwayEnv final : public Env {
 public:
  static constexpr int kLeft = 0;
  static constexpr int kStay = 1;
  static constexpr int kRight = 2;
  static constexpr int kStayBonusPeriod = 10;

  HallwayEnv(int n_left, int n_right);

  std::unique_ptr<Env> clone() const override { return std::make_unique<HallwayEnv>(*this); }
  int num_actions() const override { return 3; }
  int observation_size() const override { return n_left_ + n_right_ + 1; }
  int horizon() const override { return 2 * n_left_; }
  StepResult reset(std::uint64_t seed = 0) override;
  StepResult step(int action) override;
  bool done() const override { return t_ >= horizon(); }
  int timestep() const override { return t_; }
  std::uint64_t state_key() const override;

  int position() const { return position_; }
  int goal() const { return n_left_; }
  int consecutive_stays() const { return stays_; }
  bool reached_goal() const { return reached_; }

 private:
  int n_left_;
  int n_right_;
  int position_ = 0;
  int t_ = 0;
  int stays_ = 0;
  bool reached_ = false;
};

std::unique_ptr<Env> make_env(const EnvSpec& spec);

/// K copies of one task stepped in lockstep. A lane that terminates is reset
/// within the same call: its result carries done = true, the fresh reset
/// observation, and the terminal observation separately.
class VecEnv {
 public:
  struct LaneStep {
    Vec observation;  // post-reset when done
    int obs_index = 0;
    Vec terminal_observation;  // the observation the step produced, before any reset
    int terminal_index = 0;
    double reward = 0.0;
    bool done = false;
  };

  VecEnv(const Env& prototype, int num_envs);

  int size() const { return static_cast<int>(envs_.size()); }
  int num_actions() const { return envs_.front()->num_actions(); }
  int observation_size() const { return envs_.front()->observation_size(); }

  std::vector<StepResult> reset(std::uint64_t seed = 0);
  std::vector<LaneStep> step(const std::vector<int>& actions);
  const Env& lane(int i) const { return *envs_[static_cast<std::size_t>(i)]; }

 private:
  std::vector<std::unique_ptr<Env>> envs_;
};

/// Exact optimal undiscounted episode return by backward induction over the
/// full episode state, starting from a fresh reset.
double solve_optimal_return(const Env& env);
double solve_optimal_return(const EnvSpec& spec);

}  // namespace derl

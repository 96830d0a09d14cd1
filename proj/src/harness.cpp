#include "derl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "derl/errors.hpp"
#include "derl/rng.hpp"

namespace derl {

double RunLog::max_eval_return() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& e : evals) m = std::max(m, e.mean);
  return m;
}

double RunLog::mean_eval_return() const {
  if (evals.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : evals) s += e.mean;
  return s / static_cast<double>(evals.size());
}

std::vector<double> evaluate_greedy(const GreedyPolicy& policy, const EnvSpec& env, int episodes,
                                    std::uint64_t run_seed, std::int64_t eval_index) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max(episodes, 0)));
  auto e = make_env(env);
  for (int ep = 0; ep < episodes; ++ep) {
    StepResult s = e->reset(derive_seed(run_seed, {0xE7A1, static_cast<std::uint64_t>(eval_index),
                                                   static_cast<std::uint64_t>(ep)}));
    double ret = 0.0;
    while (!e->done()) {
      s = e->step(policy(s.observation));
      ret += s.reward;
    }
    out.push_back(ret);
  }
  return out;
}

std::unique_ptr<Trainer> make_trainer(const ExperimentConfig& cfg, int observation_size, int num_actions,
                                      std::uint64_t seed) {
  const std::uint64_t s = derive_seed(seed, {1});
  switch (cfg.algo) {
    case Algo::A2C: return std::make_unique<A2cTrainer>(observation_size, num_actions, cfg.actor_critic_config(), s);
    case Algo::PPO:
      return std::make_unique<PpoTrainer>(observation_size, num_actions, cfg.actor_critic_config(),
                                          cfg.ppo_config(), s);
    case Algo::DQN:
      return std::make_unique<DqnTrainer>(observation_size, num_actions, cfg.dqn_config(), cfg.agent.n_steps,
                                          cfg.agent.epsilon, s);
    case Algo::DeA2C:
    case Algo::DePPO:
    case Algo::DeDQN:
      return std::make_unique<DecoupledTrainer>(observation_size, num_actions, cfg.exploration_config(),
                                                cfg.actor_critic_config(), cfg.ppo_config(), cfg.dqn_config(),
                                                cfg.decoupled_config(), s);
  }
  throw ConfigError("algo.name: unsupported algorithm");
}

// --- CSV -------------------------------------------------------------------

std::string csv_header(int eval_episodes) {
  std::string h = "episode,ret_mean,ret_std";
  for (int i = 1; i <= eval_episodes; ++i) h += ",ret_e" + std::to_string(i);
  h += ",train_ret_mean,intrinsic_mean,is_weight_mean,kl_mean,wall_s";
  return h;
}

std::string csv_row(const EvalRecord& r) {
  std::string row = std::to_string(r.episode) + "," + format_double(r.mean) + "," + format_double(r.std);
  for (double x : r.returns) row += "," + format_double(x);
  row += "," + format_double(r.train_return_mean) + "," + format_double(r.intrinsic_mean) + "," +
         format_double(r.is_weight_mean) + "," + format_double(r.kl_mean) + "," + format_double(r.wall_s);
  return row;
}

void write_csv_row(std::ostream& out, const EvalRecord& r) { out << csv_row(r) << '\n' << std::flush; }

std::string run_directory(const std::string& outdir, const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::string& point) {
  std::filesystem::path p(outdir);
  p /= cfg.env.task_name();
  p /= cfg.cell_name();
  if (!point.empty()) p /= point;
  p /= std::to_string(seed);
  return p.string();
}

// --- training loop ---------------------------------------------------------

namespace {

struct Window {
  double train_sum = 0.0;
  std::int64_t train_n = 0;
  double intrinsic_sum = 0.0;
  std::int64_t intrinsic_n = 0;
  double rho_sum = 0.0;
  double kl_sum = 0.0;
  std::int64_t updates = 0;

  void reset() { *this = Window{}; }
};

}  // namespace

RunLog run_experiment(const ExperimentConfig& cfg, std::uint64_t seed, const RunOptions& options) {
  validate(cfg);
  const auto start = std::chrono::steady_clock::now();
  RunLog log;
  log.config = cfg;
  log.seed = seed;

  std::ofstream csv;
  if (!options.csv_path.empty()) {
    csv.open(options.csv_path, std::ios::trunc);
    if (!csv) throw ConfigError("cannot write '" + options.csv_path + "'");
    csv << csv_header(cfg.schedule.eval_episodes) << '\n' << std::flush;
  }

  const auto proto = make_env(cfg.env);
  log.optimal_return = solve_optimal_return(*proto);
  const int K = cfg.num_envs;
  const int obs_size = proto->observation_size();
  const int num_actions = proto->num_actions();
  const bool decoupled = is_decoupled(cfg.algo);

  std::unique_ptr<Trainer> trainer;
  std::unique_ptr<IntrinsicGenerator> intrinsic;
  RunningNormalizer obs_norm(obs_size, RunningNormalizer::Mode::Center, cfg.normalize_obs);
  RunningNormalizer rew_norm(1, RunningNormalizer::Mode::ScaleOnly, cfg.normalize_rewards);
  std::mt19937_64 act_rng(derive_seed(seed, {3}));
  Window window;
  std::int64_t eval_index = 0;

  auto evaluate = [&](std::int64_t episode) {
    EvalRecord r;
    r.episode = episode;
    const GreedyPolicy policy = [&](const Vec& obs) { return trainer->greedy(obs_norm.normalize(obs)); };
    r.returns = evaluate_greedy(policy, cfg.env, cfg.schedule.eval_episodes, seed, eval_index++);
    const Eigen::Map<const Vec> v(r.returns.data(), static_cast<Eigen::Index>(r.returns.size()));
    r.mean = v.mean();
    r.std = std::sqrt((v.array() - r.mean).square().mean());
    r.train_return_mean = window.train_n > 0 ? window.train_sum / static_cast<double>(window.train_n) : 0.0;
    r.intrinsic_mean = window.intrinsic_n > 0 ? window.intrinsic_sum / static_cast<double>(window.intrinsic_n) : 0.0;
    r.is_weight_mean = window.updates > 0 && decoupled ? window.rho_sum / static_cast<double>(window.updates) : 1.0;
    r.kl_mean = window.updates > 0 && decoupled ? window.kl_sum / static_cast<double>(window.updates) : 0.0;
    if (options.record_wall_time)
      r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    window.reset();
    if (csv.is_open()) write_csv_row(csv, r);
    if (options.on_eval) options.on_eval(r);
    log.evals.push_back(std::move(r));
  };

  try {
    trainer = make_trainer(cfg, obs_size, num_actions, seed);
    intrinsic = make_intrinsic(cfg.intrinsic_config(obs_size, num_actions, derive_seed(seed, {2})));
    VecEnv venv(*proto, K);

    std::vector<StepResult> start_obs = venv.reset(derive_seed(seed, {4}));
    Mat raw(obs_size, K);
    std::vector<int> raw_index(static_cast<std::size_t>(K));
    Mat current(obs_size, K);
    for (int k = 0; k < K; ++k) {
      raw.col(k) = start_obs[static_cast<std::size_t>(k)].observation;
      raw_index[static_cast<std::size_t>(k)] = start_obs[static_cast<std::size_t>(k)].obs_index;
      current.col(k) = obs_norm.update(Vec(raw.col(k)));
    }
    std::vector<double> episode_return(static_cast<std::size_t>(K), 0.0);

    evaluate(0);
    std::int64_t episodes = 0;
    std::int64_t next_eval = cfg.schedule.eval_every;

    while (episodes < cfg.schedule.episodes) {
      const int L = trainer->block_length();
      RolloutBatch batch;
      batch.n_steps = L;
      batch.num_envs = K;
      batch.states.resize(obs_size, L * K);
      batch.next_states.resize(obs_size, L * K);
      batch.actions.assign(static_cast<std::size_t>(L * K), 0);
      batch.dones.assign(static_cast<std::size_t>(L * K), false);
      batch.rewards.resize(L * K);
      batch.rewards_ext.resize(L * K);
      batch.behavior_probs.resize(L * K);
      batch.behavior_dists.resize(num_actions, L * K);

      for (int t = 0; t < L; ++t) {
        const Mat probs = trainer->behavior_probs(current);
        std::vector<int> actions(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) actions[static_cast<std::size_t>(k)] = sample_action(probs.col(k), act_rng);
        const auto steps = venv.step(actions);

        IntrinsicBatch ib;
        ib.states = raw;
        ib.state_indices = raw_index;
        ib.actions = actions;
        ib.next_states.resize(obs_size, K);
        for (int k = 0; k < K; ++k) {
          const auto& s = steps[static_cast<std::size_t>(k)];
          ib.next_states.col(k) = s.terminal_observation;
          ib.next_indices.push_back(s.terminal_index);
          ib.dones.push_back(s.done);
        }
        const Vec r_int = intrinsic->compute(ib);

        for (int k = 0; k < K; ++k) {
          const auto& s = steps[static_cast<std::size_t>(k)];
          const int i = batch.index(t, k);
          const int a = actions[static_cast<std::size_t>(k)];
          batch.states.col(i) = current.col(k);
          batch.actions[static_cast<std::size_t>(i)] = a;
          batch.behavior_probs(i) = probs(a, k);
          batch.behavior_dists.col(i) = probs.col(k);
          batch.rewards_ext(i) = s.reward;
          const double r_train = decoupled
                                     ? exploration_reward(s.reward, r_int(k), cfg.intrinsic.lambda,
                                                          cfg.decoupled.pure_intrinsic)
                                     : combine(s.reward, r_int(k), cfg.intrinsic.lambda);
          batch.rewards(i) = rew_norm.update(r_train);
          batch.dones[static_cast<std::size_t>(i)] = s.done;
          if (s.done) {
            batch.next_states.col(i) = obs_norm.update(s.terminal_observation);
            current.col(k) = obs_norm.update(s.observation);
          } else {
            current.col(k) = obs_norm.update(s.observation);
            batch.next_states.col(i) = current.col(k);
          }
          raw.col(k) = s.observation;
          raw_index[static_cast<std::size_t>(k)] = s.obs_index;
          window.intrinsic_sum += r_int(k);
          ++window.intrinsic_n;

          episode_return[static_cast<std::size_t>(k)] += s.reward;
          if (s.done) {
            ++episodes;
            window.train_sum += episode_return[static_cast<std::size_t>(k)];
            ++window.train_n;
            if (options.keep_train_returns) log.train_returns.push_back(episode_return[static_cast<std::size_t>(k)]);
            episode_return[static_cast<std::size_t>(k)] = 0.0;
          }
        }
      }
      batch.bootstrap_values = trainer->bootstrap_values(current);

      const UpdateStats stats = trainer->update(batch);
      window.rho_sum += stats.mean_is_weight;
      window.kl_sum += stats.mean_kl;
      ++window.updates;

      while (episodes >= next_eval) {
        evaluate(next_eval);
        next_eval += cfg.schedule.eval_every;
      }
    }
    log.episodes = episodes;
  } catch (const std::exception& e) {
    log.aborted = true;
    log.error = e.what();
  }
  return log;
}

// --- statistics ------------------------------------------------------------

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw UsageError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::pair<double, double> stratified_bootstrap_ci(const std::vector<std::vector<double>>& per_seed_values,
                                                  int resamples, double level, std::uint64_t seed) {
  if (per_seed_values.empty()) throw UsageError("bootstrap needs at least one stratum");
  for (const auto& s : per_seed_values)
    if (s.empty()) throw UsageError("bootstrap stratum without values");
  if (resamples < 1) throw UsageError("bootstrap needs at least one resample");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("bootstrap level must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  for (auto& m : means) {
    double total = 0.0;
    for (const auto& stratum : per_seed_values) {
      std::uniform_int_distribution<std::size_t> pick(0, stratum.size() - 1);
      double s = 0.0;
      for (std::size_t j = 0; j < stratum.size(); ++j) s += stratum[pick(rng)];
      total += s / static_cast<double>(stratum.size());
    }
    m = total / static_cast<double>(per_seed_values.size());
  }
  const double tail = (1.0 - level) / 2.0;
  return {quantile(means, tail), quantile(means, 1.0 - tail)};
}

NormalizedReturns normalize_returns(const std::vector<std::vector<double>>& per_task_values) {
  NormalizedReturns out;
  if (per_task_values.empty()) return out;
  const std::size_t algos = per_task_values.front().size();
  out.mean.assign(algos, 0.0);
  for (const auto& task : per_task_values) {
    if (task.size() != algos) throw UsageError("normalize_returns: every task needs one value per algorithm");
    const auto [lo, hi] = std::minmax_element(task.begin(), task.end());
    const bool flat = task.empty() || *hi == *lo;
    std::vector<double> row(task.size());
    for (std::size_t j = 0; j < task.size(); ++j) row[j] = flat ? 0.5 : (task[j] - *lo) / (*hi - *lo);
    out.degenerate.push_back(flat);
    for (std::size_t j = 0; j < algos; ++j) out.mean[j] += row[j] / static_cast<double>(per_task_values.size());
    out.values.push_back(std::move(row));
  }
  return out;
}

}  // namespace derl

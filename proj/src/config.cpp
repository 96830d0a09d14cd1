#include "derl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "derl/errors.hpp"

namespace derl {

// --- names -----------------------------------------------------------------

Algo parse_algo(const std::string& name) {
  if (name == "a2c") return Algo::A2C;
  if (name == "ppo") return Algo::PPO;
  if (name == "dqn") return Algo::DQN;
  if (name == "dea2c") return Algo::DeA2C;
  if (name == "deppo") return Algo::DePPO;
  if (name == "dedqn") return Algo::DeDQN;
  throw ConfigError("algo.name: unknown algorithm '" + name + "'");
}

std::string to_string(Algo algo) {
  switch (algo) {
    case Algo::A2C: return "a2c";
    case Algo::PPO: return "ppo";
    case Algo::DQN: return "dqn";
    case Algo::DeA2C: return "dea2c";
    case Algo::DePPO: return "deppo";
    case Algo::DeDQN: return "dedqn";
  }
  return "?";
}

bool is_decoupled(Algo algo) { return algo == Algo::DeA2C || algo == Algo::DePPO || algo == Algo::DeDQN; }

SweepKind parse_sweep_kind(const std::string& name) {
  if (name == "lambda") return SweepKind::Lambda;
  if (name == "decay") return SweepKind::Decay;
  throw UsageError("unknown sweep kind '" + name + "' (expected lambda or decay)");
}

std::string to_string(SweepKind kind) { return kind == SweepKind::Lambda ? "lambda" : "decay"; }

std::string format_double(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

// --- value codecs ----------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
  throw ConfigError(key + ": expected " + expected + ", got '" + text + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& text, const char* expected) {
  T out{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto r = std::from_chars(first, last, out);
  if (r.ec != std::errc() || r.ptr != last || first == last) bad_value(key, text, expected);
  return out;
}

void decode(const std::string& key, const std::string& text, int& out) { out = parse_number<int>(key, text, "an integer"); }
void decode(const std::string& key, const std::string& text, std::int64_t& out) {
  out = parse_number<std::int64_t>(key, text, "an integer");
}
void decode(const std::string& key, const std::string& text, std::uint64_t& out) {
  out = parse_number<std::uint64_t>(key, text, "a non-negative integer");
}
void decode(const std::string& key, const std::string& text, double& out) {
  out = parse_number<double>(key, text, "a real number");
}
void decode(const std::string& key, const std::string& text, bool& out) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "true" || t == "1") out = true;
  else if (t == "false" || t == "0") out = false;
  else bad_value(key, text, "true or false");
}
void decode(const std::string&, const std::string& text, std::string& out) { out = text; }
void decode(const std::string& key, const std::string& text, Activation& out) {
  if (text == "relu") out = Activation::ReLU;
  else if (text == "tanh") out = Activation::Tanh;
  else bad_value(key, text, "relu or tanh");
}
void decode(const std::string& key, const std::string& text, Algo& out) {
  try {
    out = parse_algo(text);
  } catch (const ConfigError&) {
    bad_value(key, text, "one of a2c, ppo, dqn, dea2c, deppo, dedqn");
  }
}
void decode(const std::string& key, const std::string& text, IntrinsicKind& out) {
  try {
    out = parse_intrinsic_kind(text);
  } catch (const std::exception&) {
    bad_value(key, text, "one of none, count, hash_count, icm, rnd, ride");
  }
}
template <typename T>
void decode(const std::string& key, const std::string& text, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    decode(key, trim(item), v);
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, text, "a comma-separated list");
}

std::string encode(int v) { return std::to_string(v); }
std::string encode(std::int64_t v) { return std::to_string(v); }
std::string encode(std::uint64_t v) { return std::to_string(v); }
std::string encode(double v) { return format_double(v); }
std::string encode(bool v) { return v ? "true" : "false"; }
std::string encode(const std::string& v) { return v; }
std::string encode(Activation v) { return to_string(v); }
std::string encode(Algo v) { return to_string(v); }
std::string encode(IntrinsicKind v) { return to_string(v); }
template <typename T>
std::string encode(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + encode(v[i]);
  return out;
}

// --- key registry ----------------------------------------------------------

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
Field field(std::string key, T ExperimentConfig::*member) {
  return {key, [key, member](ExperimentConfig& c, const std::string& t) { decode(key, t, c.*member); },
          [member](const ExperimentConfig& c) { return encode(c.*member); }};
}

template <typename Outer, typename T>
Field field(std::string key, Outer ExperimentConfig::*outer, T Outer::*member) {
  return {key, [key, outer, member](ExperimentConfig& c, const std::string& t) { decode(key, t, (c.*outer).*member); },
          [outer, member](const ExperimentConfig& c) { return encode((c.*outer).*member); }};
}

void agent_fields(std::vector<Field>& f, const std::string& section, AgentParams ExperimentConfig::*p) {
  f.push_back(field(section + ".hidden", p, &AgentParams::hidden));
  f.push_back(field(section + ".activation", p, &AgentParams::activation));
  f.push_back(field(section + ".learning_rate", p, &AgentParams::learning_rate));
  f.push_back(field(section + ".adam_eps", p, &AgentParams::adam_eps));
  f.push_back(field(section + ".max_grad_norm", p, &AgentParams::max_grad_norm));
  f.push_back(field(section + ".entropy_coef", p, &AgentParams::entropy_coef));
  f.push_back(field(section + ".value_coef", p, &AgentParams::value_coef));
  f.push_back(field(section + ".n_steps", p, &AgentParams::n_steps));
  f.push_back(field(section + ".epochs", p, &AgentParams::epochs));
  f.push_back(field(section + ".minibatches", p, &AgentParams::minibatches));
  f.push_back(field(section + ".clip_ratio", p, &AgentParams::clip_ratio));
  f.push_back(field(section + ".clip_value_loss", p, &AgentParams::clip_value_loss));
  f.push_back(field(section + ".tau", p, &AgentParams::tau));
  f.push_back(field(section + ".batch_size", p, &AgentParams::batch_size));
  f.push_back(field(section + ".buffer_capacity", p, &AgentParams::buffer_capacity));
  f.push_back(field(section + ".epsilon", p, &AgentParams::epsilon));
}

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    f.push_back(field("gamma", &ExperimentConfig::gamma));
    f.push_back(field("normalize_obs", &ExperimentConfig::normalize_obs));
    f.push_back(field("normalize_rewards", &ExperimentConfig::normalize_rewards));
    f.push_back(field("num_envs", &ExperimentConfig::num_envs));
    f.push_back(field("env.name", &ExperimentConfig::env, &EnvSpec::name));
    f.push_back(field("env.size", &ExperimentConfig::env, &EnvSpec::size));
    f.push_back(field("env.n_left", &ExperimentConfig::env, &EnvSpec::n_left));
    f.push_back(field("env.n_right", &ExperimentConfig::env, &EnvSpec::n_right));
    f.push_back(field("env.task_seed", &ExperimentConfig::env, &EnvSpec::task_seed));
    f.push_back(field("algo.name", &ExperimentConfig::algo));
    agent_fields(f, "algo", &ExperimentConfig::agent);
    agent_fields(f, "explore", &ExperimentConfig::explore);
    f.push_back(field("intrinsic.name", &ExperimentConfig::intrinsic, &IntrinsicParams::kind));
    f.push_back(field("intrinsic.lambda", &ExperimentConfig::intrinsic, &IntrinsicParams::lambda));
    f.push_back(field("intrinsic.count_increment", &ExperimentConfig::intrinsic, &IntrinsicParams::count_increment));
    f.push_back(field("intrinsic.hash_k", &ExperimentConfig::intrinsic, &IntrinsicParams::hash_k));
    f.push_back(field("intrinsic.learning_rate", &ExperimentConfig::intrinsic, &IntrinsicParams::learning_rate));
    f.push_back(field("intrinsic.forward_coef", &ExperimentConfig::intrinsic, &IntrinsicParams::forward_coef));
    f.push_back(field("intrinsic.inverse_coef", &ExperimentConfig::intrinsic, &IntrinsicParams::inverse_coef));
    f.push_back(field("decoupled.t_dec", &ExperimentConfig::decoupled, &DecoupledParams::t_dec));
    f.push_back(field("decoupled.alpha_beta", &ExperimentConfig::decoupled, &DecoupledParams::alpha_beta));
    f.push_back(field("decoupled.alpha_e", &ExperimentConfig::decoupled, &DecoupledParams::alpha_e));
    f.push_back(field("decoupled.retrace", &ExperimentConfig::decoupled, &DecoupledParams::retrace));
    f.push_back(field("decoupled.pure_intrinsic", &ExperimentConfig::decoupled, &DecoupledParams::pure_intrinsic));
    f.push_back(field("schedule.episodes", &ExperimentConfig::schedule, &ScheduleParams::episodes));
    f.push_back(field("schedule.eval_every", &ExperimentConfig::schedule, &ScheduleParams::eval_every));
    f.push_back(field("schedule.eval_episodes", &ExperimentConfig::schedule, &ScheduleParams::eval_episodes));
    f.push_back(field("schedule.seeds", &ExperimentConfig::schedule, &ScheduleParams::seeds));
    return f;
  }();
  return fields;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : registry())
    if (f.key == key) return f;
  throw ConfigError(key + ": unknown key");
}

const std::vector<std::string> kSections{"env", "algo", "explore", "intrinsic", "decoupled", "schedule", "meta"};
const std::vector<std::string> kMetaKeys{"meta.seed", "meta.version", "meta.optimal_return"};

bool is_meta(const std::string& key) {
  return std::find(kMetaKeys.begin(), kMetaKeys.end(), key) != kMetaKeys.end();
}

Overrides parse_document(const std::string& document) {
  Overrides out;
  std::istringstream in(document);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
        throw ConfigError(section + ": unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (!section.empty() && key.find('.') == std::string::npos) key = section + "." + key;
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

// --- defaults --------------------------------------------------------------

AgentParams a2c_defaults(bool deepsea) {
  AgentParams p;
  p.learning_rate = deepsea ? 1e-3 : 3e-4;
  p.activation = deepsea ? Activation::ReLU : Activation::Tanh;
  p.entropy_coef = 1e-4;
  p.n_steps = 5;
  return p;
}

AgentParams ppo_defaults(bool deepsea) {
  AgentParams p;
  p.learning_rate = deepsea ? 1e-3 : 3e-4;
  p.activation = deepsea ? Activation::Tanh : Activation::ReLU;
  p.entropy_coef = deepsea ? 1e-4 : 7e-4;
  p.n_steps = 10;
  p.epochs = 10;
  p.minibatches = 4;
  p.clip_ratio = 0.1;
  p.clip_value_loss = true;
  return p;
}

AgentParams dea2c_defaults(bool deepsea) {
  AgentParams p;
  p.learning_rate = deepsea ? 1e-3 : 3e-4;
  p.activation = deepsea ? Activation::ReLU : Activation::Tanh;
  p.entropy_coef = deepsea ? 1e-6 : 1e-5;
  p.n_steps = 5;
  return p;
}

AgentParams deppo_defaults(bool deepsea) {
  AgentParams p = ppo_defaults(deepsea);
  p.activation = Activation::ReLU;
  p.entropy_coef = deepsea ? 1e-4 : 1e-6;
  return p;
}

AgentParams dqn_defaults(bool deepsea) {
  AgentParams p;
  p.learning_rate = deepsea ? 1e-3 : 1e-4;
  p.tau = deepsea ? 0.01 : 0.001;
  p.batch_size = deepsea ? 256 : 512;
  p.activation = deepsea ? Activation::Tanh : Activation::ReLU;
  p.n_steps = 5;
  p.buffer_capacity = 100000;
  return p;
}

void set_model(IntrinsicParams& p, double lr, double forward, double inverse) {
  p.learning_rate = lr;
  p.forward_coef = forward;
  p.inverse_coef = inverse;
}

void intrinsic_defaults(IntrinsicParams& p, bool deepsea, Algo algo) {
  // Decoupled learners explore with A2C and take the A2C rows, except for
  // ICM where DePPO and DeDQN have their own.
  const bool ppo_row = algo == Algo::PPO;
  switch (p.kind) {
    case IntrinsicKind::Icm:
      if (deepsea) set_model(p, 1e-5, 5.0, 1.0);
      else if (algo == Algo::A2C || algo == Algo::DeA2C) set_model(p, 1e-6, 5.0, 0.5);
      else set_model(p, 1e-5, 0.5, 10.0);
      break;
    case IntrinsicKind::Rnd:
      p.learning_rate = deepsea ? 1e-7 : (ppo_row ? 5e-7 : 1e-5);
      break;
    case IntrinsicKind::Ride:
      if (ppo_row) deepsea ? set_model(p, 5e-6, 10.0, 1.0) : set_model(p, 1e-7, 1.0, 1.0);
      else deepsea ? set_model(p, 1e-5, 0.5, 10.0) : set_model(p, 1e-5, 10.0, 0.5);
      break;
    default:
      break;
  }
}

}  // namespace

ExperimentConfig default_config(const std::string& env_name, Algo algo, IntrinsicKind intrinsic) {
  if (env_name != "deepsea" && env_name != "hallway")
    throw ConfigError("env.name: expected deepsea or hallway, got '" + env_name + "'");
  const bool deepsea = env_name == "deepsea";
  ExperimentConfig c;
  c.env.name = env_name;
  c.algo = algo;
  c.explore = a2c_defaults(deepsea);
  switch (algo) {
    case Algo::A2C: c.agent = a2c_defaults(deepsea); break;
    case Algo::PPO: c.agent = ppo_defaults(deepsea); break;
    case Algo::DQN:
    case Algo::DeDQN: c.agent = dqn_defaults(deepsea); break;
    case Algo::DeA2C: c.agent = dea2c_defaults(deepsea); break;
    case Algo::DePPO: c.agent = deppo_defaults(deepsea); break;
  }
  // Observation/reward normalization follows the policy that acts.
  const bool a2c_acts = algo == Algo::A2C || is_decoupled(algo);
  c.normalize_obs = deepsea && a2c_acts;
  c.normalize_rewards = deepsea && a2c_acts;
  c.decoupled.retrace = algo == Algo::DeA2C && !deepsea;
  c.intrinsic.kind = intrinsic;
  intrinsic_defaults(c.intrinsic, deepsea, algo);
  return c;
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& key, const std::string& rule) {
    if (!ok) throw ConfigError(key + ": " + rule);
  };
  require(c.gamma >= 0.0 && c.gamma < 1.0, "gamma", "must lie in [0, 1)");
  require(c.num_envs >= 1, "num_envs", "must be >= 1");
  require(c.env.name == "deepsea" || c.env.name == "hallway", "env.name", "expected deepsea or hallway");
  require(c.env.size >= 1, "env.size", "must be >= 1");
  require(c.env.n_left >= 1, "env.n_left", "must be >= 1");
  require(c.env.n_right >= 0, "env.n_right", "must be >= 0");
  for (const auto& [section, p] : {std::pair<std::string, const AgentParams*>{"algo", &c.agent},
                                   std::pair<std::string, const AgentParams*>{"explore", &c.explore}}) {
    require(!p->hidden.empty() && std::all_of(p->hidden.begin(), p->hidden.end(), [](int h) { return h > 0; }),
            section + ".hidden", "must be a non-empty list of positive sizes");
    require(p->learning_rate > 0.0, section + ".learning_rate", "must be > 0");
    require(p->adam_eps > 0.0, section + ".adam_eps", "must be > 0");
    require(p->max_grad_norm > 0.0, section + ".max_grad_norm", "must be > 0");
    require(p->entropy_coef >= 0.0, section + ".entropy_coef", "must be >= 0");
    require(p->value_coef >= 0.0, section + ".value_coef", "must be >= 0");
    require(p->n_steps >= 1, section + ".n_steps", "must be >= 1");
    require(p->epochs >= 1, section + ".epochs", "must be >= 1");
    require(p->minibatches >= 1, section + ".minibatches", "must be >= 1");
    require(p->clip_ratio > 0.0, section + ".clip_ratio", "must be > 0");
    require(p->tau > 0.0 && p->tau <= 1.0, section + ".tau", "must lie in (0, 1]");
    require(p->batch_size >= 1, section + ".batch_size", "must be >= 1");
    require(p->buffer_capacity >= 1, section + ".buffer_capacity", "must be >= 1");
    require(p->epsilon >= 0.0 && p->epsilon <= 1.0, section + ".epsilon", "must lie in [0, 1]");
  }
  require(c.intrinsic.lambda >= 0.0, "intrinsic.lambda", "must be >= 0");
  require(c.intrinsic.count_increment > 0.0, "intrinsic.count_increment", "must be > 0");
  require(c.intrinsic.hash_k >= 1, "intrinsic.hash_k", "must be >= 1");
  require(c.intrinsic.learning_rate > 0.0, "intrinsic.learning_rate", "must be > 0");
  require(c.intrinsic.forward_coef >= 0.0, "intrinsic.forward_coef", "must be >= 0");
  require(c.intrinsic.inverse_coef >= 0.0, "intrinsic.inverse_coef", "must be >= 0");
  require(c.decoupled.t_dec >= 1, "decoupled.t_dec", "must be >= 1");
  require(c.decoupled.alpha_beta >= 0.0, "decoupled.alpha_beta", "must be >= 0");
  require(c.decoupled.alpha_e >= 0.0, "decoupled.alpha_e", "must be >= 0");
  require(!c.decoupled.pure_intrinsic || is_decoupled(c.algo), "decoupled.pure_intrinsic",
          "requires a decoupled algorithm");
  require(!c.decoupled.pure_intrinsic || c.intrinsic.kind != IntrinsicKind::None, "decoupled.pure_intrinsic",
          "requires an intrinsic reward");
  require(c.schedule.episodes >= 0, "schedule.episodes", "must be >= 0");
  require(c.schedule.eval_every >= 1, "schedule.eval_every", "must be >= 1");
  require(c.schedule.eval_episodes >= 1, "schedule.eval_episodes", "must be >= 1");
  require(!c.schedule.seeds.empty(), "schedule.seeds", "must list at least one seed");
}

std::pair<std::string, std::string> parse_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + text + "': expected key=value");
  return {trim(text.substr(0, eq)), trim(text.substr(eq + 1))};
}

ExperimentConfig parse_config(const std::string& document, const Overrides& overrides) {
  Overrides all = parse_document(document);
  all.insert(all.end(), overrides.begin(), overrides.end());

  std::string env_name = "deepsea";
  Algo algo = Algo::A2C;
  IntrinsicKind intrinsic = IntrinsicKind::None;
  for (const auto& [key, value] : all) {
    if (key == "env.name") decode(key, value, env_name);
    if (key == "algo.name") decode(key, value, algo);
    if (key == "intrinsic.name") decode(key, value, intrinsic);
  }
  ExperimentConfig c = default_config(env_name, algo, intrinsic);
  for (const auto& [key, value] : all) {
    if (is_meta(key)) continue;
    find_field(key).set(c, value);
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : registry()) keys.push_back(f.key);
  return keys;
}

std::string config_value(const ExperimentConfig& cfg, const std::string& key) { return find_field(key).get(cfg); }

std::string emit_config(const ExperimentConfig& cfg, const SnapshotMeta* meta) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : registry()) {
    const auto dot = f.key.find('.');
    const std::string s = dot == std::string::npos ? "" : f.key.substr(0, dot);
    if (s != section) {
      out << "\n[" << s << "]\n";
      section = s;
    }
    out << (dot == std::string::npos ? f.key : f.key.substr(dot + 1)) << " = " << f.get(cfg) << "\n";
  }
  if (meta != nullptr) {
    out << "\n[meta]\n";
    out << "seed = " << meta->seed << "\n";
    out << "version = " << kVersion << "\n";
    out << "optimal_return = " << format_double(meta->optimal_return) << "\n";
  }
  return out.str();
}

// --- derived learner configs -----------------------------------------------

namespace {

ActorCriticConfig to_actor_critic(const AgentParams& p, double gamma) {
  ActorCriticConfig c;
  c.hidden = p.hidden;
  c.activation = p.activation;
  c.learning_rate = p.learning_rate;
  c.adam_eps = p.adam_eps;
  c.max_grad_norm = p.max_grad_norm;
  c.entropy_coef = p.entropy_coef;
  c.value_coef = p.value_coef;
  c.gamma = gamma;
  c.n_steps = p.n_steps;
  return c;
}

}  // namespace

ActorCriticConfig ExperimentConfig::actor_critic_config() const { return to_actor_critic(agent, gamma); }
ActorCriticConfig ExperimentConfig::exploration_config() const { return to_actor_critic(explore, gamma); }

PpoConfig ExperimentConfig::ppo_config() const {
  PpoConfig p;
  p.epochs = agent.epochs;
  p.minibatches = agent.minibatches;
  p.clip_ratio = agent.clip_ratio;
  p.clip_value_loss = agent.clip_value_loss;
  return p;
}

DqnConfig ExperimentConfig::dqn_config() const {
  DqnConfig d;
  d.hidden = agent.hidden;
  d.activation = agent.activation;
  d.learning_rate = agent.learning_rate;
  d.adam_eps = agent.adam_eps;
  d.max_grad_norm = agent.max_grad_norm;
  d.gamma = gamma;
  d.tau = agent.tau;
  d.batch_size = agent.batch_size;
  d.buffer_capacity = static_cast<std::size_t>(agent.buffer_capacity);
  return d;
}

DecoupledConfig ExperimentConfig::decoupled_config() const {
  DecoupledConfig d;
  d.exploit = algo == Algo::DePPO ? ExploitKind::PPO : algo == Algo::DeDQN ? ExploitKind::DQN : ExploitKind::A2C;
  d.t_dec = decoupled.t_dec;
  d.alpha_beta = decoupled.alpha_beta;
  d.alpha_e = decoupled.alpha_e;
  d.retrace = decoupled.retrace;
  d.pure_intrinsic = decoupled.pure_intrinsic;
  return d;
}

IntrinsicConfig ExperimentConfig::intrinsic_config(int observation_size, int num_actions, std::uint64_t seed) const {
  IntrinsicConfig c;
  c.kind = intrinsic.kind;
  c.count_increment = intrinsic.count_increment;
  c.hash_k = intrinsic.hash_k;
  c.num_lanes = num_envs;
  c.model.observation_size = observation_size;
  c.model.num_actions = num_actions;
  c.model.learning_rate = intrinsic.learning_rate;
  c.model.forward_coef = intrinsic.forward_coef;
  c.model.inverse_coef = intrinsic.inverse_coef;
  c.model.seed = seed;
  return c;
}

std::string ExperimentConfig::cell_name() const { return to_string(algo) + "-" + to_string(intrinsic.kind); }

// --- sweeps ----------------------------------------------------------------

const std::vector<double>& lambda_sweep_values() {
  static const std::vector<double> v{0.01, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0, 100.0};
  return v;
}

const std::vector<double>& count_decay_values() {
  static const std::vector<double> v{0.01, 0.1, 0.2, 1.0, 5.0, 10.0, 100.0};
  return v;
}

const std::vector<double>& learning_rate_decay_values() {
  static const std::vector<double> v{1e-9, 1e-8, 2e-8, 1e-7, 5e-7, 1e-6, 1e-5, 1e-4, 1e-3};
  return v;
}

std::vector<SweepPoint> generate_sweep(SweepKind kind, const ExperimentConfig& base) {
  validate(base);
  std::string key;
  const std::vector<double>* values = nullptr;
  if (kind == SweepKind::Lambda) {
    key = "intrinsic.lambda";
    values = &lambda_sweep_values();
  } else if (is_count_based(base.intrinsic.kind)) {
    key = "intrinsic.count_increment";
    values = &count_decay_values();
  } else if (is_prediction_based(base.intrinsic.kind)) {
    key = "intrinsic.learning_rate";
    values = &learning_rate_decay_values();
  } else {
    throw UsageError("decay sweep needs an intrinsic reward (intrinsic.name is none)");
  }
  std::vector<SweepPoint> out;
  for (double v : *values) {
    SweepPoint p;
    p.key = key;
    p.value = v;
    p.label = to_string(kind) + "-" + format_double(v);
    p.config = base;
    find_field(key).set(p.config, format_double(v));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace derl

#include "mcpo/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mcpo::harness {

using nlohmann::json;
using objectives::ObjectiveKind;

namespace {

const std::set<std::string> kCommonKeys = {
    "env",        "algorithm",      "total_steps",   "seeds",
    "horizon",    "epochs",         "minibatch_size", "gamma",
    "lambda",     "n_actors",       "adam_step_size", "hidden_size",
    "value_coef", "entropy_coef",   "out_dir",        "checkpoint_interval"};

const std::set<std::string> kMcpoKeys = {
    "memory_capacity", "beta_min",   "beta_max",  "write_rule",
    "alpha_mode",      "alpha_fixed", "attention", "beta_mode",
    "beta0",           "d_targ",     "dropout"};

ObjectiveKind parse_kind(const std::string& s) {
  if (s == "ppo-clip") return ObjectiveKind::PpoClip;
  if (s == "kl-fixed") return ObjectiveKind::KlFixed;
  if (s == "kl-adaptive") return ObjectiveKind::KlAdaptive;
  if (s == "mdpo-anneal") return ObjectiveKind::MdpoAnneal;
  if (s == "mcpo") return ObjectiveKind::Mcpo;
  throw ConfigError("config: unknown algorithm '" + s + "'");
}

std::set<std::string> allowed_keys(ObjectiveKind kind) {
  std::set<std::string> keys = kCommonKeys;
  switch (kind) {
    case ObjectiveKind::PpoClip:
      keys.insert("clip_eps");
      break;
    case ObjectiveKind::KlFixed:
      keys.insert("beta");
      break;
    case ObjectiveKind::KlAdaptive:
      keys.insert("beta");
      keys.insert("d_targ");
      break;
    case ObjectiveKind::MdpoAnneal:
      keys.insert("beta0");
      break;
    case ObjectiveKind::Mcpo:
      keys.insert(kMcpoKeys.begin(), kMcpoKeys.end());
      break;
  }
  return keys;
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value for key '" + key + "'");
  }
}

}  // namespace

std::string RunConfig::algorithm_name() const {
  switch (algorithm) {
    case ObjectiveKind::PpoClip: return "ppo-clip";
    case ObjectiveKind::KlFixed: return "kl-fixed";
    case ObjectiveKind::KlAdaptive: return "kl-adaptive";
    case ObjectiveKind::MdpoAnneal: return "mdpo-anneal";
    case ObjectiveKind::Mcpo: return "mcpo";
  }
  return "?";
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  for (const std::string key : {"env", "algorithm", "total_steps", "seeds"})
    if (!j.contains(key))
      throw ConfigError("config: missing required key '" + key + "'");

  RunConfig c;
  c.algorithm = parse_kind(j.at("algorithm").get<std::string>());

  const std::set<std::string> allowed = allowed_keys(c.algorithm);
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("config: key '" + key + "' is unknown or not "
                        "applicable to algorithm '" + c.algorithm_name() + "'");

  c.env = j.at("env").get<std::string>();
  c.total_steps = j.at("total_steps").get<long>();
  c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  c.horizon = get_or(j, "horizon", c.horizon);
  c.epochs = get_or(j, "epochs", c.epochs);
  c.minibatch_size = get_or(j, "minibatch_size", c.minibatch_size);
  c.gamma = get_or(j, "gamma", c.gamma);
  c.lambda = get_or(j, "lambda", c.lambda);
  c.n_actors = get_or(j, "n_actors", c.n_actors);
  c.adam_step_size = get_or(j, "adam_step_size", c.adam_step_size);
  c.hidden_size = get_or(j, "hidden_size", c.hidden_size);
  c.out_dir = get_or(j, "out_dir", c.out_dir);
  c.checkpoint_interval = get_or(j, "checkpoint_interval", c.checkpoint_interval);

  c.objective.kind = c.algorithm;
  c.objective.c1 = get_or(j, "value_coef", 0.5);
  c.objective.c2 = get_or(j, "entropy_coef", 0.0);
  c.objective.clip_eps = get_or(j, "clip_eps", 0.2);
  // the adaptive scheme starts at 1 unless overridden; kl-fixed defaults 0.1
  c.objective.beta = get_or(
      j, "beta", c.algorithm == ObjectiveKind::KlAdaptive ? 1.0 : 0.1);
  c.objective.d_targ = get_or(j, "d_targ", 0.01);
  c.objective.beta0 = get_or(j, "beta0", 1.0);

  if (c.algorithm == ObjectiveKind::Mcpo) {
    c.mcpo.memory_capacity = get_or(j, "memory_capacity", 5);
    c.mcpo.beta_min = get_or(j, "beta_min", 0.01);
    c.mcpo.beta_max = get_or(j, "beta_max", 10.0);
    std::string wr = get_or<std::string>(j, "write_rule", "diversity");
    if (wr == "diversity") {
      c.mcpo.write_rule = WriteRule::Diversity;
      c.mcpo.write_strict = false;
    } else if (wr == "diversity-strict") {
      c.mcpo.write_rule = WriteRule::Diversity;
      c.mcpo.write_strict = true;
    } else if (wr == "frequent") {
      c.mcpo.write_rule = WriteRule::Frequent;
    } else if (wr == "uniform") {
      c.mcpo.write_rule = WriteRule::Uniform;
      c.mcpo.write_interval = 10;
    } else if (wr == "sparse") {
      c.mcpo.write_rule = WriteRule::Sparse;
      c.mcpo.write_interval = 100;
    } else {
      throw ConfigError("config: unknown write_rule '" + wr + "'");
    }
    std::string am = get_or<std::string>(j, "alpha_mode", "learned");
    if (am == "learned")
      c.mcpo.alpha_mode = AlphaMode::Learned;
    else if (am == "fixed")
      c.mcpo.alpha_mode = AlphaMode::Fixed;
    else
      throw ConfigError("config: unknown alpha_mode '" + am + "'");
    c.mcpo.alpha_fixed = get_or(j, "alpha_fixed", 0.5);
    std::string at = get_or<std::string>(j, "attention", "learned");
    if (at == "learned")
      c.mcpo.attention = AttentionVariant::Learned;
    else if (at == "mean")
      c.mcpo.attention = AttentionVariant::MeanPsi;
    else if (at == "half-feature")
      c.mcpo.attention = AttentionVariant::HalfFeature;
    else
      throw ConfigError("config: unknown attention variant '" + at + "'");
    std::string bm = get_or<std::string>(j, "beta_mode", "switching");
    if (bm == "switching")
      c.mcpo.beta_mode = BetaMode::Switching;
    else if (bm == "annealed")
      c.mcpo.beta_mode = BetaMode::Annealed;
    else if (bm == "adaptive")
      c.mcpo.beta_mode = BetaMode::Adaptive;
    else
      throw ConfigError("config: unknown beta_mode '" + bm + "'");
    c.mcpo.beta0 = get_or(j, "beta0", 1.0);
    c.mcpo.d_targ = get_or(j, "d_targ", 0.03);
    c.mcpo.dropout_enabled = get_or(j, "dropout", true);
    c.mcpo.t_total_updates =
        c.iterations() * c.minibatch_updates_per_iteration();
  }

  // invariants
  if (c.seeds.empty()) throw ConfigError("config: 'seeds' must be nonempty");
  if (c.horizon < 1) throw ConfigError("config: 'horizon' must be >= 1");
  if (c.epochs < 1) throw ConfigError("config: 'epochs' must be >= 1");
  if (c.minibatch_size < 1)
    throw ConfigError("config: 'minibatch_size' must be >= 1");
  if (c.n_actors < 1) throw ConfigError("config: 'n_actors' must be >= 1");
  if (c.gamma <= 0.0 || c.gamma > 1.0)
    throw ConfigError("config: 'gamma' must lie in (0,1]");
  if (c.lambda <= 0.0 || c.lambda > 1.0)
    throw ConfigError("config: 'lambda' must lie in (0,1]");
  if (c.total_steps < c.steps_per_iteration())
    throw ConfigError("config: 'total_steps' must cover at least one "
                      "iteration (horizon * n_actors)");
  if (c.objective.c1 < 0.0) throw ConfigError("config: 'value_coef' >= 0");
  if (c.objective.c2 < 0.0) throw ConfigError("config: 'entropy_coef' >= 0");
  if (c.algorithm == ObjectiveKind::Mcpo) {
    if (c.mcpo.memory_capacity < 1)
      throw ConfigError("config: 'memory_capacity' must be >= 1");
    if (c.mcpo.beta_min >= c.mcpo.beta_max)
      throw ConfigError("config: 'beta_min' must be below 'beta_max'");
  }
  if (c.algorithm == ObjectiveKind::PpoClip &&
      (c.objective.clip_eps <= 0.0 || c.objective.clip_eps >= 1.0))
    throw ConfigError("config: 'clip_eps' must lie in (0,1)");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string RunConfig::to_json() const {
  json j;
  j["env"] = env;
  j["algorithm"] = algorithm_name();
  j["total_steps"] = total_steps;
  j["seeds"] = seeds;
  j["horizon"] = horizon;
  j["epochs"] = epochs;
  j["minibatch_size"] = minibatch_size;
  j["gamma"] = gamma;
  j["lambda"] = lambda;
  j["n_actors"] = n_actors;
  j["adam_step_size"] = adam_step_size;
  j["hidden_size"] = hidden_size;
  j["value_coef"] = objective.c1;
  j["entropy_coef"] = objective.c2;
  j["out_dir"] = out_dir;
  j["checkpoint_interval"] = checkpoint_interval;
  switch (algorithm) {
    case ObjectiveKind::PpoClip:
      j["clip_eps"] = objective.clip_eps;
      break;
    case ObjectiveKind::KlFixed:
      j["beta"] = objective.beta;
      break;
    case ObjectiveKind::KlAdaptive:
      j["beta"] = objective.beta;
      j["d_targ"] = objective.d_targ;
      break;
    case ObjectiveKind::MdpoAnneal:
      j["beta0"] = objective.beta0;
      break;
    case ObjectiveKind::Mcpo: {
      j["memory_capacity"] = mcpo.memory_capacity;
      j["beta_min"] = mcpo.beta_min;
      j["beta_max"] = mcpo.beta_max;
      std::string wr = mcpo.write_rule == WriteRule::Frequent ? "frequent"
                       : mcpo.write_rule == WriteRule::Uniform ? "uniform"
                       : mcpo.write_rule == WriteRule::Sparse
                           ? "sparse"
                           : (mcpo.write_strict ? "diversity-strict"
                                                : "diversity");
      j["write_rule"] = wr;
      j["alpha_mode"] =
          mcpo.alpha_mode == AlphaMode::Fixed ? "fixed" : "learned";
      j["alpha_fixed"] = mcpo.alpha_fixed;
      j["attention"] = mcpo.attention == AttentionVariant::MeanPsi ? "mean"
                       : mcpo.attention == AttentionVariant::HalfFeature
                           ? "half-feature"
                           : "learned";
      j["beta_mode"] = mcpo.beta_mode == BetaMode::Annealed   ? "annealed"
                       : mcpo.beta_mode == BetaMode::Adaptive ? "adaptive"
                                                              : "switching";
      j["beta0"] = mcpo.beta0;
      j["d_targ"] = mcpo.d_targ;
      j["dropout"] = mcpo.dropout_enabled;
      break;
    }
  }
  return j.dump(2);
}

}  // namespace mcpo::harness

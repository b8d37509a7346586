#include "kgp/config.hpp"

#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "kgp/error.hpp"

namespace kgp {

SamplerKind parse_sampler(const std::string& name) {
  if (name == "rns") return SamplerKind::rns;
  if (name == "pns") return SamplerKind::pns;
  if (name == "dns") return SamplerKind::dns;
  if (name == "rws") return SamplerKind::rws;
  if (name == "kgpolicy") return SamplerKind::kgpolicy;
  throw ConfigError("unknown sampler '" + name + "' (expected rns|pns|dns|rws|kgpolicy)");
}

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::rns: return "rns";
    case SamplerKind::pns: return "pns";
    case SamplerKind::dns: return "dns";
    case SamplerKind::rws: return "rws";
    case SamplerKind::kgpolicy: return "kgpolicy";
  }
  return "?";
}

RewardMode parse_reward(const std::string& name) {
  if (name == "both") return RewardMode::both;
  if (name == "prediction") return RewardMode::prediction_only;
  if (name == "similarity") return RewardMode::similarity_only;
  throw ConfigError("unknown reward mode '" + name + "' (expected both|prediction|similarity)");
}

std::string to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::both: return "both";
    case RewardMode::prediction_only: return "prediction";
    case RewardMode::similarity_only: return "similarity";
  }
  return "?";
}

PolicyEstimator parse_estimator(const std::string& name) {
  if (name == "return_to_go") return PolicyEstimator::return_to_go;
  if (name == "per_step") return PolicyEstimator::per_step;
  throw ConfigError("unknown estimator '" + name + "' (expected return_to_go|per_step)");
}

std::string to_string(PolicyEstimator e) {
  return e == PolicyEstimator::return_to_go ? "return_to_go" : "per_step";
}

namespace {

std::string warm_name(WarmStart w) {
  switch (w) {
    case WarmStart::auto_: return "auto";
    case WarmStart::always: return "always";
    case WarmStart::never: return "never";
  }
  return "?";
}

WarmStart parse_warm(const std::string& s) {
  if (s == "auto") return WarmStart::auto_;
  if (s == "always") return WarmStart::always;
  if (s == "never") return WarmStart::never;
  throw ConfigError("unknown warm_start '" + s + "' (expected auto|always|never)");
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(dim > 0, "dim must be positive");
  require(layers >= 1, "layers must be at least 1");
  require(lr_rec >= 0.0 && lr_sampler >= 0.0, "learning rates must be non-negative");
  require(l2 >= 0.0, "l2 must be non-negative");
  require(batch_size > 0 && sampler_batch_size > 0, "batch sizes must be positive");
  require(steps >= 1, "steps (T) must be at least 1");
  require(n1 >= 1 && n2 >= 1, "n1 and n2 must be positive");
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(slope >= 0.0 && slope < 1.0, "LeakyReLU slope must lie in [0, 1)");
  require(k_dns >= 1, "k_dns must be positive");
  require(top_k >= 1, "top_k must be positive");
  require(validation_fraction >= 0.0 && validation_fraction < 1.0,
          "validation_fraction must lie in [0, 1)");
}

bool TrainConfig::uses_warm_start() const {
  switch (warm_start) {
    case WarmStart::always: return true;
    case WarmStart::never: return false;
    case WarmStart::auto_: return sampler == SamplerKind::kgpolicy;
  }
  return false;
}

PolicyConfig TrainConfig::policy() const {
  PolicyConfig p;
  p.steps = steps;
  p.n1 = n1;
  p.n2 = n2;
  p.n_rand = n_rand;
  p.gamma = gamma;
  p.slope = slope;
  p.prediction_weight = reward == RewardMode::similarity_only ? 0.0 : 1.0;
  p.similarity_weight = reward == RewardMode::prediction_only ? 0.0 : 1.0;
  p.baseline_window = baseline_window;
  p.estimator = estimator;
  return p;
}

std::string TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["data_dir"] = data_dir;
  j["sampler"] = to_string(sampler);
  j["seed"] = seed;
  j["dim"] = dim;
  j["layers"] = layers;
  j["lr_rec"] = lr_rec;
  j["lr_sampler"] = lr_sampler;
  j["l2"] = l2;
  j["batch_size"] = batch_size;
  j["sampler_batch_size"] = sampler_batch_size;
  j["epochs"] = epochs;
  j["steps"] = steps;
  j["n1"] = n1;
  j["n2"] = n2;
  j["n_rand"] = n_rand;
  j["gamma"] = gamma;
  j["slope"] = slope;
  j["reward"] = to_string(reward);
  j["estimator"] = to_string(estimator);
  j["baseline_window"] = baseline_window;
  j["k_dns"] = k_dns;
  j["rws_walk_len"] = rws_walk_len;
  j["pns_exponent"] = pns_exponent;
  j["warm_start"] = warm_name(warm_start);
  j["pretrain_epochs"] = pretrain_epochs;
  j["pretrain_patience"] = pretrain_patience;
  j["validation_fraction"] = validation_fraction;
  j["eval_every"] = eval_every;
  j["top_k"] = top_k;
  j["checkpoint_every"] = checkpoint_every;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig c;
  const auto known = nlohmann::json::parse(c.to_json());
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config field '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      using Field = std::remove_reference_t<decltype(field)>;
      if constexpr (std::is_unsigned_v<Field>) {
        if (!j.at(key).is_number_unsigned()) {
          throw ConfigError(std::string("config field '") + key + "' must be a non-negative integer");
        }
      }
      try {
        j.at(key).get_to(field);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
      }
    }
  };
  get("data_dir", c.data_dir);
  get("seed", c.seed);
  get("dim", c.dim);
  get("layers", c.layers);
  get("lr_rec", c.lr_rec);
  get("lr_sampler", c.lr_sampler);
  get("l2", c.l2);
  get("batch_size", c.batch_size);
  get("sampler_batch_size", c.sampler_batch_size);
  get("epochs", c.epochs);
  get("steps", c.steps);
  get("n1", c.n1);
  get("n2", c.n2);
  get("n_rand", c.n_rand);
  get("gamma", c.gamma);
  get("slope", c.slope);
  get("baseline_window", c.baseline_window);
  get("k_dns", c.k_dns);
  get("rws_walk_len", c.rws_walk_len);
  get("pns_exponent", c.pns_exponent);
  get("pretrain_epochs", c.pretrain_epochs);
  get("pretrain_patience", c.pretrain_patience);
  get("validation_fraction", c.validation_fraction);
  get("eval_every", c.eval_every);
  get("top_k", c.top_k);
  get("checkpoint_every", c.checkpoint_every);
  std::string name;
  if (j.contains("sampler")) {
    get("sampler", name);
    c.sampler = parse_sampler(name);
  }
  if (j.contains("reward")) {
    get("reward", name);
    c.reward = parse_reward(name);
  }
  if (j.contains("estimator")) {
    get("estimator", name);
    c.estimator = parse_estimator(name);
  }
  if (j.contains("warm_start")) {
    get("warm_start", name);
    c.warm_start = parse_warm(name);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

}  // namespace kgp

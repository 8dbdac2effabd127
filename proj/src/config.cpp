#include "epic/config.hpp"

#include <fstream>
#include <map>
#include <set>
#include <type_traits>

namespace epic::config {
namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed so leftovers can
// be rejected as unknown fields.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!j_.at(key).is_number_unsigned()) throw ConfigError(path(key), "must be a nonnegative integer");
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path(key), "has the wrong type");
    }
  }

  template <class T>
  void require(const std::string& key, T& out) {
    if (!j_.contains(key)) throw ConfigError(path(key), "missing required field");
    read(key, out);
  }

  ObjectReader child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return ObjectReader(j_.contains(key) ? j_.at(key) : empty, path(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.contains(item.key())) throw ConfigError(path(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

// validate() reports "field: reason" with struct member names; translate them
// to the path the field has in the config file.
const std::map<std::string, std::string> kFieldPaths = {
    {"tiles_min", "tiles_per_slide.min"},
    {"tiles_max", "tiles_per_slide.max"},
    {"n_latent_morphs", "morphs.count"},
    {"morph_hazard_coeffs", "morphs.hazard_coeffs"},
    {"n_parts", "parts.n_parts"},
    {"waist", "parts.waist"},
    {"top_p", "parts.top_p"},
    {"hidden_dims", "network.hidden_dims"},
    {"head_dims", "network.head_dims"},
    {"dropout", "network.dropout"},
    {"lambda_c", "loss.lambda_c"},
    {"lambda_s", "loss.lambda_s"},
    {"huber_beta", "loss.huber_beta"},
    {"part_batch_size", "optim.part_batch_size"},
    {"learning_rate", "optim.learning_rate"},
};

template <class Fn>
void validated(Fn&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    if (colon == std::string::npos) throw ConfigError("<config>", msg);
    std::string field = msg.substr(0, colon);
    if (auto it = kFieldPaths.find(field); it != kFieldPaths.end()) field = it->second;
    throw ConfigError(field, msg.substr(colon + 2));
  }
}

}  // namespace

json to_json(const synth::CohortConfig& c) {
  return {{"n_slides", c.n_slides},
          {"tiles_per_slide", {{"min", c.tiles_min}, {"max", c.tiles_max}}},
          {"input_dim", c.input_dim},
          {"morphs", {{"count", c.n_latent_morphs}, {"hazard_coeffs", c.morph_hazard_coeffs}}},
          {"baseline_rate", c.baseline_rate},
          {"censor_rate", c.censor_rate},
          {"noise_sigma", c.noise_sigma},
          {"seed", c.seed}};
}

json to_json(const train::TrainConfig& c) {
  return {{"parts", {{"n_parts", c.n_parts}, {"waist", c.waist}, {"top_p", c.top_p}}},
          {"network",
           {{"hidden_dims", c.hidden_dims},
            {"head_dims", c.head_dims},
            {"dropout", c.dropout},
            {"encoder_dropout", c.encoder_dropout}}},
          {"loss",
           {{"lambda_c", c.lambda_c},
            {"lambda_s", c.lambda_s},
            {"huber_beta", c.huber_beta},
            {"stratification_enabled", c.stratification_enabled}}},
          {"optim",
           {{"part_batch_size", c.part_batch_size},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"seed", c.seed}}}};
}

synth::CohortConfig cohort_config_from_json(const json& j) {
  synth::CohortConfig c;
  ObjectReader root(j, "");
  root.require("n_slides", c.n_slides);
  {
    auto tiles = root.child("tiles_per_slide");
    tiles.read("min", c.tiles_min);
    tiles.read("max", c.tiles_max);
    tiles.finish();
  }
  root.read("input_dim", c.input_dim);
  {
    auto morphs = root.child("morphs");
    morphs.read("count", c.n_latent_morphs);
    morphs.read("hazard_coeffs", c.morph_hazard_coeffs);
    morphs.finish();
  }
  root.read("baseline_rate", c.baseline_rate);
  root.read("censor_rate", c.censor_rate);
  root.read("noise_sigma", c.noise_sigma);
  root.read("seed", c.seed);
  root.finish();
  validated([&] { c.validate(); });
  return c;
}

train::TrainConfig train_config_from_json(const json& j) {
  train::TrainConfig c;
  ObjectReader root(j, "");
  {
    auto parts = root.child("parts");
    parts.read("n_parts", c.n_parts);
    parts.read("waist", c.waist);
    parts.read("top_p", c.top_p);
    parts.finish();
  }
  {
    auto network = root.child("network");
    network.read("hidden_dims", c.hidden_dims);
    network.read("head_dims", c.head_dims);
    network.read("dropout", c.dropout);
    network.read("encoder_dropout", c.encoder_dropout);
    network.finish();
  }
  {
    auto loss = root.child("loss");
    loss.read("lambda_c", c.lambda_c);
    loss.read("lambda_s", c.lambda_s);
    loss.read("huber_beta", c.huber_beta);
    loss.read("stratification_enabled", c.stratification_enabled);
    loss.finish();
  }
  {
    auto optim = root.child("optim");
    optim.read("part_batch_size", c.part_batch_size);
    optim.read("learning_rate", c.learning_rate);
    optim.read("epochs", c.epochs);
    optim.read("seed", c.seed);
    optim.finish();
  }
  root.finish();
  validated([&] { c.validate(); });
  return c;
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("--config", "invalid JSON in " + path.string() + ": " + e.what());
  }
  if (j.is_object() && j.contains("manifest_version") && j.contains("config")) return j.at("config");
  return j;
}

}  // namespace epic::config

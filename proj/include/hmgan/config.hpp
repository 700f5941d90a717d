#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hmgan/errors.hpp"
#include "hmgan/regularizers.hpp"
#include "hmgan/stack.hpp"

namespace hmgan {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

struct DatasetConfig {
  std::size_t conditions = 2;
  std::size_t modes_per_condition = 8;
  double radius = 0.7;
  double sigma = 0.05;
  std::size_t samples = 2048;
  std::uint64_t seed = 42;  // dataset seed is fixed per experiment, not per run
};

struct StackConfig {
  std::size_t z_width = 2;
  std::vector<std::size_t> gen_hidden = {32, 32, 32};
  std::vector<std::size_t> disc_hidden = {32, 32, 32};
  // tanh keeps pair distances strictly positive through hidden layers; relu
  // can clamp a pair to identical taps and zero out a logged ratio
  Activation hidden_activation = Activation::tanh;
};

struct MetricsConfig {
  std::size_t k = 20;
  double alpha = 0.05;
  std::uint64_t embedder_seed = 17;
  std::size_t eval_samples = 2048;
};

struct BoundsConfig {
  std::size_t max_samples = 512;
};

/// A fully-resolved experiment: dataset, stacks, variant, regularizer
/// settings, optimizer hyper-parameters and metric configuration. A
/// (config, seed) pair determines every report field.
struct ExperimentConfig {
  DatasetConfig dataset;
  StackConfig stack;
  std::string variant = "baseline";  // baseline | msgan | hmgan
  std::optional<std::string> ere_preset_name;
  std::optional<std::vector<double>> ere_values;
  std::string msgan_numerator = "first_layer";
  double beta = 1.0;
  double learning_rate = 1e-3;
  double momentum = 0.5;
  std::size_t batch_size = 64;
  std::size_t steps = 3000;
  std::vector<std::uint64_t> seeds = {1};
  MetricsConfig metrics;
  BoundsConfig bounds;

  std::size_t generator_layer_count() const { return stack.gen_hidden.size() + 1; }

  RegVariant reg_variant() const {
    if (variant == "hmgan") return RegVariant::hierarchical;
    if (variant == "msgan") return RegVariant::msgan;
    return RegVariant::none;
  }

  MsganNumerator numerator() const {
    return msgan_numerator == "raw_input" ? MsganNumerator::raw_input
                                          : MsganNumerator::first_layer;
  }

  /// The per-layer targets used when the variant is hmgan.
  EREVector resolve_ere() const {
    const std::size_t n = generator_layer_count();
    if (ere_values) return EREVector(*ere_values);
    return ere_preset(ere_preset_name.value_or("HMGAN1"), n);
  }

  /// Normalized document: every field materialized, fixed key order.
  ordered_json to_json() const {
    ordered_json doc;
    doc["dataset"] = {{"conditions", dataset.conditions},
                      {"modes_per_condition", dataset.modes_per_condition},
                      {"radius", dataset.radius},
                      {"sigma", dataset.sigma},
                      {"samples", dataset.samples},
                      {"seed", dataset.seed}};
    doc["stack"] = {{"z_width", stack.z_width},
                    {"gen_hidden", stack.gen_hidden},
                    {"disc_hidden", stack.disc_hidden},
                    {"hidden_activation", activation_name(stack.hidden_activation)}};
    doc["variant"] = variant;
    if (variant == "hmgan") {
      ordered_json ere;
      if (ere_values)
        ere["values"] = *ere_values;
      else
        ere["preset"] = ere_preset_name.value_or("HMGAN1");
      doc["ere"] = std::move(ere);
    }
    if (variant == "msgan") doc["msgan_numerator"] = msgan_numerator;
    doc["beta"] = beta;
    doc["learning_rate"] = learning_rate;
    doc["momentum"] = momentum;
    doc["batch_size"] = batch_size;
    doc["steps"] = steps;
    doc["seeds"] = seeds;
    doc["metrics"] = {{"k", metrics.k},
                      {"alpha", metrics.alpha},
                      {"embedder_seed", metrics.embedder_seed},
                      {"eval_samples", metrics.eval_samples}};
    doc["bounds"] = {{"max_samples", bounds.max_samples}};
    return doc;
  }
};

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::vector<ValidationIssue>& issues) : issues_(issues) {}

  void issue(const std::string& path, const std::string& message) {
    issues_.push_back({path, message});
  }

  /// Returns the sub-object at key, checking its own keys against `allowed`.
  const json* object(const json& parent, const std::string& path, const std::string& key,
                     const std::vector<std::string>& allowed) {
    if (!parent.contains(key)) return nullptr;
    const json& child = parent.at(key);
    if (!child.is_object()) {
      issue(path + "/" + key, "must be an object");
      return nullptr;
    }
    reject_unknown(child, path + "/" + key, allowed);
    return &child;
  }

  void reject_unknown(const json& obj, const std::string& path,
                      const std::vector<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (const std::string& k : allowed)
        if (it.key() == k) {
          known = true;
          break;
        }
      if (!known) issue(path + "/" + it.key(), "unknown key");
    }
  }

  template <typename T>
  void read_uint(const json& obj, const std::string& path, const std::string& key, T& out,
                 std::uint64_t min_value = 0) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      issue(path + "/" + key, "must be a non-negative integer");
      return;
    }
    const std::uint64_t raw = v.get<std::uint64_t>();
    if (raw < min_value) {
      issue(path + "/" + key, "must be >= " + std::to_string(min_value));
      return;
    }
    out = static_cast<T>(raw);
  }

  void read_double(const json& obj, const std::string& path, const std::string& key, double& out,
                   bool require_positive = false, bool require_nonnegative = false) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      issue(path + "/" + key, "must be a number");
      return;
    }
    const double raw = v.get<double>();
    if (require_positive && !(raw > 0.0)) {
      issue(path + "/" + key, "must be > 0");
      return;
    }
    if (require_nonnegative && !(raw >= 0.0)) {
      issue(path + "/" + key, "must be >= 0");
      return;
    }
    out = raw;
  }

  void read_string(const json& obj, const std::string& path, const std::string& key,
                   std::string& out, const std::vector<std::string>& allowed = {}) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_string()) {
      issue(path + "/" + key, "must be a string");
      return;
    }
    const std::string raw = v.get<std::string>();
    if (!allowed.empty()) {
      bool ok = false;
      for (const std::string& a : allowed)
        if (raw == a) ok = true;
      if (!ok) {
        std::string expect;
        for (const std::string& a : allowed) expect += (expect.empty() ? "" : ", ") + a;
        issue(path + "/" + key, "must be one of: " + expect);
        return;
      }
    }
    out = raw;
  }

  template <typename T>
  void read_uint_array(const json& obj, const std::string& path, const std::string& key,
                       std::vector<T>& out, std::uint64_t min_value, bool allow_empty) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      issue(path + "/" + key, "must be an array");
      return;
    }
    std::vector<T> parsed;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const json& e = v.at(i);
      if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<std::int64_t>() >= 0)) {
        issue(path + "/" + key + "/" + std::to_string(i), "must be a non-negative integer");
        return;
      }
      const std::uint64_t raw = e.get<std::uint64_t>();
      if (raw < min_value) {
        issue(path + "/" + key + "/" + std::to_string(i),
              "must be >= " + std::to_string(min_value));
        return;
      }
      parsed.push_back(static_cast<T>(raw));
    }
    if (!allow_empty && parsed.empty()) {
      issue(path + "/" + key, "must not be empty");
      return;
    }
    out = std::move(parsed);
  }

 private:
  std::vector<ValidationIssue>& issues_;
};

}  // namespace detail

/// Validates and normalizes a raw config document, collecting every problem.
/// A manifest document ({"config": {...}, "tool_version": ...}) is unwrapped
/// transparently so a recorded run can be replayed as-is.
inline ExperimentConfig validate_config(const json& raw_doc,
                                        std::vector<ValidationIssue>& issues) {
  const json* doc = &raw_doc;
  if (raw_doc.is_object() && raw_doc.contains("config") && raw_doc.contains("tool_version"))
    doc = &raw_doc.at("config");

  ExperimentConfig cfg;
  if (!doc->is_object()) {
    issues.push_back({"", "root must be an object"});
    return cfg;
  }
  detail::ConfigReader r(issues);
  r.reject_unknown(*doc, "",
                   {"dataset", "stack", "variant", "ere", "msgan_numerator", "beta",
                    "learning_rate", "momentum", "batch_size", "steps", "seeds", "metrics",
                    "bounds"});

  if (const json* d = r.object(*doc, "", "dataset",
                               {"conditions", "modes_per_condition", "radius", "sigma", "samples",
                                "seed"})) {
    r.read_uint(*d, "/dataset", "conditions", cfg.dataset.conditions, 1);
    r.read_uint(*d, "/dataset", "modes_per_condition", cfg.dataset.modes_per_condition, 1);
    r.read_double(*d, "/dataset", "radius", cfg.dataset.radius, false, true);
    r.read_double(*d, "/dataset", "sigma", cfg.dataset.sigma, true);
    r.read_uint(*d, "/dataset", "samples", cfg.dataset.samples, 2);
    r.read_uint(*d, "/dataset", "seed", cfg.dataset.seed);
  }

  if (const json* s = r.object(*doc, "", "stack",
                               {"z_width", "gen_hidden", "disc_hidden", "hidden_activation"})) {
    r.read_uint(*s, "/stack", "z_width", cfg.stack.z_width, 1);
    r.read_uint_array(*s, "/stack", "gen_hidden", cfg.stack.gen_hidden, 1, false);
    r.read_uint_array(*s, "/stack", "disc_hidden", cfg.stack.disc_hidden, 1, false);
    std::string act = activation_name(cfg.stack.hidden_activation);
    r.read_string(*s, "/stack", "hidden_activation", act, {"relu", "tanh"});
    cfg.stack.hidden_activation = act == "tanh" ? Activation::tanh : Activation::relu;
  }

  r.read_string(*doc, "", "variant", cfg.variant, {"baseline", "msgan", "hmgan"});

  if (doc->contains("ere")) {
    if (cfg.variant != "hmgan")
      r.issue("/ere", "only valid with variant hmgan");
    if (const json* e = r.object(*doc, "", "ere", {"preset", "values"})) {
      if (e->contains("preset") && e->contains("values"))
        r.issue("/ere", "preset and values are mutually exclusive");
      if (e->contains("preset")) {
        std::string preset;
        r.read_string(*e, "/ere", "preset", preset, {"HMGAN1", "HMGAN2", "HMGAN3"});
        if (!preset.empty()) cfg.ere_preset_name = preset;
      }
      if (e->contains("values")) {
        const json& v = e->at("values");
        if (!v.is_array() || v.empty()) {
          r.issue("/ere/values", "must be a non-empty array of numbers");
        } else {
          std::vector<double> vals;
          bool ok = true;
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v.at(i).is_number() || v.at(i).get<double>() < 0.0 ||
                v.at(i).get<double>() > 1.0) {
              r.issue("/ere/values/" + std::to_string(i), "must be a number in [0, 1]");
              ok = false;
            } else {
              vals.push_back(v.at(i).get<double>());
            }
          }
          if (ok) cfg.ere_values = std::move(vals);
        }
      }
    }
  }

  r.read_string(*doc, "", "msgan_numerator", cfg.msgan_numerator, {"first_layer", "raw_input"});
  r.read_double(*doc, "", "beta", cfg.beta, false, true);
  r.read_double(*doc, "", "learning_rate", cfg.learning_rate, true);
  r.read_double(*doc, "", "momentum", cfg.momentum, false, true);
  r.read_uint(*doc, "", "batch_size", cfg.batch_size, 2);
  r.read_uint(*doc, "", "steps", cfg.steps, 1);
  r.read_uint_array(*doc, "", "seeds", cfg.seeds, 0, false);

  if (const json* m = r.object(*doc, "", "metrics", {"k", "alpha", "embedder_seed",
                                                     "eval_samples"})) {
    r.read_uint(*m, "/metrics", "k", cfg.metrics.k, 1);
    r.read_double(*m, "/metrics", "alpha", cfg.metrics.alpha, true);
    if (cfg.metrics.alpha >= 1.0) r.issue("/metrics/alpha", "must be in (0, 1)");
    r.read_uint(*m, "/metrics", "embedder_seed", cfg.metrics.embedder_seed);
    r.read_uint(*m, "/metrics", "eval_samples", cfg.metrics.eval_samples, 2);
  }

  if (const json* b = r.object(*doc, "", "bounds", {"max_samples"}))
    r.read_uint(*b, "/bounds", "max_samples", cfg.bounds.max_samples, 2);

  // cross-field rules
  if (cfg.ere_values && cfg.ere_values->size() != cfg.stack.gen_hidden.size())
    r.issue("/ere/values", "length must equal generator layer count - 1 (" +
                               std::to_string(cfg.stack.gen_hidden.size()) + ")");
  if (cfg.metrics.k > cfg.dataset.samples)
    r.issue("/metrics/k", "must not exceed dataset samples");
  return cfg;
}

inline ExperimentConfig validate_config_or_throw(const json& doc) {
  std::vector<ValidationIssue> issues;
  ExperimentConfig cfg = validate_config(doc, issues);
  if (!issues.empty()) throw ValidationError(std::move(issues));
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError({{"", std::string("not valid JSON: ") + e.what()}});
  }
  return validate_config_or_throw(doc);
}

/// Applies one dotted-key override, e.g. "dataset.sigma=0.1". The value is
/// parsed as JSON when possible, else taken as a string. Unknown keys are
/// caught by validation before any work runs.
inline void apply_override(json& doc, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw DomainError("override '" + assignment + "' must look like key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);

  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare string
  }

  json* cursor = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw DomainError("override '" + assignment + "' has an empty key segment");
    if (dot == std::string::npos) {
      (*cursor)[part] = std::move(parsed);
      return;
    }
    if (!cursor->contains(part) || !(*cursor)[part].is_object()) (*cursor)[part] = json::object();
    cursor = &(*cursor)[part];
    start = dot + 1;
  }
}

/// FNV-1a 64 over the normalized document, as 16 hex digits.
inline std::string config_hash(const ordered_json& normalized) {
  const std::string text = normalized.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hmgan

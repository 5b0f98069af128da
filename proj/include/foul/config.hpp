#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "foul/client.hpp"
#include "foul/errors.hpp"
#include "foul/model.hpp"
#include "foul/server.hpp"

namespace foul {

enum class Scenario { foul, retrain_reset, retrain_noreset };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::foul:
      return "foul";
    case Scenario::retrain_reset:
      return "retrain_reset";
    case Scenario::retrain_noreset:
      return "retrain_noreset";
  }
  return "foul";
}

inline Scenario parse_scenario(std::string_view s) {
  if (s == "foul") return Scenario::foul;
  if (s == "retrain_reset") return Scenario::retrain_reset;
  if (s == "retrain_noreset") return Scenario::retrain_noreset;
  throw ConfigError("unknown scenario '" + std::string(s) + "'");
}

enum class MetricFormat { csv, jsonl };

inline MetricFormat parse_metric_format(std::string_view s) {
  if (s == "csv") return MetricFormat::csv;
  if (s == "jsonl") return MetricFormat::jsonl;
  throw ConfigError("unknown format '" + std::string(s) + "'");
}

/// Full experiment description. Every field has a default; the flat
/// key=value config file overrides them (unknown keys are rejected).
struct ExperimentConfig {
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::foul;
  std::string out_path = "metrics.csv";
  MetricFormat format = MetricFormat::csv;

  // synthetic data
  int num_classes = 4;
  std::size_t causal_dim = 4;
  std::size_t spurious_dim = 4;
  double causal_margin = 3.0;
  double causal_noise = 0.5;
  double spurious_margin = 3.0;
  double spurious_noise = 0.5;
  /// Spurious noise of the forget domain; the forget domain's non-causal
  /// features are idiosyncratic (high-variance) rather than shared, the
  /// desk-scale analog of domain-specific knowledge. NaN = spurious_noise.
  double spurious_noise_forget = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> domain_rhos = {0.9, 0.8, 0.7, -0.9};
  double domain_mean_scale = 2.0;
  std::size_t clients_per_domain = 2;
  std::size_t samples_per_client = 500;
  std::size_t test_samples_per_domain = 250;
  int forget_domain = 0;

  // model
  std::size_t hidden_dim = 32;
  std::size_t causal_latent = 16;
  std::size_t noncausal_latent = 8;
  ClassifierInputMode classifier_mode = ClassifierInputMode::concat;

  // learning stage
  L2UConfig l2u;
  int rounds_learn = 100;

  // unlearning stage
  MatchConfig match;
  double eta_g = 0.2;
  UnlearnConfig unlearn;
  int rounds_unlearn = 50;

  // evaluation
  std::size_t mia_max_per_pool = 1000;
  std::size_t bytes_per_value = 4;

  std::size_t num_domains() const { return domain_rhos.size(); }

  void validate() const {
    if (rounds_learn < 0 || rounds_unlearn < 0) {
      throw ConfigError("rounds must be >= 0");
    }
    if (domain_rhos.empty()) throw ConfigError("need at least one domain");
    if (forget_domain < 0 ||
        static_cast<std::size_t>(forget_domain) >= domain_rhos.size()) {
      throw ConfigError("forget_domain outside the configured domains");
    }
    if (clients_per_domain < 1) {
      throw ConfigError("clients_per_domain must be >= 1");
    }
    if (samples_per_client < 10) {
      throw ConfigError("samples_per_client must be >= 10");
    }
    if (bytes_per_value < 1) throw ConfigError("bytes_per_value must be >= 1");
    l2u.validate();
    match.validate();
    if (eta_g < 0.0) throw ConfigError("eta_g must be >= 0");
    if (unlearn.epochs < 0) throw ConfigError("unlearn_epochs must be >= 0");
  }
};

namespace detail {

inline double parse_real(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected a number, got '" + value +
                      "'");
  }
  if (pos != value.size()) {
    throw ConfigError("key '" + key + "': trailing characters in '" + value +
                      "'");
  }
  return out;
}

inline long long parse_integer(const std::string& key,
                               const std::string& value) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': expected an integer, got '" +
                      value + "'");
  }
  if (pos != value.size()) {
    throw ConfigError("key '" + key + "': trailing characters in '" + value +
                      "'");
  }
  return out;
}

inline bool parse_flag(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + value +
                    "'");
}

inline std::vector<double> parse_real_list(const std::string& key,
                                           const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_real(key, item));
  }
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline std::string trim(std::string s) {
  const auto issp = [](char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

}  // namespace detail

/// Parses the flat key=value format ('#' starts a comment). Unknown keys
/// are rejected by name; missing keys keep their defaults.
inline ExperimentConfig parse_config_text(std::string_view text) {
  ExperimentConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value, got '" + line + "'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }

    using detail::parse_flag;
    using detail::parse_integer;
    using detail::parse_real;
    using detail::parse_real_list;

    if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_integer(key, value));
    } else if (key == "scenario") {
      cfg.scenario = parse_scenario(value);
    } else if (key == "out") {
      cfg.out_path = value;
    } else if (key == "format") {
      cfg.format = parse_metric_format(value);
    } else if (key == "num_classes") {
      cfg.num_classes = static_cast<int>(parse_integer(key, value));
    } else if (key == "causal_dim") {
      cfg.causal_dim = static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "spurious_dim") {
      cfg.spurious_dim = static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "causal_margin") {
      cfg.causal_margin = parse_real(key, value);
    } else if (key == "causal_noise") {
      cfg.causal_noise = parse_real(key, value);
    } else if (key == "spurious_margin") {
      cfg.spurious_margin = parse_real(key, value);
    } else if (key == "spurious_noise") {
      cfg.spurious_noise = parse_real(key, value);
    } else if (key == "domain_rhos") {
      cfg.domain_rhos = parse_real_list(key, value);
    } else if (key == "domain_mean_scale") {
      cfg.domain_mean_scale = parse_real(key, value);
    } else if (key == "clients_per_domain") {
      cfg.clients_per_domain =
          static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "samples_per_client") {
      cfg.samples_per_client =
          static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "test_samples_per_domain") {
      cfg.test_samples_per_domain =
          static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "forget_domain") {
      cfg.forget_domain = static_cast<int>(parse_integer(key, value));
    } else if (key == "hidden_dim") {
      cfg.hidden_dim = static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "causal_latent") {
      cfg.causal_latent = static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "noncausal_latent") {
      cfg.noncausal_latent =
          static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "classifier_mode") {
      if (value == "causal_only") {
        cfg.classifier_mode = ClassifierInputMode::causal_only;
      } else if (value == "concat") {
        cfg.classifier_mode = ClassifierInputMode::concat;
      } else {
        throw ConfigError("key 'classifier_mode': unknown mode '" + value +
                          "'");
      }
    } else if (key == "i_l2u") {
      cfg.l2u.i_l2u = static_cast<int>(parse_integer(key, value));
    } else if (key == "i_mid") {
      cfg.l2u.i_mid = static_cast<int>(parse_integer(key, value));
    } else if (key == "eta_l2u") {
      cfg.l2u.eta_l2u = parse_real(key, value);
    } else if (key == "eta_mid") {
      cfg.l2u.eta_mid = parse_real(key, value);
    } else if (key == "batch_size") {
      cfg.l2u.batch_size = static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "alpha_rec") {
      cfg.l2u.alpha_rec = parse_real(key, value);
    } else if (key == "alpha_iv") {
      cfg.l2u.alpha_iv = parse_real(key, value);
    } else if (key == "alpha_v") {
      cfg.l2u.alpha_v = parse_real(key, value);
    } else if (key == "alpha_gtc") {
      cfg.l2u.alpha_gtc = parse_real(key, value);
    } else if (key == "beta_kl") {
      cfg.l2u.beta_kl = parse_real(key, value);
      cfg.unlearn.beta_kl = cfg.l2u.beta_kl;
    } else if (key == "kl_sign") {
      if (value == "plus") {
        cfg.l2u.kl_positive = true;
      } else if (value == "minus") {
        cfg.l2u.kl_positive = false;
      } else {
        throw ConfigError("key 'kl_sign': expected plus or minus");
      }
      cfg.unlearn.kl_positive = cfg.l2u.kl_positive;
    } else if (key == "hinge_epsilon") {
      cfg.l2u.hinge_epsilon = parse_real(key, value);
      cfg.unlearn.hinge_epsilon = cfg.l2u.hinge_epsilon;
    } else if (key == "proto_denominator") {
      if (value == "standard") {
        cfg.l2u.proto_include_target = true;
      } else if (value == "exclusive") {
        cfg.l2u.proto_include_target = false;
      } else {
        throw ConfigError(
            "key 'proto_denominator': expected standard or exclusive");
      }
    } else if (key == "stochastic_reconstruction") {
      cfg.l2u.stochastic_reconstruction = parse_flag(key, value);
      cfg.unlearn.stochastic_reconstruction =
          cfg.l2u.stochastic_reconstruction;
    } else if (key == "rounds_learn") {
      cfg.rounds_learn = static_cast<int>(parse_integer(key, value));
    } else if (key == "rounds_unlearn") {
      cfg.rounds_unlearn = static_cast<int>(parse_integer(key, value));
    } else if (key == "kappa") {
      cfg.match.kappa = parse_real(key, value);
    } else if (key == "dual_exponent") {
      cfg.match.dual_exponent = parse_real(key, value);
    } else if (key == "beta_forget") {
      cfg.match.beta = parse_real(key, value);
    } else if (key == "solver_steps") {
      cfg.match.solver_steps = static_cast<int>(parse_integer(key, value));
    } else if (key == "solver_rate") {
      cfg.match.solver_rate = parse_real(key, value);
    } else if (key == "degeneracy_eps") {
      cfg.match.degeneracy_eps = parse_real(key, value);
    } else if (key == "eta_g") {
      cfg.eta_g = parse_real(key, value);
    } else if (key == "unlearn_epochs") {
      cfg.unlearn.epochs = static_cast<int>(parse_integer(key, value));
    } else if (key == "unlearn_eta") {
      cfg.unlearn.eta = parse_real(key, value);
    } else if (key == "unlearn_batch") {
      cfg.unlearn.batch_size =
          static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "unlearn_loss") {
      if (value == "classification") {
        cfg.unlearn.loss = UnlearnLossKind::classification;
      } else if (value == "recon_var") {
        cfg.unlearn.loss = UnlearnLossKind::reconstruction_variance;
      } else {
        throw ConfigError(
            "key 'unlearn_loss': expected classification or recon_var");
      }
    } else if (key == "mia_max_per_pool") {
      cfg.mia_max_per_pool =
          static_cast<std::size_t>(parse_integer(key, value));
    } else if (key == "bytes_per_value") {
      cfg.bytes_per_value = static_cast<std::size_t>(parse_integer(key, value));
    } else {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

}  // namespace foul

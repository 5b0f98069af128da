#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "foul/errors.hpp"
#include "foul/rng.hpp"

namespace foul {

/// One synthetic domain: an offset in the spurious subspace plus a
/// correlation level that couples the spurious block to the label.
struct DomainSpec {
  int domain_id = 0;
  std::vector<double> spurious_mean;  // length d_s
  double correlation = 0.0;           // in [-1, 1]
  double spurious_noise = 0.5;        // > 0

  void validate(std::size_t spurious_dim) const {
    if (spurious_mean.size() != spurious_dim) {
      throw ShapeError("DomainSpec: spurious_mean length mismatch");
    }
    if (spurious_noise <= 0.0) {
      throw NumericError("DomainSpec: spurious noise must be > 0");
    }
    if (correlation < -1.0 || correlation > 1.0) {
      throw NumericError("DomainSpec: correlation outside [-1, 1]");
    }
  }
};

/// Generator for multi-domain data with a known causal/spurious split:
/// x = concat(x_c, x_s), x_c ~ N(mu_y, sigma_c^2 I) identically in every
/// domain, x_s ~ N(nu_d + rho_d * s_y, sigma_s^2 I) per domain.
struct GeneratorSpec {
  int num_classes = 4;
  std::size_t causal_dim = 4;
  std::size_t spurious_dim = 4;
  std::vector<std::vector<double>> class_causal_means;      // C x d_c
  std::vector<std::vector<double>> class_spurious_protos;   // C x d_s
  double causal_noise = 0.5;  // >= 0; 0 gives the exact zero-noise limit
  std::vector<DomainSpec> domains;

  std::size_t input_dim() const { return causal_dim + spurious_dim; }

  void validate() const {
    if (num_classes < 2) throw ConfigError("GeneratorSpec: need >= 2 classes");
    if (causal_dim < 1 || spurious_dim < 1) {
      throw ConfigError("GeneratorSpec: dimensions must be >= 1");
    }
    if (class_causal_means.size() != static_cast<std::size_t>(num_classes) ||
        class_spurious_protos.size() != static_cast<std::size_t>(num_classes)) {
      throw ShapeError("GeneratorSpec: per-class vectors != num_classes");
    }
    for (const auto& m : class_causal_means) {
      if (m.size() != causal_dim) {
        throw ShapeError("GeneratorSpec: causal mean length mismatch");
      }
    }
    for (const auto& s : class_spurious_protos) {
      if (s.size() != spurious_dim) {
        throw ShapeError("GeneratorSpec: spurious prototype length mismatch");
      }
    }
    for (int a = 0; a < num_classes; ++a) {
      for (int b = a + 1; b < num_classes; ++b) {
        if (class_causal_means[a] == class_causal_means[b]) {
          throw ConfigError("GeneratorSpec: causal means must be distinct");
        }
      }
    }
    if (causal_noise < 0.0) {
      throw NumericError("GeneratorSpec: causal noise must be >= 0");
    }
    for (const auto& d : domains) d.validate(spurious_dim);
  }
};

/// One-hot class means scaled by a margin, plus per-domain spurious offsets
/// nu_d = domain_mean_scale * e_{d mod d_s}.
inline GeneratorSpec make_generator_spec(
    int num_classes, std::size_t causal_dim, std::size_t spurious_dim,
    double causal_margin, double causal_noise, double spurious_margin,
    double spurious_noise, const std::vector<double>& domain_correlations,
    double domain_mean_scale) {
  GeneratorSpec spec;
  spec.num_classes = num_classes;
  spec.causal_dim = causal_dim;
  spec.spurious_dim = spurious_dim;
  spec.causal_noise = causal_noise;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> mu(causal_dim, 0.0);
    mu[static_cast<std::size_t>(c) % causal_dim] += causal_margin;
    // Distinguish classes that alias the same axis when C > d_c.
    if (static_cast<std::size_t>(c) >= causal_dim) mu[0] += causal_margin;
    spec.class_causal_means.push_back(std::move(mu));
    std::vector<double> s(spurious_dim, 0.0);
    s[static_cast<std::size_t>(c) % spurious_dim] = spurious_margin;
    spec.class_spurious_protos.push_back(std::move(s));
  }
  for (std::size_t d = 0; d < domain_correlations.size(); ++d) {
    DomainSpec ds;
    ds.domain_id = static_cast<int>(d);
    ds.spurious_mean.assign(spurious_dim, 0.0);
    ds.spurious_mean[d % spurious_dim] = domain_mean_scale;
    ds.correlation = domain_correlations[d];
    ds.spurious_noise = spurious_noise;
    spec.domains.push_back(std::move(ds));
  }
  spec.validate();
  return spec;
}

struct LabeledDataset {
  std::size_t feature_dim = 0;
  int num_classes = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<int> labels;
  std::vector<int> domain_ids;  // per sample

  std::size_t size() const { return inputs.size(); }
  bool empty() const { return inputs.empty(); }

  void append(std::vector<double> x, int label, int domain_id) {
    if (label < 0 || label >= num_classes) {
      throw DataError("LabeledDataset: label out of range");
    }
    if (x.size() != feature_dim) {
      throw ShapeError("LabeledDataset: feature length mismatch");
    }
    inputs.push_back(std::move(x));
    labels.push_back(label);
    domain_ids.push_back(domain_id);
  }

  void validate() const {
    if (labels.size() != inputs.size() || domain_ids.size() != inputs.size()) {
      throw DataError("LabeledDataset: column lengths differ");
    }
    for (const int y : labels) {
      if (y < 0 || y >= num_classes) {
        throw DataError("LabeledDataset: label out of range");
      }
    }
  }
};

inline LabeledDataset generate_domain(const GeneratorSpec& spec,
                                      const DomainSpec& domain, std::size_t n,
                                      RngStream& rng) {
  spec.validate();
  domain.validate(spec.spurious_dim);
  if (n == 0) throw DataError("generate_domain: n must be >= 1");

  LabeledDataset ds;
  ds.feature_dim = spec.input_dim();
  ds.num_classes = spec.num_classes;
  ds.inputs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(
        rng.next_below(static_cast<std::uint64_t>(spec.num_classes)));
    std::vector<double> x(ds.feature_dim);
    const auto& mu = spec.class_causal_means[static_cast<std::size_t>(y)];
    for (std::size_t j = 0; j < spec.causal_dim; ++j) {
      x[j] = mu[j] + spec.causal_noise * rng.next_normal();
    }
    const auto& proto = spec.class_spurious_protos[static_cast<std::size_t>(y)];
    for (std::size_t j = 0; j < spec.spurious_dim; ++j) {
      x[spec.causal_dim + j] = domain.spurious_mean[j] +
                               domain.correlation * proto[j] +
                               domain.spurious_noise * rng.next_normal();
    }
    ds.append(std::move(x), y, domain.domain_id);
  }
  return ds;
}

enum class ClientRole { retain, forget };

inline const char* to_string(ClientRole r) {
  return r == ClientRole::retain ? "retain" : "forget";
}

/// Client skeleton produced by partitioning; the runtime state (model, rng)
/// is attached by the client module.
struct ClientSkeleton {
  int id = 0;
  int domain_id = 0;
  ClientRole role = ClientRole::retain;
  LabeledDataset shard;
  LabeledDataset train;
  LabeledDataset validation;
};

struct ClientPartition {
  std::vector<ClientSkeleton> clients;
};

/// Splits each domain's samples into clients_per_domain disjoint shards,
/// remainder going to the earliest clients of that domain.
inline ClientPartition partition_clients(
    const std::vector<LabeledDataset>& per_domain_datasets,
    std::size_t clients_per_domain) {
  if (clients_per_domain < 1) {
    throw DataError("partition_clients: clients_per_domain must be >= 1");
  }
  ClientPartition part;
  int next_id = 0;
  for (const auto& ds : per_domain_datasets) {
    if (ds.empty()) {
      throw DataError("partition_clients: empty domain dataset");
    }
    if (ds.size() < clients_per_domain) {
      throw DataError("partition_clients: fewer samples than clients");
    }
    const std::size_t base = ds.size() / clients_per_domain;
    const std::size_t remainder = ds.size() % clients_per_domain;
    std::size_t cursor = 0;
    for (std::size_t c = 0; c < clients_per_domain; ++c) {
      const std::size_t take = base + (c < remainder ? 1 : 0);
      ClientSkeleton client;
      client.id = next_id++;
      client.domain_id = ds.domain_ids.empty() ? 0 : ds.domain_ids[cursor];
      client.role = ClientRole::retain;
      client.shard.feature_dim = ds.feature_dim;
      client.shard.num_classes = ds.num_classes;
      for (std::size_t i = cursor; i < cursor + take; ++i) {
        client.shard.append(ds.inputs[i], ds.labels[i], ds.domain_ids[i]);
      }
      cursor += take;
      part.clients.push_back(std::move(client));
    }
  }
  return part;
}

/// Marks every client of forget_domain as forget, all others retain.
inline ClientPartition split_retain_forget(ClientPartition partition,
                                           int forget_domain) {
  bool found = false;
  for (auto& c : partition.clients) {
    if (c.domain_id == forget_domain) {
      c.role = ClientRole::forget;
      found = true;
    } else {
      c.role = ClientRole::retain;
    }
  }
  if (!found) {
    throw LookupError("split_retain_forget: no clients in domain " +
                      std::to_string(forget_domain));
  }
  return partition;
}

/// 90/10 train/validation split, at least one validation sample, disjoint,
/// order randomized under the stream.
inline std::pair<LabeledDataset, LabeledDataset> train_val_split(
    const LabeledDataset& dataset, RngStream& rng) {
  if (dataset.size() < 10) {
    throw DataError("train_val_split: need at least 10 samples");
  }
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  const std::size_t val_count =
      std::max<std::size_t>(1, dataset.size() / 10);
  LabeledDataset train;
  LabeledDataset val;
  train.feature_dim = val.feature_dim = dataset.feature_dim;
  train.num_classes = val.num_classes = dataset.num_classes;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t idx = order[i];
    auto& target = (i < val_count) ? val : train;
    target.append(dataset.inputs[idx], dataset.labels[idx],
                  dataset.domain_ids[idx]);
  }
  return {std::move(train), std::move(val)};
}

}  // namespace foul

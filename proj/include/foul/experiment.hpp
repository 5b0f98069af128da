#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "foul/client.hpp"
#include "foul/config.hpp"
#include "foul/datagen.hpp"
#include "foul/metrics.hpp"
#include "foul/model.hpp"
#include "foul/server.hpp"

namespace foul {

enum class Stage { learn, unlearn };

inline const char* to_string(Stage s) {
  return s == Stage::learn ? "learn" : "unlearn";
}

/// One metric-log row. Fields that do not apply to a round (e.g. the
/// matching objective during learning) are NaN / empty.
struct RoundRecord {
  static constexpr int kSchemaVersion = 1;

  int round = 0;
  Stage stage = Stage::learn;
  double ra = 0.0;
  double fa = 0.0;
  double ta = 0.0;
  double mia = 0.0;
  double cos_retain = std::numeric_limits<double>::quiet_NaN();
  double cos_forget = std::numeric_limits<double>::quiet_NaN();
  double j_star = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t payload_bytes = 0;
  std::uint64_t flops = 0;
  bool degenerate = false;
  std::vector<double> gamma_retain;
  std::vector<double> gamma_forget;
};

/// Everything a scenario run operates on, fully determined by the config.
struct ExperimentWorld {
  ExperimentConfig config;
  GeneratorSpec generator;
  std::vector<ClientState> clients;
  LabeledDataset test_set;
  LabeledDataset mia_members;
  LabeledDataset mia_nonmembers;
  DisentangledModel initial_model;

  ModelDims model_dims() const {
    ModelDims dims;
    dims.input_dim = config.causal_dim + config.spurious_dim;
    dims.hidden_dim = config.hidden_dim;
    dims.causal_latent = config.causal_latent;
    dims.noncausal_latent = config.noncausal_latent;
    dims.num_classes = config.num_classes;
    dims.mode = config.classifier_mode;
    return dims;
  }
};

inline ExperimentWorld setup_world(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentWorld world;
  world.config = cfg;
  world.generator = make_generator_spec(
      cfg.num_classes, cfg.causal_dim, cfg.spurious_dim, cfg.causal_margin,
      cfg.causal_noise, cfg.spurious_margin, cfg.spurious_noise,
      cfg.domain_rhos, cfg.domain_mean_scale);

  std::vector<LabeledDataset> pools;
  for (std::size_t d = 0; d < cfg.num_domains(); ++d) {
    RngStream rng(cfg.seed, d, 0, "datagen");
    pools.push_back(generate_domain(
        world.generator, world.generator.domains[d],
        cfg.clients_per_domain * cfg.samples_per_client, rng));
  }
  ClientPartition partition = split_retain_forget(
      partition_clients(pools, cfg.clients_per_domain), cfg.forget_domain);

  for (auto& skel : partition.clients) {
    RngStream split_rng(cfg.seed, static_cast<std::uint64_t>(skel.id), 0,
                        "split");
    auto [train, val] = train_val_split(skel.shard, split_rng);
    ClientState state;
    state.id = skel.id;
    state.domain_id = skel.domain_id;
    state.role = skel.role;
    state.train = std::move(train);
    state.validation = std::move(val);
    state.seed = cfg.seed;
    world.clients.push_back(std::move(state));
  }

  world.test_set.feature_dim = world.generator.input_dim();
  world.test_set.num_classes = cfg.num_classes;
  for (std::size_t d = 0; d < cfg.num_domains(); ++d) {
    RngStream rng(cfg.seed, d, 0, "testgen");
    const LabeledDataset part =
        generate_domain(world.generator, world.generator.domains[d],
                        cfg.test_samples_per_domain, rng);
    for (std::size_t i = 0; i < part.size(); ++i) {
      world.test_set.append(part.inputs[i], part.labels[i],
                            part.domain_ids[i]);
    }
  }

  world.mia_members.feature_dim = world.generator.input_dim();
  world.mia_members.num_classes = cfg.num_classes;
  for (const auto& c : world.clients) {
    if (c.role != ClientRole::forget) continue;
    for (std::size_t i = 0; i < c.train.size(); ++i) {
      if (world.mia_members.size() >= cfg.mia_max_per_pool) break;
      world.mia_members.append(c.train.inputs[i], c.train.labels[i],
                               c.train.domain_ids[i]);
    }
  }
  if (!world.mia_members.empty()) {
    RngStream rng(cfg.seed,
                  static_cast<std::uint64_t>(cfg.forget_domain), 0,
                  "mia_nonmember");
    world.mia_nonmembers = generate_domain(
        world.generator,
        world.generator.domains[static_cast<std::size_t>(cfg.forget_domain)],
        world.mia_members.size(), rng);
  }

  RngStream init_rng(cfg.seed, "init");
  world.initial_model =
      DisentangledModel::random_init(world.model_dims(), init_rng);
  for (auto& c : world.clients) c.model = world.initial_model;
  return world;
}

struct ExperimentResult {
  DisentangledModel final_model;
  std::vector<RoundRecord> records;
};

namespace detail {

inline std::vector<ClientEvalView> eval_views(
    const std::vector<ClientState>& clients) {
  std::vector<ClientEvalView> views;
  views.reserve(clients.size());
  for (const auto& c : clients) {
    views.push_back({c.id, c.role, &c.validation});
  }
  return views;
}

inline void fill_evaluation(RoundRecord& rec, const ExperimentWorld& world,
                            const DisentangledModel& global) {
  const AccuracyReport acc =
      evaluate_accuracy(global, eval_views(world.clients), world.test_set);
  rec.ra = acc.ra;
  rec.fa = acc.fa;
  rec.ta = acc.ta;
  rec.mia = world.mia_members.empty()
                ? 0.5
                : mia_loss_threshold(global, world.mia_members,
                                     world.mia_nonmembers)
                      .attack_accuracy;
}

/// One FedAvg round of L2U training over `participants` (indices into
/// world.clients). Returns the record with training metrics filled in.
inline RoundRecord fedavg_round(ExperimentWorld& world,
                                DisentangledModel& global,
                                const std::vector<std::size_t>& participants,
                                std::uint64_t round_tag, Stage stage,
                                int round_index) {
  const ExperimentConfig& cfg = world.config;
  const ParamVector global_before = global.to_params();

  std::vector<ParamVector> locals;
  std::vector<double> weights;
  std::vector<std::vector<double>> pseudo_updates;
  std::vector<ClientUpdateView> update_views;
  std::uint64_t flops = 0;
  std::size_t total_samples = 0;
  for (const std::size_t ci : participants) {
    total_samples += world.clients[ci].train.size();
  }
  for (const std::size_t ci : participants) {
    ClientState& client = world.clients[ci];
    const LocalTrainTrace trace =
        l2u_local_train(client, global, cfg.l2u, round_tag);
    locals.push_back(client.model.to_params());
    weights.push_back(static_cast<double>(client.train.size()) /
                      static_cast<double>(total_samples));
    flops += training_flops(client.model, SegmentSet::generator_phase(),
                            trace.generator_samples);
    flops += training_flops(client.model, SegmentSet::mid_phase(),
                            trace.mid_samples);
  }
  const ParamVector aggregated = fedavg_aggregate(locals, weights);

  for (std::size_t k = 0; k < participants.size(); ++k) {
    const ClientState& client = world.clients[participants[k]];
    std::vector<double> u(global_before.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = global_before.values()[i] - locals[k].values()[i];
    }
    pseudo_updates.push_back(std::move(u));
    update_views.push_back({client.id, client.role, {}});
  }
  for (std::size_t k = 0; k < pseudo_updates.size(); ++k) {
    update_views[k].values = pseudo_updates[k];
  }
  std::vector<double> g_global(global_before.size());
  for (std::size_t i = 0; i < g_global.size(); ++i) {
    g_global[i] = global_before.values()[i] - aggregated.values()[i];
  }
  const AngleStats angles = gradient_angle_stats(g_global, update_views);

  global.from_params(aggregated);

  RoundRecord rec;
  rec.round = round_index;
  rec.stage = stage;
  rec.cos_retain = angles.retain_mean;
  rec.cos_forget = angles.forget_mean;
  rec.payload_bytes = comm_cost_payload(
      RoundKind::learning, global.param_count(), global.segment_size("V"),
      participants.size(), cfg.bytes_per_value);
  rec.flops = flops;
  fill_evaluation(rec, world, global);
  return rec;
}

inline RoundRecord foul_unlearn_round(ExperimentWorld& world,
                                      DisentangledModel& global,
                                      std::uint64_t round_tag,
                                      int round_index) {
  const ExperimentConfig& cfg = world.config;
  const ParamVector theta_v = global.extract_subnet("V");

  std::vector<LocalUpdate> updates;
  std::uint64_t flops = 0;
  for (auto& client : world.clients) {
    LocalUpdate upd = unlearn_local_update(client, theta_v.span(),
                                           cfg.unlearn.epochs,
                                           cfg.unlearn.eta, cfg.unlearn,
                                           round_tag);
    flops += training_flops(client.model, SegmentSet::noncausal_only(),
                            upd.sample_count);
    updates.push_back(std::move(upd));
  }

  std::vector<double> g_fl(theta_v.size(), 0.0);
  for (const auto& u : updates) {
    axpy(1.0 / static_cast<double>(updates.size()),
         u.pseudo_gradient.span(), g_fl);
  }

  std::vector<GradView> retain_views, forget_views;
  std::vector<ClientUpdateView> angle_views;
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const ClientState& client = world.clients[k];
    if (client.role == ClientRole::retain) {
      retain_views.push_back(updates[k].pseudo_gradient.span());
    } else {
      forget_views.push_back(updates[k].pseudo_gradient.span());
    }
    angle_views.push_back(
        {client.id, client.role, updates[k].pseudo_gradient.span()});
  }
  if (retain_views.empty() || forget_views.empty()) {
    throw ConfigError(
        "foul scenario needs at least one retain and one forget client");
  }

  RngStream solver_rng(cfg.seed, 0, round_tag, "solver");
  MatchingSolution sol = optimize_gamma(retain_views, forget_views, g_fl,
                                        cfg.match, solver_rng);
  const MatchingSolution dir = compute_foul_gradient(
      g_fl, sol.g_gamma_retain, sol.g_gamma_forget, cfg.match);

  const std::vector<double> theta_v_next =
      apply_unlearn_update(theta_v.span(), dir.g_foul, cfg.eta_g);
  global.insert_subnet("V", theta_v_next);

  const AngleStats angles = gradient_angle_stats(dir.g_foul, angle_views);

  RoundRecord rec;
  rec.round = round_index;
  rec.stage = Stage::unlearn;
  rec.cos_retain = angles.retain_mean;
  rec.cos_forget = angles.forget_mean;
  rec.j_star = sol.j_star;
  rec.degenerate = dir.degenerate;
  rec.gamma_retain = sol.gamma.retain;
  rec.gamma_forget = sol.gamma.forget;
  rec.payload_bytes = comm_cost_payload(
      RoundKind::unlearning, global.param_count(), global.segment_size("V"),
      world.clients.size(), cfg.bytes_per_value);
  rec.flops = flops;
  fill_evaluation(rec, world, global);
  return rec;
}

}  // namespace detail

/// Runs the configured scenario on an already constructed world.
/// Scenario `foul`: rounds_learn L2U+FedAvg rounds over all clients, then
/// rounds_unlearn on-server matching rounds touching theta_V only.
/// Retrain scenarios continue (or restart after a reset) FedAvg training
/// with the retain clients only.
inline ExperimentResult run_experiment(ExperimentWorld& world) {
  const ExperimentConfig& cfg = world.config;
  ExperimentResult result;
  DisentangledModel global = world.initial_model;

  std::vector<std::size_t> all_clients;
  std::vector<std::size_t> retain_clients;
  for (std::size_t i = 0; i < world.clients.size(); ++i) {
    all_clients.push_back(i);
    if (world.clients[i].role == ClientRole::retain) {
      retain_clients.push_back(i);
    }
  }

  for (int r = 0; r < cfg.rounds_learn; ++r) {
    result.records.push_back(detail::fedavg_round(
        world, global, all_clients, static_cast<std::uint64_t>(r),
        Stage::learn, r));
  }
  // Final broadcast: every client leaves the learning stage with the
  // aggregated model, so later stages only need to sync exchanged segments.
  for (auto& c : world.clients) c.model = global;

  if (cfg.scenario == Scenario::retrain_reset && cfg.rounds_unlearn > 0) {
    RngStream reinit_rng(cfg.seed, "reinit");
    global = DisentangledModel::random_init(world.model_dims(), reinit_rng);
  }

  for (int r = 0; r < cfg.rounds_unlearn; ++r) {
    const auto round_tag = static_cast<std::uint64_t>(cfg.rounds_learn + r);
    const int round_index = cfg.rounds_learn + r;
    if (cfg.scenario == Scenario::foul) {
      result.records.push_back(
          detail::foul_unlearn_round(world, global, round_tag, round_index));
    } else {
      result.records.push_back(detail::fedavg_round(
          world, global, retain_clients, round_tag, Stage::unlearn,
          round_index));
    }
  }

  result.final_model = global;
  return result;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  ExperimentWorld world = setup_world(cfg);
  return run_experiment(world);
}

}  // namespace foul

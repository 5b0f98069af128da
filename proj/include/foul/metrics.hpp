#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "foul/datagen.hpp"
#include "foul/errors.hpp"
#include "foul/losses.hpp"
#include "foul/model.hpp"

namespace foul {

/// Deterministic top-1 prediction (ties resolved to the lowest index).
inline int predict_label(const DisentangledModel& model,
                         std::span<const double> x) {
  const LatentOutputs out = model.forward(x, nullptr, nullptr);
  std::size_t best = 0;
  for (std::size_t k = 1; k < out.logits.size(); ++k) {
    if (out.logits[k] > out.logits[best]) best = k;
  }
  return static_cast<int>(best);
}

inline double dataset_accuracy(const DisentangledModel& model,
                               const LabeledDataset& data) {
  if (data.empty()) throw DataError("dataset_accuracy: empty evaluation set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    hits += (predict_label(model, data.inputs[i]) == data.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

struct ClientEvalView {
  int client_id = 0;
  ClientRole role = ClientRole::retain;
  const LabeledDataset* eval = nullptr;
};

struct AccuracyReport {
  double ra = 0.0;
  double fa = 0.0;
  double ta = 0.0;
  std::map<int, double> per_client;
};

/// RA/FA are means of per-client accuracy on each client's evaluation split
/// (deterministic forward path); TA is accuracy on the held-out test set.
inline AccuracyReport evaluate_accuracy(
    const DisentangledModel& model, const std::vector<ClientEvalView>& clients,
    const LabeledDataset& test_set) {
  AccuracyReport report;
  double retain_sum = 0.0;
  double forget_sum = 0.0;
  int retain_n = 0;
  int forget_n = 0;
  for (const auto& c : clients) {
    if (c.eval == nullptr || c.eval->empty()) {
      throw DataError("evaluate_accuracy: empty client evaluation split");
    }
    const double acc = dataset_accuracy(model, *c.eval);
    report.per_client[c.client_id] = acc;
    if (c.role == ClientRole::retain) {
      retain_sum += acc;
      ++retain_n;
    } else {
      forget_sum += acc;
      ++forget_n;
    }
  }
  report.ra = retain_n > 0 ? retain_sum / retain_n : 0.0;
  report.fa = forget_n > 0 ? forget_sum / forget_n : 0.0;
  report.ta = dataset_accuracy(model, test_set);
  return report;
}

/// Per-sample softmax cross-entropy under the deterministic forward path.
inline double sample_classification_loss(const DisentangledModel& model,
                                         std::span<const double> x, int y) {
  const LatentOutputs out = model.forward(x, nullptr, nullptr);
  const double max_l =
      *std::max_element(out.logits.begin(), out.logits.end());
  double denom = 0.0;
  for (const double l : out.logits) denom += std::exp(l - max_l);
  return std::log(denom) + max_l - out.logits[static_cast<std::size_t>(y)];
}

struct MiaReport {
  double attack_accuracy = 0.5;
  double threshold = 0.0;
  bool member_below = true;  // chosen direction: member iff loss < threshold
  double member_mean_loss = 0.0;
  double nonmember_mean_loss = 0.0;
  std::size_t member_count = 0;
  std::size_t nonmember_count = 0;
};

/// Loss-threshold membership inference: sweeps every midpoint between
/// consecutive distinct loss values (plus both extremes), in both
/// directions, and reports the best balanced accuracy.
inline MiaReport mia_from_losses(std::vector<double> member_losses,
                                 std::vector<double> nonmember_losses) {
  if (member_losses.empty() || nonmember_losses.empty()) {
    throw DataError("mia_from_losses: both pools must be non-empty");
  }
  MiaReport report;
  report.member_count = member_losses.size();
  report.nonmember_count = nonmember_losses.size();
  for (const double l : member_losses) report.member_mean_loss += l;
  report.member_mean_loss /= static_cast<double>(member_losses.size());
  for (const double l : nonmember_losses) report.nonmember_mean_loss += l;
  report.nonmember_mean_loss /= static_cast<double>(nonmember_losses.size());

  std::sort(member_losses.begin(), member_losses.end());
  std::sort(nonmember_losses.begin(), nonmember_losses.end());

  std::vector<double> all;
  all.reserve(member_losses.size() + nonmember_losses.size());
  all.insert(all.end(), member_losses.begin(), member_losses.end());
  all.insert(all.end(), nonmember_losses.begin(), nonmember_losses.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  }
  thresholds.push_back(all.back() + 1.0);

  report.attack_accuracy = -1.0;
  const double m = static_cast<double>(member_losses.size());
  const double n = static_cast<double>(nonmember_losses.size());
  for (const double t : thresholds) {
    const double members_below = static_cast<double>(
        std::lower_bound(member_losses.begin(), member_losses.end(), t) -
        member_losses.begin());
    const double nonmembers_below = static_cast<double>(
        std::lower_bound(nonmember_losses.begin(), nonmember_losses.end(),
                         t) -
        nonmember_losses.begin());
    const double ba_below = 0.5 * (members_below / m + (n - nonmembers_below) / n);
    for (const bool below : {true, false}) {
      const double ba = below ? ba_below : 1.0 - ba_below;
      if (ba > report.attack_accuracy) {
        report.attack_accuracy = ba;
        report.threshold = t;
        report.member_below = below;
      }
    }
  }
  return report;
}

inline MiaReport mia_loss_threshold(const DisentangledModel& model,
                                    const LabeledDataset& members,
                                    const LabeledDataset& nonmembers) {
  if (members.empty() || nonmembers.empty()) {
    throw DataError("mia_loss_threshold: both pools must be non-empty");
  }
  std::vector<double> ml;
  ml.reserve(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    ml.push_back(
        sample_classification_loss(model, members.inputs[i], members.labels[i]));
  }
  std::vector<double> nl;
  nl.reserve(nonmembers.size());
  for (std::size_t i = 0; i < nonmembers.size(); ++i) {
    nl.push_back(sample_classification_loss(model, nonmembers.inputs[i],
                                            nonmembers.labels[i]));
  }
  return mia_from_losses(std::move(ml), std::move(nl));
}

struct T2FReport {
  std::vector<double> fa_series;
  std::size_t r_star = 0;
  double t2f = 0.0;
};

/// Average forget-accuracy reduction per round until the series minimum is
/// first reached.
inline T2FReport time_to_forget(std::span<const double> fa_series) {
  if (fa_series.empty()) throw DataError("time_to_forget: empty series");
  T2FReport report;
  report.fa_series.assign(fa_series.begin(), fa_series.end());
  std::size_t r_star = 0;
  for (std::size_t r = 1; r < fa_series.size(); ++r) {
    if (fa_series[r] < fa_series[r_star]) r_star = r;
  }
  report.r_star = r_star;
  report.t2f = r_star == 0 ? 0.0
                           : (fa_series[0] - fa_series[r_star]) /
                                 static_cast<double>(r_star);
  return report;
}

enum class RoundKind { learning, unlearning };

/// Per-round communication payload in bytes: every participant both
/// downloads and uploads the exchanged segment.
inline std::uint64_t comm_cost_payload(RoundKind kind,
                                       std::size_t full_params,
                                       std::size_t noncausal_params,
                                       std::size_t clients,
                                       std::size_t bytes_per_value) {
  const std::size_t per_client =
      kind == RoundKind::learning ? full_params : noncausal_params;
  return static_cast<std::uint64_t>(clients) * per_client * bytes_per_value *
         2;
}

/// 2*in*out multiply-accumulates forward, 4*in*out backward.
inline std::uint64_t flops_dense(std::size_t in, std::size_t out,
                                 bool with_backward) {
  const std::uint64_t fwd = 2ULL * in * out;
  return with_backward ? fwd + 4ULL * in * out : fwd;
}

/// FLOPs for processing `samples` training samples with the given trainable
/// segments; only trainable segments' layers are counted.
inline std::uint64_t training_flops(const DisentangledModel& model,
                                    const SegmentSet& trainable,
                                    std::uint64_t samples) {
  const bool sel[5] = {trainable.extractor, trainable.causal,
                       trainable.noncausal, trainable.decoder,
                       trainable.classifier};
  std::uint64_t per_sample = 0;
  for (std::size_t s = 0; s < 5; ++s) {
    if (!sel[s]) continue;
    for (const auto& layer :
         model.stack(DisentangledModel::kSegmentNames[s])) {
      per_sample += flops_dense(layer.in_size, layer.out_size, true);
    }
  }
  return per_sample * samples;
}

/// Running totals; cumulative fields are exact sums of the added rounds.
struct CostLedger {
  std::uint64_t cumulative_payload_bytes = 0;
  std::uint64_t cumulative_flops = 0;

  void add_round(std::uint64_t payload_bytes, std::uint64_t flops) {
    cumulative_payload_bytes += payload_bytes;
    cumulative_flops += flops;
  }
};

}  // namespace foul

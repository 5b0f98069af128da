#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "foul/datagen.hpp"
#include "foul/dataset_io.hpp"
#include "foul/dense.hpp"
#include "foul/losses.hpp"
#include "foul/rng.hpp"

namespace foul {
namespace {

GeneratorSpec spec_with(double causal_noise, std::vector<double> rhos,
                        double spurious_noise = 0.5) {
  return make_generator_spec(4, 4, 4, 3.0, causal_noise, 3.0, spurious_noise,
                             rhos, 2.0);
}

TEST(GenerateDomain, ZeroNoiseCausalBlockEqualsClassMean) {
  const GeneratorSpec spec = spec_with(0.0, {0.0});
  RngStream rng(1, 0, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[0], 200, rng);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& mu =
        spec.class_causal_means[static_cast<std::size_t>(ds.labels[i])];
    for (std::size_t j = 0; j < spec.causal_dim; ++j) {
      EXPECT_DOUBLE_EQ(ds.inputs[i][j], mu[j]);
    }
  }
}

TEST(GenerateDomain, DeterministicUnderTheStream) {
  const GeneratorSpec spec = spec_with(0.5, {0.9, -0.9});
  RngStream a(7, 1, 0, "datagen");
  RngStream b(7, 1, 0, "datagen");
  const LabeledDataset da = generate_domain(spec, spec.domains[1], 300, a);
  const LabeledDataset db = generate_domain(spec, spec.domains[1], 300, b);
  ASSERT_EQ(da.size(), db.size());
  EXPECT_EQ(da.labels, db.labels);
  EXPECT_EQ(da.inputs, db.inputs);
}

TEST(GenerateDomain, EmptyRequestIsAnError) {
  const GeneratorSpec spec = spec_with(0.5, {0.0});
  RngStream rng(1, 0, 0, "datagen");
  EXPECT_THROW(generate_domain(spec, spec.domains[0], 0, rng), DataError);
}

// Multinomial logistic probe trained on one block of the features; used as
// the oracle for how much label information a block carries.
double probe_accuracy(const LabeledDataset& train, const LabeledDataset& eval,
                      std::size_t begin, std::size_t len) {
  DenseLayer probe(len, static_cast<std::size_t>(train.num_classes),
                   Activation::identity);
  const auto block = [&](const LabeledDataset& ds, std::size_t i) {
    return std::vector<double>(
        ds.inputs[i].begin() + static_cast<std::ptrdiff_t>(begin),
        ds.inputs[i].begin() + static_cast<std::ptrdiff_t>(begin + len));
  };
  for (int step = 0; step < 300; ++step) {
    std::vector<std::vector<double>> logits;
    logits.reserve(train.size());
    std::vector<DenseCache> caches(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      logits.push_back(dense_forward(probe, block(train, i), &caches[i]));
    }
    const BatchLossGrad g = loss_classification(logits, train.labels);
    std::vector<double> gw(probe.weights.size(), 0.0);
    std::vector<double> gb(probe.bias.size(), 0.0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const DenseGrads gi = dense_backward(probe, caches[i], g.grads[i]);
      for (std::size_t k = 0; k < gw.size(); ++k) gw[k] += gi.weights[k];
      for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += gi.bias[k];
    }
    for (std::size_t k = 0; k < gw.size(); ++k) probe.weights[k] -= 0.5 * gw[k];
    for (std::size_t k = 0; k < gb.size(); ++k) probe.bias[k] -= 0.5 * gb[k];
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const auto logits = dense_forward(probe, block(eval, i));
    const std::size_t pred = static_cast<std::size_t>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    hits += (static_cast<int>(pred) == eval.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(eval.size());
}

TEST(GenerateDomain, UncorrelatedSpuriousBlockCarriesNoLabelInformation) {
  const GeneratorSpec spec = spec_with(0.5, {0.0});
  RngStream rng(11, 0, 0, "datagen");
  const LabeledDataset train = generate_domain(spec, spec.domains[0], 2000, rng);
  const LabeledDataset eval = generate_domain(spec, spec.domains[0], 2000, rng);
  const double acc =
      probe_accuracy(train, eval, spec.causal_dim, spec.spurious_dim);
  EXPECT_NEAR(acc, 0.25, 0.05);
}

TEST(GenerateDomain, SmallCausalNoiseIsNearestMeanSeparable) {
  // sigma_c at 0.1 of the minimum inter-mean distance
  const double min_dist = 3.0 * std::sqrt(2.0);
  const GeneratorSpec spec = spec_with(0.1 * min_dist, {0.9});
  RngStream rng(13, 0, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[0], 2000, rng);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double best = 1e100;
    int arg = -1;
    for (int c = 0; c < spec.num_classes; ++c) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < spec.causal_dim; ++j) {
        const double d =
            ds.inputs[i][j] -
            spec.class_causal_means[static_cast<std::size_t>(c)][j];
        d2 += d * d;
      }
      if (d2 < best) {
        best = d2;
        arg = c;
      }
    }
    hits += (arg == ds.labels[i]) ? 1 : 0;
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(ds.size()), 0.99);
}

std::vector<LabeledDataset> two_domain_pools(std::size_t n0, std::size_t n1) {
  const GeneratorSpec spec = spec_with(0.5, {0.9, -0.9});
  std::vector<LabeledDataset> pools;
  RngStream r0(3, 0, 0, "datagen");
  pools.push_back(generate_domain(spec, spec.domains[0], n0, r0));
  RngStream r1(3, 1, 0, "datagen");
  pools.push_back(generate_domain(spec, spec.domains[1], n1, r1));
  return pools;
}

TEST(PartitionClients, EvenSplitIsDisjoint) {
  const GeneratorSpec spec = spec_with(0.5, {0.9});
  RngStream rng(5, 0, 0, "datagen");
  std::vector<LabeledDataset> pools{
      generate_domain(spec, spec.domains[0], 100, rng)};
  const ClientPartition part = partition_clients(pools, 2);
  ASSERT_EQ(part.clients.size(), 2u);
  EXPECT_EQ(part.clients[0].shard.size(), 50u);
  EXPECT_EQ(part.clients[1].shard.size(), 50u);
  for (const auto& a : part.clients[0].shard.inputs) {
    for (const auto& b : part.clients[1].shard.inputs) {
      EXPECT_NE(a, b);
    }
  }
}

TEST(PartitionClients, RemainderGoesToEarliestClients) {
  const GeneratorSpec spec = spec_with(0.5, {0.9});
  RngStream rng(5, 0, 0, "datagen");
  std::vector<LabeledDataset> pools{
      generate_domain(spec, spec.domains[0], 101, rng)};
  const ClientPartition part = partition_clients(pools, 2);
  EXPECT_EQ(part.clients[0].shard.size(), 51u);
  EXPECT_EQ(part.clients[1].shard.size(), 50u);
}

TEST(PartitionClients, DomainIdsFollowClients) {
  auto pools = two_domain_pools(40, 40);
  // append two more domains by relabeling copies
  const ClientPartition part = partition_clients(pools, 2);
  ASSERT_EQ(part.clients.size(), 4u);
  EXPECT_EQ(part.clients[0].domain_id, 0);
  EXPECT_EQ(part.clients[1].domain_id, 0);
  EXPECT_EQ(part.clients[2].domain_id, 1);
  EXPECT_EQ(part.clients[3].domain_id, 1);
}

TEST(PartitionClients, ShardsUnionToFullDatasetAsMultisets) {
  auto pools = two_domain_pools(53, 47);
  const ClientPartition part = partition_clients(pools, 3);
  std::multiset<std::vector<double>> original, sharded;
  for (const auto& pool : pools) {
    for (const auto& x : pool.inputs) original.insert(x);
  }
  std::size_t total = 0;
  for (const auto& c : part.clients) {
    for (const auto& x : c.shard.inputs) sharded.insert(x);
    total += c.shard.size();
  }
  EXPECT_EQ(total, 100u);
  EXPECT_EQ(original, sharded);
}

TEST(PartitionClients, FewerSamplesThanClientsIsAnError) {
  auto pools = two_domain_pools(2, 40);
  EXPECT_THROW(partition_clients(pools, 3), DataError);
}

TEST(SplitRetainForget, MarksExactlyTheForgetDomain) {
  const GeneratorSpec spec = spec_with(0.5, {0.9, 0.8, 0.7, -0.9});
  std::vector<LabeledDataset> pools;
  for (std::size_t d = 0; d < 4; ++d) {
    RngStream rng(9, d, 0, "datagen");
    pools.push_back(generate_domain(spec, spec.domains[d], 40, rng));
  }
  const ClientPartition part =
      split_retain_forget(partition_clients(pools, 2), 0);
  int forget = 0, retain = 0;
  for (const auto& c : part.clients) {
    if (c.role == ClientRole::forget) {
      ++forget;
      EXPECT_EQ(c.domain_id, 0);
    } else {
      ++retain;
    }
  }
  EXPECT_EQ(forget, 2);
  EXPECT_EQ(retain, 6);

  // Re-running with a different forget domain swaps roles consistently;
  // the role is a function of domain_id only.
  const ClientPartition swapped = split_retain_forget(part, 2);
  for (const auto& c : swapped.clients) {
    EXPECT_EQ(c.role == ClientRole::forget, c.domain_id == 2);
  }
}

TEST(SplitRetainForget, UnknownDomainIsAnError) {
  auto pools = two_domain_pools(40, 40);
  const ClientPartition part = partition_clients(pools, 2);
  EXPECT_THROW(split_retain_forget(part, 17), LookupError);
}

TEST(TrainValSplit, NinetyTenWithFloor) {
  const GeneratorSpec spec = spec_with(0.5, {0.9});
  RngStream rng(21, 0, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[0], 100, rng);
  RngStream split_rng(21, 0, 0, "split");
  const auto [train, val] = train_val_split(ds, split_rng);
  EXPECT_EQ(train.size(), 90u);
  EXPECT_EQ(val.size(), 10u);
}

TEST(TrainValSplit, MinimumSizeGivesNineOne) {
  const GeneratorSpec spec = spec_with(0.5, {0.9});
  RngStream rng(22, 0, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[0], 10, rng);
  RngStream split_rng(22, 0, 0, "split");
  const auto [train, val] = train_val_split(ds, split_rng);
  EXPECT_EQ(train.size(), 9u);
  EXPECT_EQ(val.size(), 1u);
}

TEST(TrainValSplit, TooSmallIsAnError) {
  const GeneratorSpec spec = spec_with(0.5, {0.9});
  RngStream rng(23, 0, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[0], 9, rng);
  RngStream split_rng(23, 0, 0, "split");
  EXPECT_THROW(train_val_split(ds, split_rng), DataError);
}

TEST(TrainValSplit, UnionIsOriginalMultisetAndDisjoint) {
  const GeneratorSpec spec = spec_with(0.5, {0.9});
  RngStream rng(24, 0, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[0], 73, rng);
  RngStream split_rng(24, 0, 0, "split");
  const auto [train, val] = train_val_split(ds, split_rng);
  EXPECT_EQ(train.size() + val.size(), ds.size());
  std::multiset<std::vector<double>> original(ds.inputs.begin(),
                                              ds.inputs.end());
  std::multiset<std::vector<double>> merged(train.inputs.begin(),
                                            train.inputs.end());
  merged.insert(val.inputs.begin(), val.inputs.end());
  EXPECT_EQ(original, merged);
  for (const auto& a : train.inputs) {
    for (const auto& b : val.inputs) EXPECT_NE(a, b);
  }
}

TEST(DatasetIo, RoundTripsExactly) {
  const GeneratorSpec spec = spec_with(0.5, {0.9, -0.9});
  RngStream rng(31, 1, 0, "datagen");
  const LabeledDataset ds = generate_domain(spec, spec.domains[1], 25, rng);
  std::stringstream buffer;
  write_dataset(ds, buffer, 1);
  const LabeledDataset back = read_dataset(buffer);
  EXPECT_EQ(back.feature_dim, ds.feature_dim);
  EXPECT_EQ(back.num_classes, ds.num_classes);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.inputs, ds.inputs);
  EXPECT_EQ(back.domain_ids, ds.domain_ids);
}

TEST(DatasetIo, RejectsMixedDomains) {
  LabeledDataset ds;
  ds.feature_dim = 2;
  ds.num_classes = 2;
  ds.append({0.0, 1.0}, 0, 0);
  ds.append({1.0, 0.0}, 1, 1);
  std::stringstream buffer;
  EXPECT_THROW(write_dataset(ds, buffer, 0), DataError);
}

}  // namespace
}  // namespace foul

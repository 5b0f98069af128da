// foul-sim command line: run unlearning scenarios, export synthetic
// datasets, and compare metric logs.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "foul/foul.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct LogSummary {
  double ra = std::nan("");
  double fa = std::nan("");
  double ta = std::nan("");
  double mia = std::nan("");
  double t2f = 0.0;
  std::uint64_t payload = 0;
  std::uint64_t flops = 0;
};

// Forget-accuracy series over the unlearning stage, seeded with the last
// learning-stage value when present.
std::vector<double> unlearn_fa_series(
    const std::vector<foul::RoundRecord>& records) {
  std::vector<double> series;
  double last_learn_fa = std::nan("");
  for (const auto& r : records) {
    if (r.stage == foul::Stage::learn) {
      last_learn_fa = r.fa;
    } else {
      if (series.empty() && !std::isnan(last_learn_fa)) {
        series.push_back(last_learn_fa);
      }
      series.push_back(r.fa);
    }
  }
  return series;
}

LogSummary summarize(const std::vector<foul::RoundRecord>& records) {
  LogSummary s;
  for (const auto& r : records) {
    s.ra = r.ra;
    s.fa = r.fa;
    s.ta = r.ta;
    s.mia = r.mia;
    s.payload += r.payload_bytes;
    s.flops += r.flops;
  }
  const std::vector<double> series = unlearn_fa_series(records);
  if (series.size() >= 2) {
    s.t2f = foul::time_to_forget(series).t2f;
  }
  return s;
}

void print_comparison(const std::string& name_a, const LogSummary& a,
                      const std::string& name_b, const LogSummary& b) {
  const auto row = [](const char* label, double va, double vb) {
    std::printf("%-14s %12.6g %12.6g %12.6g\n", label, va, vb, vb - va);
  };
  std::printf("%-14s %12s %12s %12s\n", "metric", "A", "B", "B-A");
  row("final_ra", a.ra, b.ra);
  row("final_fa", a.fa, b.fa);
  row("final_ta", a.ta, b.ta);
  row("final_mia", a.mia, b.mia);
  row("t2f", a.t2f, b.t2f);
  std::printf("%-14s %12llu %12llu %12lld\n", "payload_bytes",
              static_cast<unsigned long long>(a.payload),
              static_cast<unsigned long long>(b.payload),
              static_cast<long long>(b.payload) -
                  static_cast<long long>(a.payload));
  std::printf("%-14s %12llu %12llu %12lld\n", "flops",
              static_cast<unsigned long long>(a.flops),
              static_cast<unsigned long long>(b.flops),
              static_cast<long long>(b.flops) -
                  static_cast<long long>(a.flops));
  std::printf("(A = %s, B = %s)\n", name_a.c_str(), name_b.c_str());
}

int run_command(const std::string& config_path,
                const std::optional<std::string>& scenario,
                const std::optional<std::uint64_t>& seed,
                const std::optional<std::string>& out,
                const std::optional<std::string>& format,
                const std::optional<std::string>& save_model_path) {
  foul::ExperimentConfig cfg = config_path.empty()
                                   ? foul::ExperimentConfig{}
                                   : foul::load_config(config_path);
  if (scenario) cfg.scenario = foul::parse_scenario(*scenario);
  if (seed) cfg.seed = *seed;
  if (out) cfg.out_path = *out;
  if (format) cfg.format = foul::parse_metric_format(*format);
  cfg.validate();

  const foul::ExperimentResult result = foul::run_experiment(cfg);
  foul::emit_metrics(result.records, cfg.out_path, cfg.format);
  if (save_model_path) {
    foul::save_model(result.final_model, *save_model_path);
  }

  if (!result.records.empty()) {
    const foul::RoundRecord& last = result.records.back();
    std::printf("scenario=%s rounds=%zu final: ra=%s fa=%s ta=%s mia=%s\n",
                foul::to_string(cfg.scenario), result.records.size(),
                foul::format_g6(last.ra).c_str(),
                foul::format_g6(last.fa).c_str(),
                foul::format_g6(last.ta).c_str(),
                foul::format_g6(last.mia).c_str());
  }
  std::printf("metrics written to %s\n", cfg.out_path.c_str());
  return 0;
}

int gen_data_command(const std::string& config_path,
                     const std::string& out_dir) {
  const foul::ExperimentConfig cfg = config_path.empty()
                                         ? foul::ExperimentConfig{}
                                         : foul::load_config(config_path);
  std::filesystem::create_directories(out_dir);
  const foul::GeneratorSpec spec = foul::make_generator_spec(
      cfg.num_classes, cfg.causal_dim, cfg.spurious_dim, cfg.causal_margin,
      cfg.causal_noise, cfg.spurious_margin, cfg.spurious_noise,
      cfg.domain_rhos, cfg.domain_mean_scale);
  // Same streams as the simulator setup, so exported files match what a
  // run with this config trains on.
  for (std::size_t d = 0; d < cfg.num_domains(); ++d) {
    foul::RngStream train_rng(cfg.seed, d, 0, "datagen");
    const foul::LabeledDataset train = foul::generate_domain(
        spec, spec.domains[d],
        cfg.clients_per_domain * cfg.samples_per_client, train_rng);
    foul::RngStream test_rng(cfg.seed, d, 0, "testgen");
    const foul::LabeledDataset test = foul::generate_domain(
        spec, spec.domains[d], cfg.test_samples_per_domain, test_rng);
    const int id = static_cast<int>(d);
    foul::save_dataset(train,
                       out_dir + "/domain_" + std::to_string(d) + "_train.txt",
                       id);
    foul::save_dataset(test,
                       out_dir + "/domain_" + std::to_string(d) + "_test.txt",
                       id);
  }
  std::printf("wrote %zu domain datasets to %s\n", cfg.num_domains(),
              out_dir.c_str());
  return 0;
}

int compare_command(const std::string& path_a, const std::string& path_b) {
  const auto a = foul::read_metrics(path_a);
  const auto b = foul::read_metrics(path_b);
  if (a.empty() || b.empty()) {
    throw foul::IoError("compare: empty metric log");
  }
  print_comparison(path_a, summarize(a), path_b, summarize(b));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"foul-sim: two-stage federated unlearning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> scenario, out, format, save_model_path;
  std::optional<std::uint64_t> seed;

  CLI::App* run = app.add_subcommand("run", "run a scenario and emit metrics");
  run->add_option("--config", config_path, "key=value config file");
  run->add_option("--scenario", scenario,
                  "foul | retrain_reset | retrain_noreset");
  run->add_option("--seed", seed, "experiment seed");
  run->add_option("--out", out, "metrics output path");
  run->add_option("--format", format, "csv | jsonl");
  run->add_option("--save-model", save_model_path,
                  "write the final model checkpoint here");

  std::string gen_config, gen_out = "data";
  CLI::App* gen = app.add_subcommand("gen-data", "export synthetic datasets");
  gen->add_option("--config", gen_config, "key=value config file");
  gen->add_option("--out", gen_out, "output directory");

  std::string cmp_a, cmp_b;
  CLI::App* cmp =
      app.add_subcommand("compare", "delta summary of two metric logs");
  cmp->add_option("a", cmp_a, "first metric log")->required();
  cmp->add_option("b", cmp_b, "second metric log")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      return run_command(config_path, scenario, seed, out, format,
                         save_model_path);
    }
    if (gen->parsed()) {
      return gen_data_command(gen_config, gen_out);
    }
    if (cmp->parsed()) {
      return compare_command(cmp_a, cmp_b);
    }
  } catch (const foul::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const foul::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const foul::Error& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumeric;
  }
  return 0;
}

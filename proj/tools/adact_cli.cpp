#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "adact/checkpoint.hpp"
#include "adact/experiment.hpp"
#include "adact/gradcheck.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadConfig = 2, kDiverged = 3 };

int cmd_train(const std::string& config_path, const std::string& out, std::optional<std::uint64_t> seed,
              std::optional<adact::Index> epochs) {
  auto cfg = adact::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (epochs) {
    if (*epochs < 1) throw adact::ConfigError({"epochs: must be >= 1"});
    cfg.epochs = *epochs;
    if (!cfg.optimizer.schedule.empty() && cfg.optimizer.total_epochs() < cfg.epochs)
      throw adact::ConfigError({"optimizer.schedule: shorter than the --epochs override"});
  }
  const fs::path dir = !out.empty() ? fs::path(out) : !cfg.output.empty() ? fs::path(cfg.output) : fs::path("runs") / cfg.name;
  spdlog::info("training {} for {} epochs into {}", cfg.name, cfg.epochs, dir.string());
  const auto result = adact::run_experiment(cfg, dir);
  std::printf("%s final_acc=%s area=%s\n", cfg.name.c_str(), adact::format_number(result.final_accuracy).c_str(),
              adact::format_number(result.area).c_str());
  return kOk;
}

int cmd_gradcheck(const adact::GradcheckOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<adact::GradcheckLine> lines = adact::gradcheck_activations(opts);
  const auto loss = adact::gradcheck_loss(opts);
  lines.insert(lines.end(), loss.begin(), loss.end());
  const auto nets = adact::gradcheck_networks(opts);
  lines.insert(lines.end(), nets.begin(), nets.end());

  std::map<std::string, double> per_module;
  std::printf("%-18s %-24s %14s %8s %12s\n", "module", "subject", "max_rel_err", "samples", "coordinates");
  for (const auto& l : lines) {
    std::printf("%-18s %-24s %14.3e %8td %12td\n", l.module.c_str(), l.subject.c_str(), l.max_relative_error, l.samples,
                l.coordinates);
    per_module[l.module] = std::max(per_module[l.module], l.max_relative_error);
  }
  std::printf("\n");
  bool ok = true;
  for (const auto& [module, err] : per_module) {
    const double limit = module == "activation-core" ? 1e-5 : 1e-4;
    ok = ok && err < limit;
    std::printf("%-18s max relative error %.3e (limit %.0e) %s\n", module.c_str(), err, limit,
                err < limit ? "ok" : "FAIL");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("elapsed %.1fs\n", secs);
  return ok ? kOk : kFailure;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& metric_name) {
  const auto metric = adact::parse_compare_metric(metric_name);
  if (!metric) throw adact::ArgumentError("unknown metric '" + metric_name + "' (area, final_acc)");
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  std::fputs(adact::format_compare_table(adact::compare(paths, *metric), *metric).c_str(), stdout);
  return kOk;
}

int cmd_shapes(const std::string& checkpoint, const std::string& csv_path) {
  const auto ck = adact::load_checkpoint(checkpoint);
  const auto traces = adact::activation_shape_trace(ck.model, adact::default_shape_grid());
  const auto csv = adact::shapes_csv(traces);
  if (csv_path.empty()) {
    std::fputs(csv.c_str(), stdout);
    return kOk;
  }
  std::ofstream(csv_path, std::ios::binary) << csv;
  if (traces.empty()) {
    std::printf("no activation layers with learnable parameters\n");
    return kOk;
  }
  for (const auto& t : traces) {
    std::printf("layer %td %s params", t.site, t.kind.name().c_str());
    for (double p : t.params) std::printf(" %.6g", p);
    std::printf("\n");
  }
  double widest = 0.0;
  for (std::size_t i = 0; i < traces.size(); ++i)
    for (std::size_t j = i + 1; j < traces.size(); ++j) {
      const double gap = adact::max_trace_gap(traces[i], traces[j]);
      widest = std::max(widest, gap);
      std::printf("gap layer %td vs %td: %.6g\n", traces[i].site, traces[j].site, gap);
    }
  std::printf("max pairwise gap %.6g\n", widest);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive activation experiments"};
  app.require_subcommand(1);

  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::optional<adact::Index> epochs;
  auto* train = app.add_subcommand("train", "run one experiment config");
  train->add_option("--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory");
  train->add_option("--seed", seed, "override the config seed");
  train->add_option("--epochs", epochs, "override the epoch count");

  adact::GradcheckOptions gopts;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient suites");
  grad->add_option("--seed", gopts.seed, "base seed");
  grad->add_option("--configs", gopts.network_configs, "network configurations");
  grad->add_option("--points", gopts.points_per_kind, "points per activation kind");

  std::vector<std::string> runs;
  std::string metric = "area";
  auto* cmp = app.add_subcommand("compare", "rank completed runs");
  cmp->add_option("runs", runs, "run directories")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--metric", metric, "area or final_acc");

  std::string checkpoint, csv;
  auto* shapes = app.add_subcommand("shapes", "activation traces from a checkpoint");
  shapes->add_option("--checkpoint", checkpoint, "checkpoint.json of a run")->required()->check(CLI::ExistingFile);
  shapes->add_option("--csv", csv, "write the traces here and print pairwise gaps");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, out, seed, epochs);
    if (*grad) return cmd_gradcheck(gopts);
    if (*cmp) return cmd_compare(runs, metric);
    if (*shapes) return cmd_shapes(checkpoint, csv);
  } catch (const adact::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kBadConfig;
  } catch (const adact::TrainingError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kOk;
}

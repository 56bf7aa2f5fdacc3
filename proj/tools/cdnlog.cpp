// cdnlog: command-line front end. Stdout carries a JSON summary; diagnostics
// go to stderr. Exit codes: 0 success, 1 input error, 2 config error.

#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cdnlog/config.hpp"
#include "cdnlog/errors.hpp"
#include "cdnlog/pipeline.hpp"

namespace {

struct Args {
  std::vector<std::string> inputs;
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool plot_data = false;
  bool sort = false;
  std::size_t warmup = 0;
  bool check_invariants = false;
  std::string cache;
};

cdnlog::PathList paths(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

cdnlog::RunConfig load(const Args& a) {
  cdnlog::RunConfig cfg = a.config.empty() ? cdnlog::RunConfig{} : cdnlog::load_config(a.config);
  if (a.seed) cfg.workload.seed = *a.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CDN access-log analytics and cache hierarchy simulation"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* sub, bool takes_inputs) {
    if (takes_inputs) sub->add_option("inputs", a.inputs, "Input files (.gz accepted)")->required();
    sub->add_option("--config", a.config, "JSON config file");
    sub->add_option("--out", a.out, "Output directory")->capture_default_str();
    sub->add_option("--seed", a.seed, "Seed for all randomness");
    sub->add_option("--threads", a.threads, "Worker threads")->check(CLI::Range(1u, 1024u))->capture_default_str();
  };

  auto* clean = app.add_subcommand("clean", "Parse and validate raw logs; write canonical lines and stats");
  common(clean, true);
  auto* classify = app.add_subcommand("classify", "Label records with service and packaging class");
  common(classify, true);
  auto* enrich = app.add_subcommand("enrich", "Join labeled records with ISP and location");
  common(enrich, true);
  enrich->add_option("--cache", a.cache, "Geo cache file (overrides geo.cache)");
  auto* report = app.add_subcommand("report", "Compute hit rates, latency, time series, MIME and size reports");
  common(report, true);
  report->add_flag("--plot-data", a.plot_data, "Also write per-figure CSVs under plot/");
  auto* simulate = app.add_subcommand("simulate", "Replay events through the edge/regional cache hierarchy");
  common(simulate, true);
  simulate->add_flag("--sort", a.sort, "Order events by time instead of rejecting out-of-order input");
  simulate->add_option("--warmup", a.warmup, "Leading events left out of the summary");
  simulate->add_flag("--check-invariants", a.check_invariants, "Verify cache capacity after every event");
  auto* generate = app.add_subcommand("generate", "Write a synthetic event trace and its ground-truth ledger");
  common(generate, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    cdnlog::CommonOptions opts{a.threads};
    const auto inputs = paths(a.inputs);
    std::string summary;
    if (*clean) {
      summary = cdnlog::cmd_clean(inputs, a.out, opts);
    } else if (*classify) {
      summary = cdnlog::cmd_classify(inputs, load(a).patterns, a.out, opts);
    } else if (*enrich) {
      summary = cdnlog::cmd_enrich(inputs, load(a).geo, a.cache, a.out, opts);
    } else if (*report) {
      summary = cdnlog::cmd_report(inputs, load(a), {a.plot_data}, a.out, opts);
    } else if (*simulate) {
      summary = cdnlog::cmd_simulate(inputs, load(a), {a.sort, a.warmup, a.check_invariants}, a.out, opts);
    } else if (*generate) {
      summary = cdnlog::cmd_generate(load(a).workload, a.out);
    }
    std::cout << summary << "\n";
    return 0;
  } catch (const cdnlog::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cdnlog::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

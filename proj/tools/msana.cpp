// Command-line driver: `run` evaluates one method and writes reports,
// `compare` evaluates several methods on the same stream.

#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "msana/msana.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

msana::PipelineConfig resolve(const Common& o) {
  auto c = msana::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) {
    if (*o.threads == 0) throw msana::ConfigError("--threads must be >= 1", "threads");
    c.threads = *o.threads;
  }
  return c;
}

void print_warnings(const msana::Warnings& w) {
  for (const auto& [k, n] : w.all()) std::cerr << "warning: " << k << " x" << n << "\n";
}

int cmd_run(const Common& o, const std::string& out_dir) {
  const auto c = resolve(o);
  if (!msana::is_known_method(c.method)) {
    if (msana::is_out_of_scope_method(c.method))
      throw msana::ConfigError("method '" + c.method + "': not implemented (out of scope baseline)", "method");
    throw msana::ConfigError("unknown method '" + c.method + "'", "method");
  }
  const auto stream = msana::load_stream(c);
  msana::WorkerPool pool(c.threads);
  const auto r = msana::run_method(c.method, c, stream, &pool);
  const auto doc = msana::write_run_outputs(out_dir, r, c);
  print_warnings(r.warnings);
  if (r.result.fault) {
    std::cerr << "error: pipeline fault after " << r.result.counts.total() << " samples: " << *r.result.fault
              << " (partial results written to " << out_dir << ")\n";
    return kExitInternal;
  }
  std::cout << c.method << ": accuracy " << r.metrics.accuracy << ", f1 " << r.metrics.f1 << ", final-window accuracy "
            << doc["final_window"]["accuracy"].get<double>() << ", drifts " << doc["event_counts"]["drift"] << ", "
            << r.qos.mean_latency_ms << " ms/sample\n"
            << "determinism hash " << doc["determinism_hash"].get<std::string>() << "\n";
  return kExitOk;
}

int cmd_compare(const Common& o, const std::string& methods_arg, const std::string& out_dir) {
  const auto c = resolve(o);
  const auto methods = msana::split_list(methods_arg);
  if (methods.empty()) throw msana::ConfigError("--methods is empty", "methods");
  for (const auto& m : methods) {
    if (msana::is_out_of_scope_method(m))
      throw msana::ConfigError("method '" + m + "': not implemented (out of scope baseline)", "methods");
    if (!msana::is_known_method(m)) throw msana::ConfigError("unknown method '" + m + "'", "methods");
  }
  const auto stream = msana::load_stream(c);
  msana::WorkerPool pool(c.threads);
  std::vector<msana::CompareRow> rows;
  for (const auto& m : methods) {
    const auto r = msana::run_method(m, c, stream, &pool);
    if (r.result.fault) {
      std::cerr << "error: " << m << " faulted: " << *r.result.fault << "\n";
      return kExitInternal;
    }
    rows.push_back({m, r.metrics, r.qos.mean_latency_ms, r.qos.throughput_sps});
  }
  std::cout << msana::compare_table(rows);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    msana::write_text(std::filesystem::path(out_dir) / "compare.csv", msana::compare_csv(rows));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift-adaptive stream classification pipeline"};
  app.require_subcommand(1);

  Common common;
  std::string out_dir, methods, compare_out;

  auto* run = app.add_subcommand("run", "Hold-out fit then prequential evaluation of one method");
  run->add_option("--config", common.config, "Key=value config file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--seed", common.seed, "Override the config seed");
  run->add_option("--threads", common.threads, "Worker threads for the base models");

  auto* cmp = app.add_subcommand("compare", "Evaluate several methods on the same stream");
  cmp->add_option("--config", common.config, "Key=value config file")->required();
  cmp->add_option("--methods", methods, "Comma-separated method names")->required();
  cmp->add_option("--seed", common.seed, "Override the config seed");
  cmp->add_option("--threads", common.threads, "Worker threads for the base models");
  cmp->add_option("--out", compare_out, "Directory for compare.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(common, out_dir);
    return cmd_compare(common, methods, compare_out);
  } catch (const msana::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const msana::StreamError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const msana::SchemaError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const msana::DimensionMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

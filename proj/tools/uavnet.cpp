// uavnet: headless entry point for scenarios, case studies, the bus bench
// and the UI gateway.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "uavnet/bus/bench.hpp"
#include "uavnet/gcs/gateway.hpp"
#include "uavnet/scenario/presets.hpp"
#include "uavnet/scenario/runner.hpp"

namespace {

using namespace uavnet;
using namespace uavnet::scenario;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

Runner* g_active = nullptr;

void on_signal(int) {
  if (g_active) g_active->request_stop();
}

void print_report(const RunReport& r, const std::string& out_dir) {
  fmt::print("{}: {:.1f} s simulated ({} time), wall {:.1f} s, frozen {:.3f} s, freeze events {}\n", r.name,
             r.duration_s, r.logical_time ? "logical" : "real", r.wall_time_s, r.frozen_s,
             r.freeze_events.size());
  for (const auto& s : r.streams) {
    std::string drops;
    for (const auto& [reason, n] : s.dropped) drops += fmt::format(" {}={}", reason, n);
    fmt::print("  {:<14} {:<9} {:<4} sent {:>6} delivered {:>6} mean {:>9.3f} ms p99 {:>9.3f} ms{}\n", s.name,
               to_string(s.kind), netsim::to_string(s.iface), s.sent, s.delivered, s.mean_delta_ns / 1e6,
               s.p99_delta_ns / 1e6, drops);
  }
  for (const auto& f : r.frames)
    fmt::print("  frames {:<8} generated {} delivered {} ratio {:.4f} inter-frame mean {:.3f} ms var {:.3f} ms^2\n",
               f.stream, f.metrics.generated, f.metrics.delivered, f.metrics.delivery_ratio,
               f.metrics.mean_interframe_ms, f.metrics.var_interframe_ms);
  fmt::print("  commands ack {} nack {} pending {}; integrity match {} mismatch {}\n", r.commands_ack,
             r.commands_nack, r.commands_pending, r.integrity_match, r.integrity_mismatch);
  fmt::print("  traces in {}\n", out_dir);
}

RunReport run_one(const ScenarioConfig& cfg, const RunOptions& opts) {
  Runner runner(cfg, opts);
  g_active = &runner;
  auto report = runner.run();
  g_active = nullptr;
  print_report(report, runner.out_dir());
  return report;
}

template <typename F>
int guarded(F&& body) {
  try {
    body();
    return kExitOk;
  } catch (const ScenarioError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const bus::CapacityError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime fault: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV/network co-simulation"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  bool logical = false;

  auto* run = app.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", scenario_path, "Scenario JSON")->required();
  run->add_option("--out", out_dir, "Output directory (overrides metrics.out_dir)");
  run->add_flag("--logical-time", logical, "Logical-time trace mode");

  auto* val = app.add_subcommand("validate", "Validate a scenario file");
  val->add_option("scenario", scenario_path, "Scenario JSON")->required();

  std::string preset;
  int contenders = -1;
  auto* cs = app.add_subcommand("case-study", "Run a bundled case study");
  cs->add_option("name", preset, "cs1|cs2|cs3|cs4")->required()->check(CLI::IsMember({"cs1", "cs2", "cs3", "cs4"}));
  cs->add_option("--contenders", contenders, "Contending WiFi stations for the whole run")->check(CLI::NonNegativeNumber);
  cs->add_option("--out", out_dir, "Output directory");
  cs->add_flag("--logical-time", logical, "Logical-time trace mode");

  bus::BenchConfig bench;
  std::string mode = "single";
  std::string bench_out;
  auto* bb = app.add_subcommand("bench-bus", "Publish/subscribe delay benchmark");
  bb->add_option("--streams", bench.n_streams, "Concurrent streams")->check(CLI::Range(1, bus::kMaxBenchStreams));
  bb->add_option("--payload", bench.payload_bytes, "Payload bytes");
  bb->add_option("--mode", mode, "single|parallel")->check(CLI::IsMember({"single", "parallel"}));
  bb->add_option("--duration", bench.duration_s, "Seconds of wall time");
  bb->add_option("--rate", bench.rate_hz, "Messages per second per stream");
  bb->add_option("--max-pairs", bench.max_parallel_pairs, "Parallel-mode pair limit");
  bb->add_option("--out", bench_out, "Per-sample CSV");

  int ws_port = 8765;
  std::string host = "127.0.0.1";
  auto* serve = app.add_subcommand("serve", "Run a scenario in real time with the UI gateway");
  serve->add_option("scenario", scenario_path, "Scenario JSON")->required();
  serve->add_option("--ws-port", ws_port, "WebSocket port")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  RunOptions opts;
  if (!out_dir.empty()) opts.out_dir = out_dir;
  if (logical) opts.logical_time = true;

  if (*run) return guarded([&] { run_one(load_scenario(scenario_path), opts); });

  if (*val) {
    return guarded([&] {
      const auto cfg = load_scenario(scenario_path);
      fmt::print("ok: {} ({} UAVs, {} streams, {} interferer groups)\n", cfg.name, cfg.uavs.size(),
                 cfg.streams.size(), cfg.interferers.size());
    });
  }

  if (*cs) {
    return guarded([&] {
      auto cfg = load_preset(preset);
      if (contenders >= 0) set_contenders(cfg, contenders);
      const std::string base = out_dir.empty() ? cfg.out_dir : out_dir;
      if (preset == "cs3") {
        opts.out_dir = (std::filesystem::path(base) / "d2d").string();
        run_one(cfg, opts);
        opts.out_dir = (std::filesystem::path(base) / "direct").string();
        run_one(direct_variant(cfg), opts);
      } else {
        opts.out_dir = base;
        run_one(cfg, opts);
      }
    });
  }

  if (*bb) {
    return guarded([&] {
      bench.mode = bus::parse_endpoint_mode(mode);
      const auto res = bus::bench_bus(bench);
      const auto& s = res.summary;
      fmt::print("bench-bus mode={} streams={} payload={} B: samples {} mean d_ze2e {:.3f} ms p99 {:.3f} ms "
                 "(pub {:.3f} q {:.3f} sub {:.3f} ms) dropped {} corrupted {} out-of-order {}\n",
                 mode, bench.n_streams, bench.payload_bytes, s.samples, s.mean_ze2e_ns / 1e6,
                 s.p99_ze2e_ns / 1e6, s.mean_pub_ns / 1e6, s.mean_q_ns / 1e6, s.mean_sub_ns / 1e6, s.dropped,
                 s.corrupted, s.out_of_order);
      if (!bench_out.empty()) {
        std::ofstream out(bench_out);
        if (!out) throw std::runtime_error("cannot write " + bench_out);
        bus::write_bench_csv(out, res.samples);
      }
    });
  }

  if (*serve) {
    return guarded([&] {
      auto cfg = load_scenario(scenario_path);
      opts.logical_time = false;
      Runner runner(cfg, opts);
      gcs::Gateway gw(runner.system().gcs(), host, static_cast<std::uint16_t>(ws_port));
      runner.system().set_metric_sink([&gw](const nlohmann::json& ev) { gw.broadcast(ev); });
      gw.set_control_handler([&runner](const std::string& action) {
        if (action != "stop") return false;
        runner.request_stop();
        return true;
      });
      gw.start();
      fmt::print("gateway listening on ws://{}:{}/\n", host, gw.port());
      std::fflush(stdout);
      g_active = &runner;
      const auto report = runner.run();
      g_active = nullptr;
      gw.stop();
      print_report(report, runner.out_dir());
    });
  }
  return kExitOk;
}

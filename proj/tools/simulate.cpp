// simulate: run, validate and sweep incident scenarios; print power tables.

#include "srcwatch/platform_http.hpp"
#include "srcwatch/power.hpp"
#include "srcwatch/report.hpp"
#include "srcwatch/scenario.hpp"
#include "srcwatch/sim.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <iostream>

using namespace srcwatch;

namespace {

int run_cmd(const std::string& file, std::optional<std::uint64_t> seed, const std::string& format,
            const std::string& platform_url, bool trace) {
  const auto fmt_kind = report_format_from_string(format);
  if (!fmt_kind) throw CLI::ValidationError("--report", "unknown format " + format);
  const auto scenario = load_scenario(file);
  SimOverrides o;
  o.seed = seed;

  const auto wall_start = std::chrono::steady_clock::now();
  SimOutcome out;
  if (platform_url == "inprocess") {
    out = run(scenario, o);
  } else {
    HttpPlatform remote(platform_url);
    out = run(scenario, o, remote);
  }
  const auto wall = std::chrono::steady_clock::now() - wall_start;

  std::cout << emit_report(out.report, *fmt_kind);
  if (trace) {
    for (const auto& line : out.trace) {
      std::cerr << fmt::format("{:>10.3f} {:>6} {}\n", line.at_ms / 1000.0, line.device_id,
                               line.text);
    }
  }
  std::cerr << fmt::format("ran {} in {} ms wall time\n", scenario.name,
                           std::chrono::duration_cast<std::chrono::milliseconds>(wall).count());
  return 0;
}

int validate_cmd(const std::string& file) {
  const auto s = load_scenario(file);
  std::cout << fmt::format("{}: ok ({} devices, {} events, {:.3f} s)\n", s.name, s.devices.size(),
                           s.events.size(), s.duration_ms / 1000.0);
  return 0;
}

double delivery_ratio(const SimReport& r) {
  std::uint64_t sent = 0, delivered = 0;
  for (const auto& d : r.devices) {
    sent += d.frames_sent;
    delivered += d.frames_delivered;
  }
  return sent == 0 ? 0.0 : static_cast<double>(delivered) / static_cast<double>(sent);
}

int sweep_cmd(const std::string& file, const std::string& param, double from, double to,
              double step) {
  if (param != "path_loss_dB") throw CLI::ValidationError("--param", "only path_loss_dB sweeps");
  if (!(step > 0)) throw CLI::ValidationError("--step", "must be positive");
  const auto scenario = load_scenario(file);
  std::cout << "path_loss_dB,snr_dB,gprs_delivery,nbiot_delivery,gprs_platform_alarms,"
               "nbiot_platform_alarms\n";
  const auto n = static_cast<long>(std::floor((to - from) / step + 1e-9));
  for (long i = 0; i <= n; ++i) {
    const double loss = from + static_cast<double>(i) * step;
    SimOverrides o;
    o.path_loss_dB = loss;
    o.tech = RadioTechKind::GprsBaseline;
    const auto gprs = run(scenario, o).report;
    o.tech = RadioTechKind::NbIot;
    const auto nb = run(scenario, o).report;
    auto alarms = [](const SimReport& r) {
      std::uint64_t n = 0;
      for (const auto& d : r.devices) n += d.alarms_opened;
      return n;
    };
    const double snr_dB =
        snr(LinkBudget{scenario.tx_power_dBm, loss, scenario.noise_floor_dBm});
    std::cout << fmt::format("{:.2f},{:.2f},{:.4f},{:.4f},{},{}\n", loss, snr_dB,
                             delivery_ratio(gprs), delivery_ratio(nb), alarms(gprs), alarms(nb));
  }
  return 0;
}

int power_cmd(const std::string& table, double target_years) {
  const auto profile = PowerProfile::defaults();
  const Battery battery;
  const auto duty = nominal_duty(NominalUsage{});
  if (table == "breakdown") {
    std::cout << breakdown_csv(profile, duty);
  } else if (table == "sensitivity") {
    std::cout << sensitivity_csv(profile, battery, target_years);
  } else {
    const auto p = project_lifetime(profile, battery, duty);
    std::cout << fmt::format("average draw {:.3f} uA, annual draw {:.1f} mAh\n",
                             average_current_mA(profile, duty) * 1000.0, p.annual_draw_mAh);
    if (p.exceeds_horizon()) {
      std::cout << fmt::format("projected lifetime {:.1f} years (exceeds {:.0f}-year horizon)\n",
                               p.years, LifetimeProjection::kHorizonYears);
    } else {
      std::cout << fmt::format("projected lifetime {:.1f} years\n", p.years);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"srcwatch scenario simulator"};
  app.require_subcommand(1);

  std::string file;
  std::optional<std::uint64_t> seed;
  std::string format = "human";
  std::string platform = "inprocess";
  bool trace = false;
  auto* run_app = app.add_subcommand("run", "run a scenario and print its report");
  run_app->add_option("file", file, "scenario file")->required()->check(CLI::ExistingFile);
  run_app->add_option("--seed", seed, "override the scenario seed");
  run_app->add_option("--report", format, "human, csv or json-lines")
      ->check(CLI::IsMember({"human", "csv", "json-lines"}));
  run_app->add_option("--platform", platform, "inprocess or an http:// base URL");
  run_app->add_flag("--trace", trace, "print the event trace to stderr");

  auto* validate_app = app.add_subcommand("validate", "parse and check a scenario");
  validate_app->add_option("file", file, "scenario file")->required()->check(CLI::ExistingFile);

  std::string param = "path_loss_dB";
  double from = 100, to = 160, step = 1;
  auto* sweep_app = app.add_subcommand("sweep", "delivery ratio against a swept parameter");
  sweep_app->add_option("file", file, "scenario file")->required()->check(CLI::ExistingFile);
  sweep_app->add_option("--param", param, "parameter to sweep")->required();
  sweep_app->add_option("--from", from)->required();
  sweep_app->add_option("--to", to)->required();
  sweep_app->add_option("--step", step)->required();

  std::string table = "summary";
  double target_years = 10.0;
  auto* power_app = app.add_subcommand("power", "energy budget of the default profile");
  power_app->add_option("--table", table, "summary, breakdown or sensitivity")
      ->check(CLI::IsMember({"summary", "breakdown", "sensitivity"}));
  power_app->add_option("--target-years", target_years);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_app) return run_cmd(file, seed, format, platform, trace);
    if (*validate_app) return validate_cmd(file);
    if (*sweep_app) return sweep_cmd(file, param, from, to, step);
    if (*power_app) return power_cmd(table, target_years);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

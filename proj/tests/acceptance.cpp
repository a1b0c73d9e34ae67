// One line per acceptance criterion: PASS/FAIL, name, elapsed time, detail.
// Exits non-zero if any criterion fails.

#include "srcwatch/frames.hpp"
#include "srcwatch/hazard.hpp"
#include "srcwatch/link.hpp"
#include "srcwatch/nmea.hpp"
#include "srcwatch/platform.hpp"
#include "srcwatch/platform_http.hpp"
#include "srcwatch/power.hpp"
#include "srcwatch/report.hpp"
#include "srcwatch/rng.hpp"
#include "srcwatch/sensors.hpp"
#include "srcwatch/sim.hpp"

#include "oracles.hpp"
#include "scenario_gen.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

using namespace srcwatch;

namespace {

const std::string kFixtures = SRCWATCH_FIXTURES;

struct Failed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failed(what);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- criteria ---------------------------------------------------------------

std::string table_one() {
  const auto t0 = Clock::now();
  constexpr auto H = SwitchLevel::High;
  constexpr auto L = SwitchLevel::Low;
  struct Row {
    SwitchLevel first, second;
    bool call_police;
  };
  const Row rows[] = {{H, H, false}, {H, L, false}, {L, H, false}, {L, L, true}};
  for (const auto& r : rows) {
    require((judge_hazard(r.first, r.second) == HazardVerdict::Alarm) == r.call_police,
            fmt::format("row ({}, {})", to_string(r.first), to_string(r.second)));
  }
  require(judge_hazard(L, H) == HazardVerdict::Warning, "row 3 is not Warning");
  require(seconds_since(t0) < 1.0, "slower than 1 s");
  return "4/4 rows";
}

std::string fail_safe() {
  DeterministicRng rng(0xFA115AFE);
  const SwitchFault faults[] = {SwitchFault::None, SwitchFault::StuckOpen, SwitchFault::WireBreak};
  const Mode modes[] = {Mode::Dormant, Mode::Active, Mode::Alarming};
  const int n = 20'000;
  for (int i = 0; i < n; ++i) {
    const bool p1 = rng.bernoulli(0.5), p2 = rng.bernoulli(0.5);
    const auto f1 = faults[rng.next() % 3], f2 = faults[rng.next() % 3];
    const auto r1 = servo_read(p1, f1), r2 = servo_read(p2, f2);
    require(!(f1 != SwitchFault::None && r1 == SwitchLevel::High), "open fault read High");
    require(!(f2 != SwitchFault::None && r2 == SwitchLevel::High), "open fault read High");
    const auto truth = judge_hazard(servo_read(p1, SwitchFault::None),
                                    servo_read(p2, SwitchFault::None));
    require(judge_hazard(r1, r2) >= truth, "fault moved the verdict toward Safe");

    auto s = initial_snapshot(1, 100);
    s.mode.mode = modes[rng.next() % 3];
    if (s.mode.mode == Mode::Alarming) {
      for (auto p : kAllPeripherals) s.mode.powered.insert(p);
    }
    s = step(s, {1, SwitchChanged{SwitchId::First, r1}}).snapshot;
    s = step(s, {2, SwitchChanged{SwitchId::Second, r2}}).snapshot;
    require(judge_hazard(s.first, s.second) >= truth, "device verdict below truth");
  }
  const SwitchLevel levels[] = {SwitchLevel::High, SwitchLevel::Low};
  for (auto a : levels) {
    for (auto b : levels) {
      require(judge_hazard(SwitchLevel::Low, b) >= judge_hazard(a, b), "not monotone");
      require(judge_hazard(a, SwitchLevel::Low) >= judge_hazard(a, b), "not monotone");
    }
  }
  return fmt::format("{} random cases", n);
}

std::string twenty_db_window() {
  const double g = kDefaultGprsThreshold_dB;
  const auto gprs = RadioTech::make(RadioTechKind::GprsBaseline, g);
  const auto nb = RadioTech::make(RadioTechKind::NbIot, g);
  int differing = 0;
  for (int k = 0; k <= 60; ++k) {
    const double s = g - 25.0 + 0.5 * k;
    const bool in_window = s >= g - 20.0 && s < g;
    require((decode_ok(gprs, s) != decode_ok(nb, s)) == in_window, fmt::format("snr {}", s));
    if (in_window) ++differing;
  }
  require(differing == 40, "window is not 40 half-dB steps wide");

  // End to end over the golden incident: delivery of the platform alarm as a
  // function of path loss, one point per dB.
  const auto base = gen::golden();
  int steps = 0;
  for (double loss = 110; loss <= 150; loss += 1.0) {
    const double s = base.tx_power_dBm - loss - base.noise_floor_dBm;
    SimOverrides o;
    o.path_loss_dB = loss;
    o.tech = RadioTechKind::GprsBaseline;
    const bool g_ok = run(base, o).report.devices[0].platform_alarm_at_ms.has_value();
    o.tech = RadioTechKind::NbIot;
    const bool n_ok = run(base, o).report.devices[0].platform_alarm_at_ms.has_value();
    require(g_ok == (s >= g), fmt::format("GPRS delivery at {} dB loss", loss));
    require(n_ok == (s >= g - 20), fmt::format("NB-IoT delivery at {} dB loss", loss));
    if (g_ok != n_ok) ++steps;
  }
  require(steps == 20, fmt::format("end-to-end window {} dB wide", steps));
  return "61 SNR points exact; end-to-end window 20 dB";
}

std::string cell_capacity() {
  for (std::uint32_t cap : {5'000u, kCellCapacityLow}) {
    const auto t0 = Clock::now();
    CellState cell(cap);
    for (std::uint32_t id = 1; id <= cap; ++id) {
      require(cell.attach(id) == AttachResult::Attached, fmt::format("refused device {}", id));
    }
    require(cell.attach(cap + 1) == AttachResult::CellFull, "admitted past capacity");
    require(cell.attached_devices() == cap, "count drifted");
    require(seconds_since(t0) < 10.0, "slower than 10 s");
  }
  return "5000 and 50000 exact";
}

std::string ten_year_standby() {
  const auto profile = PowerProfile::defaults();
  const Battery battery;
  const auto duty = nominal_duty({});
  const auto p = project_lifetime(profile, battery, duty);
  const double oracle = oracle::day_stepped_years(average_current_mA(profile, duty),
                                                  battery.capacity_mAh,
                                                  battery.self_discharge_fraction_per_year);
  require(p.years >= 10.0, fmt::format("{:.2f} years", p.years));
  require(std::abs(p.years - oracle) <= 0.01 * oracle,
          fmt::format("closed form {:.3f} vs day-stepped {:.3f}", p.years, oracle));
  std::ofstream("power_sensitivity.csv") << sensitivity_csv(profile, battery);
  return fmt::format("{:.1f} years, day-stepped {:.1f}; table in power_sensitivity.csv", p.years,
                     oracle);
}

std::string discrimination() {
  const GammaSensorConfig cfg;
  const auto du = RadiationSource::depleted_uranium_background(cfg);
  const double du_oracle = 0.5 * std::exp(-1.5 * 2.0);  // shipped background behind 2 mm lead
  require(std::abs(sensed_current(du, cfg.sense_distance_m, cfg) - du_oracle) < 1e-12,
          "DU current disagrees with oracle");
  require(!sensor_triggered(du, cfg.sense_distance_m, cfg), "DU triggers");
  require(2.0 * du_oracle < cfg.threshold_uA, "DU margin below 2x");
  double weakest = INFINITY;
  const std::pair<Isotope, double> gammas[] = {
      {Isotope::Ir192, 0.13}, {Isotope::Se75, 0.054}, {Isotope::Cs137, 0.0927}, {Isotope::Co60, 0.351}};
  for (const auto& [iso, gamma] : gammas) {
    const double oracle = gamma * 3.7 / (0.05 * 0.05) * std::exp(-0.06 * 2.0);
    const auto src = RadiationSource::working(iso);
    require(std::abs(sensed_current(src, cfg.sense_distance_m, cfg) - oracle) < 1e-9 * oracle,
            fmt::format("{} disagrees with oracle", to_string(iso)));
    require(sensor_triggered(src, cfg.sense_distance_m, cfg), fmt::format("{} missed", to_string(iso)));
    require(oracle > 2.0 * cfg.threshold_uA, fmt::format("{} margin below 2x", to_string(iso)));
    weakest = std::min(weakest, oracle);
  }
  return fmt::format("DU {:.4f} uA < 1 uA < weakest source {:.1f} uA", du_oracle, weakest);
}

std::string codec() {
  std::ifstream in(kFixtures + "/frames.golden");
  std::string line;
  int vectors = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    std::string kind;
    s >> kind;
    std::vector<std::string> tok;
    std::string t;
    while (s >> t) tok.push_back(t);
    const auto hex = tok.back();
    const auto bytes = from_hex(hex);
    require(oracle::crc16_bitwise({bytes.begin(), bytes.end() - 2}) ==
                ((bytes[bytes.size() - 2] << 8) | bytes.back()),
            "fixture CRC disagrees with the oracle");
    if (kind == "uplink") {
      UplinkFrame f;
      f.version = static_cast<std::uint8_t>(std::stoi(tok[0]));
      f.device_id = static_cast<std::uint32_t>(std::stoul(tok[1]));
      f.seq = static_cast<std::uint16_t>(std::stoi(tok[2]));
      f.msg_type = static_cast<MsgType>(std::stoi(tok[3]));
      f.flags = static_cast<std::uint8_t>(std::stoi(tok[4]));
      f.lat_e7 = std::stoi(tok[5]);
      f.lon_e7 = std::stoi(tok[6]);
      f.battery_dAh = static_cast<std::uint16_t>(std::stoi(tok[7]));
      require(to_hex(encode_frame(f)) == hex, "uplink vector " + hex);
    } else {
      DownlinkCommand c;
      c.version = static_cast<std::uint8_t>(std::stoi(tok[0]));
      c.device_id = static_cast<std::uint32_t>(std::stoul(tok[1]));
      c.cmd = static_cast<CommandKind>(std::stoi(tok[2]));
      c.nonce = static_cast<std::uint32_t>(std::stoul(tok[3]));
      require(to_hex(encode_command(c)) == hex, "downlink vector " + hex);
    }
    ++vectors;
  }
  require(vectors >= 8, "golden file missing vectors");

  DeterministicRng rng(0xC0DEC);
  const MsgType types[] = {MsgType::Heartbeat, MsgType::Alarm, MsgType::FixReport, MsgType::Ack};
  long corruptions = 0;
  for (int i = 0; i < 10'000; ++i) {
    UplinkFrame f;
    f.device_id = static_cast<std::uint32_t>(rng.next());
    f.seq = static_cast<std::uint16_t>(rng.next());
    f.msg_type = types[rng.next() % 4];
    f.flags = static_cast<std::uint8_t>(rng.next() & 0x1F);
    f.lat_e7 = static_cast<std::int32_t>(rng.next());
    f.lon_e7 = static_cast<std::int32_t>(rng.next());
    f.battery_dAh = static_cast<std::uint16_t>(rng.next());
    const auto bytes = encode_frame(f);
    require(decode_frame(bytes) == f, "uplink round trip");

    DownlinkCommand c;
    c.device_id = static_cast<std::uint32_t>(rng.next());
    c.cmd = static_cast<CommandKind>(0x10 + rng.next() % 4);
    c.nonce = static_cast<std::uint32_t>(rng.next());
    require(decode_command(encode_command(c)) == c, "downlink round trip");

    if (i < 200) {
      for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
        for (int delta = 1; delta < 256; ++delta) {
          auto bad = bytes;
          bad[pos] = static_cast<std::uint8_t>(bad[pos] ^ delta);
          bool caught = false;
          try {
            decode_frame(bad);
          } catch (const FrameError&) {
            caught = true;
          }
          require(caught, fmt::format("corruption at byte {} undetected", pos));
          ++corruptions;
        }
      }
    }
  }
  return fmt::format("{} vectors, 10000 round trips, {} corruptions caught", vectors, corruptions);
}

std::string nmea() {
  std::ifstream in(kFixtures + "/nmea_corpus.txt");
  std::string raw;
  int lines = 0;
  while (std::getline(in, raw)) {
    if (raw.empty() || raw[0] == '#') continue;
    const auto tab = raw.find('\t');
    std::istringstream ex(raw.substr(0, tab));
    std::vector<std::string> expect;
    std::string tok;
    while (ex >> tok) expect.push_back(tok);
    const auto sentence = raw.substr(tab + 1);
    ++lines;
    if (expect[0] == "err") {
      bool right = false;
      try {
        parse_sentence(sentence);
      } catch (const NmeaError& e) {
        right = to_string(e.kind()) == expect[1];
      }
      require(right, "expected " + expect[1] + ": " + sentence);
      continue;
    }
    const auto s = parse_sentence(sentence);
    const auto star = sentence.rfind('*');
    require(s.checksum == oracle::xor_fold(std::string_view(sentence).substr(1, star - 1)),
            "checksum disagrees with XOR oracle: " + sentence);
    if (expect[0] == "gga" || expect[0] == "gga-nofix") {
      const auto fix = extract_fix(s);
      require(fix.lat_e7 == std::stol(expect[1]) && fix.lon_e7 == std::stol(expect[2]),
              "position: " + sentence);
      require(fix.usable() == (expect[0] == "gga"), "usability: " + sentence);
    } else if (expect[0] == "rmc") {
      const auto fix = extract_rmc(s);
      require(fix.lat_e7 == std::stol(expect[1]) && fix.lon_e7 == std::stol(expect[2]),
              "position: " + sentence);
    } else if (expect[0] == "field-err") {
      bool right = false;
      try {
        extract_fix(s);
      } catch (const NmeaError& e) {
        right = to_string(e.kind()) == expect[1] && e.field() == expect[2];
      }
      require(right, "expected field error " + expect[2] + ": " + sentence);
    }
  }
  require(lines >= 25, "corpus too small");

  DeterministicRng rng(0xF022);
  int typed = 0, parsed = 0;
  for (int i = 0; i < 100'000; ++i) {
    std::string junk(rng.next() % 100, '\0');
    for (auto& c : junk) c = static_cast<char>(rng.next());
    if (i % 2 == 0) {
      junk = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47";
      for (int k = 0; k < 1 + static_cast<int>(rng.next() % 4); ++k) {
        junk[rng.next() % junk.size()] = static_cast<char>(rng.next());
      }
    }
    try {
      const auto s = parse_sentence(junk);
      ++parsed;
      try {
        if (s.type == "GGA") extract_fix(s);
      } catch (const NmeaError&) {
      }
    } catch (const NmeaError&) {
      ++typed;
    }
  }
  require(typed + parsed == 100'000, "fuzz outcome neither typed error nor sentence");

  for (int i = 0; i < 20'000; ++i) {
    GeoFix f;
    f.lat_e7 = static_cast<std::int32_t>(static_cast<std::int64_t>(rng.next() % 1'800'000'001) - 900'000'000);
    f.lon_e7 = static_cast<std::int32_t>(static_cast<std::int64_t>(rng.next() % 3'600'000'001) - 1'800'000'000);
    f.quality = FixQuality::Gps;
    f.num_sats = 8;
    f.hdop_x10 = 9;
    const auto back = extract_fix(parse_sentence(emit_gga(f)));
    require(std::abs(static_cast<std::int64_t>(back.lat_e7) - f.lat_e7) <= 1 &&
                std::abs(static_cast<std::int64_t>(back.lon_e7) - f.lon_e7) <= 1,
            "emit/parse drifted more than one unit");
  }
  return fmt::format("{} corpus lines, 100000 fuzz inputs ({} typed errors), 20000 round trips",
                     lines, typed);
}

std::string end_to_end() {
  const auto t0 = Clock::now();
  const auto golden_csv = oracle::read_file(kFixtures + "/shed-and-run.golden.csv");
  const auto s = gen::golden();
  const auto a = emit_report(run(s).report, ReportFormat::Csv);
  const auto b = emit_report(run(s).report, ReportFormat::Csv);
  require(a == golden_csv, "report differs from golden file");
  require(a == b, "two runs differ");

  Platform platform;
  PlatformServer server(platform);
  server.start();
  std::string over_http;
  {
    HttpPlatform remote("http://127.0.0.1:" + std::to_string(server.port()));
    over_http = emit_report(run(s, {}, remote).report, ReportFormat::Csv);
  }
  server.stop();
  require(over_http == a, "HTTP platform report differs");

  int row3 = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto sc = gen::random_scenario(seed * 7919);
    const auto out = run(sc);
    for (const auto& d : out.report.devices) {
      const auto where = fmt::format("seed {} device {}", seed * 7919, d.device_id);
      if (d.local_alarm_at_ms) require(*d.local_alarm_at_ms >= *d.trigger_at_ms, where);
      if (d.platform_alarm_at_ms) {
        require(d.local_alarm_at_ms && *d.platform_alarm_at_ms > *d.local_alarm_at_ms, where);
      }
      if (gen::never_lifted(sc, d.device_id) && gen::source_out(sc, d.device_id)) {
        ++row3;
        require(d.alarms_opened == 0 && !d.platform_alarm_at_ms, where + " alarmed on row 3");
      }
    }
  }
  require(seconds_since(t0) < 30.0, "slower than 30 s");
  return fmt::format("golden x2 + HTTP identical; 100 random scenarios, {} row-3 devices; {:.2f} s",
                     row3, seconds_since(t0));
}

std::string event_sourcing() {
  DeterministicRng rng(0xE5);
  for (int run_no = 0; run_no < 10; ++run_no) {
    Platform p;
    std::map<std::uint32_t, std::uint16_t> seq;
    std::int64_t now = 0;
    for (int op = 0; op < 500; ++op) {
      now += static_cast<std::int64_t>(rng.next() % 3'600'000);
      const auto id = static_cast<std::uint32_t>(1 + rng.next() % 5);
      try {
        switch (rng.next() % 5) {
          case 0:
          case 1: {
            UplinkFrame f;
            f.device_id = id;
            f.seq = rng.bernoulli(0.85) ? ++seq[id] : seq[id];
            f.msg_type = static_cast<MsgType>(1 + rng.next() % 4);
            p.ingest(f, now);
            break;
          }
          case 2: p.offline_scan(now, 3600, 3); break;
          case 3:
            p.enqueue_command(id, CommandKind::Wake, "op", now);
            if (rng.bernoulli(0.5)) p.fetch_pending(id, now);
            break;
          default:
            if (auto a = p.snapshot()->open_alarm_for(id)) p.ack_alarm(*a, "op", now);
        }
      } catch (const PlatformError& e) {
        require(e.kind() == PlatformError::Kind::UnknownDevice, e.what());
      }
    }
    std::vector<EventLogEntry> reparsed;
    for (const auto& e : p.log()) reparsed.push_back(parse_entry(serialize_entry(e)));
    require(canonical_state(replay_log(reparsed)) == canonical_state(*p.snapshot()),
            fmt::format("replay differs on run {}", run_no));
  }
  return "10 runs x 500 ops, canonical state identical";
}


}  // namespace

int main() {
  const std::pair<const char*, std::function<std::string()>> criteria[] = {
      {"table-1-reproduction", table_one},
      {"fail-safe-property", fail_safe},
      {"20db-window", twenty_db_window},
      {"cell-capacity", cell_capacity},
      {"10-year-standby", ten_year_standby},
      {"discrimination", discrimination},
      {"codec-golden-vectors", codec},
      {"nmea", nmea},
      {"end-to-end-golden-scenario", end_to_end},
      {"event-sourcing", event_sourcing},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = Clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = check();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    if (!ok) ++failed;
    fmt::print("{} {:<28} {:>8.3f}s  {}\n", ok ? "PASS" : "FAIL", name, seconds_since(t0), detail);
  }
  fmt::print("{} of {} criteria passed\n", std::size(criteria) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}

#include "srcwatch/crc16.hpp"
#include "srcwatch/frames.hpp"
#include "srcwatch/hazard.hpp"
#include "srcwatch/link.hpp"
#include "srcwatch/nmea.hpp"
#include "srcwatch/platform.hpp"
#include "srcwatch/scenario.hpp"
#include "srcwatch/sim.hpp"

#include <benchmark/benchmark.h>

using namespace srcwatch;

static void BM_EncodeDecodeUplink(benchmark::State& state) {
  UplinkFrame f;
  f.device_id = 4711;
  f.msg_type = MsgType::Alarm;
  f.lat_e7 = 481173000;
  f.lon_e7 = 115166667;
  for (auto _ : state) {
    ++f.seq;
    benchmark::DoNotOptimize(decode_frame(encode_frame(f)));
  }
}
BENCHMARK(BM_EncodeDecodeUplink);

static void BM_ParseGga(benchmark::State& state) {
  const std::string s = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47";
  for (auto _ : state) benchmark::DoNotOptimize(extract_fix(parse_sentence(s)));
}
BENCHMARK(BM_ParseGga);

static void BM_HazardStep(benchmark::State& state) {
  const auto s0 = initial_snapshot(1, 100);
  std::int64_t t = 0;
  for (auto _ : state) {
    auto s = step(s0, {++t, SwitchChanged{SwitchId::First, SwitchLevel::Low}}).snapshot;
    benchmark::DoNotOptimize(step(s, {++t, SwitchChanged{SwitchId::Second, SwitchLevel::Low}}));
  }
}
BENCHMARK(BM_HazardStep);

static void BM_CellAttach(benchmark::State& state) {
  const auto n = static_cast<std::uint32_t>(state.range(0));
  for (auto _ : state) {
    CellState cell(n);
    for (std::uint32_t id = 1; id <= n; ++id) benchmark::DoNotOptimize(cell.attach(id));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_CellAttach)->Arg(5'000)->Arg(50'000)->Unit(benchmark::kMillisecond);

static void BM_PlatformIngest(benchmark::State& state) {
  Platform p;
  UplinkFrame f;
  f.msg_type = MsgType::Heartbeat;
  std::int64_t now = 0;
  for (auto _ : state) {
    f.device_id = 1 + static_cast<std::uint32_t>(now % 1000);
    f.seq = static_cast<std::uint16_t>(now / 1000);
    p.ingest(f, ++now);
  }
}
BENCHMARK(BM_PlatformIngest);

static void BM_GoldenScenario(benchmark::State& state) {
  const auto s = load_scenario(std::string(SRCWATCH_FIXTURES) + "/shed-and-run.scn");
  for (auto _ : state) benchmark::DoNotOptimize(run(s));
}
BENCHMARK(BM_GoldenScenario)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

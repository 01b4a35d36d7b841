#include <doctest.h>

#include <string>

#include <json.hpp>

#include "uavnet/scenario/presets.hpp"
#include "uavnet/scenario/runner.hpp"

using namespace uavnet;
using namespace uavnet::scenario;
using json = nlohmann::json;

namespace {

json minimal() {
  return json::parse(R"({
    "name": "t",
    "sim": {"duration_s": 2, "seed": 1},
    "uavs": [{"id": 1, "home": {"x": 5, "y": 0}, "interfaces": ["wifi"]}]
  })");
}

std::string error_of(const json& doc) {
  try {
    parse_scenario(doc.dump());
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return {};
}

json lte_swarm(int n) {
  json doc = minimal();
  doc["uavs"] = json::array();
  for (int id = 1; id <= n; ++id)
    doc["uavs"].push_back({{"id", id}, {"home", {{"x", id}, {"y", 0}}}, {"interfaces", {"lte"}}});
  return doc;
}

double mean_ack_ms(System& sys) {
  double sum = 0.0;
  int n = 0;
  for (const auto& c : sys.gcs().store().all_commands()) {
    if (c.status != gcs::CmdStatus::Ack) continue;
    sum += static_cast<double>(c.t_status - c.t_issue) / 1e6;
    ++n;
  }
  return n ? sum / n : 0.0;
}

}  // namespace

TEST_CASE("config: defaults") {
  const auto c = parse_scenario(minimal().dump());
  CHECK(c.sim.tick_ms == 10.0);
  CHECK(c.sim.drain_s == 1.0);
  CHECK(c.sim.sync_mode == netsim::SyncMode::Besteffort);
  CHECK(c.wifi.tx_dbm == 16.0);
  CHECK(c.d2d.tx_dbm == 10.5);
  CHECK(c.wifi.ap_pos.z == 2.0);
  CHECK(c.lte.enb_pos.z == 30.0);
  REQUIRE(c.uavs.size() == 1);
  CHECK(c.uavs[0].has(netsim::IfaceKind::Wifi));
  CHECK_FALSE(c.uavs[0].has(netsim::IfaceKind::Lte));
  CHECK(c.interferers.empty());
}

TEST_CASE("config: errors name the field") {
  json doc = minimal();
  doc["sim"].erase("seed");
  CHECK(error_of(doc).starts_with("sim.seed"));

  doc = minimal();
  doc["uavs"].push_back({{"id", 1}, {"home", {{"x", 0}, {"y", 0}}}, {"interfaces", {"wifi"}}});
  CHECK(error_of(doc).starts_with("uavs[1].id"));

  doc = minimal();
  doc["sim"]["speed"] = 3;
  CHECK(error_of(doc).starts_with("sim"));
  CHECK(error_of(doc).find("speed") != std::string::npos);

  doc = minimal();
  doc["streams"] = {{{"name", "c"}, {"src", 1}, {"dst", "gcs"}, {"kind", "control"}, {"iface", "wifi"}}};
  CHECK(error_of(doc).starts_with("streams[0]"));

  doc = minimal();
  doc["streams"] = {{{"name", "t"}, {"src", 1}, {"dst", "gcs"}, {"kind", "telemetry"}, {"iface", "lte"}}};
  CHECK(error_of(doc).starts_with("streams[0]"));

  doc = minimal();
  doc["uavs"][0]["home"] = {{"lat", 40.0}, {"lon", -117.8443}, {"alt_m", 0}};
  CHECK(error_of(doc).starts_with("uavs[0].home"));
}

TEST_CASE("config: LTE UAV count is capped by the grant period") {
  CHECK(error_of(lte_swarm(40)).empty());
  const auto err = error_of(lte_swarm(41));
  CHECK(err.starts_with("uavs"));
  CHECK(err.find("41") != std::string::npos);
}

TEST_CASE("config: canonical document round-trips") {
  for (const char* name : {"cs1", "cs2", "cs3", "cs4"}) {
    CAPTURE(name);
    const auto c = load_preset(name);
    const json once = to_json(c);
    const json twice = to_json(parse_scenario(once.dump()));
    CHECK(once == twice);
  }
}

TEST_CASE("autogen: nodes follow the scenario") {
  ManualClock clock;
  SUBCASE("line topology is a path") {
    System sys(load_preset("cs3"), clock);
    const auto r = sys.net().route(netsim::kGcsNodeId, 4, netsim::IfaceKind::D2d);
    REQUIRE(r.has_value());
    CHECK(*r == std::vector<int>{netsim::kGcsNodeId, netsim::kApNodeId, 1, 2, 3, 4});
    CHECK(sys.net().interferer_count() == 0);
  }
  SUBCASE("multi-interface UAV") {
    System sys(load_preset("cs2"), clock);
    const auto& n = sys.net().node(1);
    CHECK(n.has(netsim::IfaceKind::Wifi));
    CHECK(n.has(netsim::IfaceKind::Lte));
    CHECK(sys.net().lte_ue_count() == 1);
  }
  SUBCASE("no interferers, no extra nodes") {
    System sys(parse_scenario(minimal().dump()), clock);
    CHECK(sys.net().uav_ids() == std::vector<int>{1});
    CHECK(sys.net().interferer_count() == 0);
    CHECK_THROWS(sys.net().node(netsim::kEnbNodeId));
  }
}

TEST_CASE("runner: a run without streams reports nothing sent") {
  RunOptions o;
  o.logical_time = true;
  o.write_traces = false;
  const auto r = run(parse_scenario(minimal().dump()), o);
  CHECK(r.streams.empty());
  CHECK(r.freeze_events.empty());
  CHECK(r.commands_ack + r.commands_nack + r.commands_pending == 0);
  CHECK(r.sim_time_s == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("runner: command acks slow down under contention") {
  RunOptions o;
  o.logical_time = true;
  o.write_traces = false;
  double ack_ms[2];
  for (int i = 0; i < 2; ++i) {
    auto cfg = load_preset("cs1");
    set_contenders(cfg, i == 0 ? 0 : 10);
    Runner runner(cfg, o);
    const auto r = runner.run();
    CHECK(r.commands_nack == 0);
    ack_ms[i] = mean_ack_ms(runner.system());
  }
  CHECK(ack_ms[0] > 0.0);
  CHECK(ack_ms[1] > ack_ms[0]);
}

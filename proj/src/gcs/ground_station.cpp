#include "uavnet/gcs/ground_station.hpp"

#include <algorithm>
#include <limits>

#include "uavnet/flightsim/codec.hpp"
#include "uavnet/flightsim/topics.hpp"

namespace uavnet::gcs {

namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

/// Parses "uav/<id>/<rest>"; returns false for anything else.
bool split_uav_topic(const std::string& topic, int& uav_id, std::string& rest) {
  constexpr std::string_view kPrefix = "uav/";
  if (topic.rfind(kPrefix, 0) != 0) return false;
  const auto slash = topic.find('/', kPrefix.size());
  if (slash == std::string::npos) return false;
  try {
    std::size_t used = 0;
    const auto id_text = topic.substr(kPrefix.size(), slash - kPrefix.size());
    uav_id = std::stoi(id_text, &used);
    if (used != id_text.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  rest = topic.substr(slash + 1);
  return true;
}

}  // namespace

nlohmann::json telemetry_event(const flightsim::Telemetry& t) {
  return {{"type", "telemetry"},
          {"uav_id", t.uav_id},
          {"t_gen_ns", t.t_gen},
          {"lat", t.pos.lat},
          {"lon", t.pos.lon},
          {"alt_m", t.pos.alt},
          {"vx", t.vel.vx},
          {"vy", t.vel.vy},
          {"vz", t.vel.vz},
          {"battery_pct", t.battery_pct},
          {"mode", std::string(flightsim::to_string(t.mode))},
          {"seq", t.seq}};
}

nlohmann::json cmd_status_event(int uav_id, std::uint64_t cmd_id, CmdStatus s) {
  return {{"type", "cmd_status"}, {"uav_id", uav_id}, {"cmd_id", cmd_id}, {"status", to_string(s)}};
}

nlohmann::json metric_event(const std::string& name, Nanos t_ns, double value, nlohmann::json labels) {
  return {{"type", "metric"}, {"name", name}, {"t_ns", t_ns}, {"value", value}, {"labels", std::move(labels)}};
}

nlohmann::json freeze_event(bool frozen, Nanos t_ns) {
  return {{"type", "freeze"}, {"state", frozen ? "frozen" : "resumed"}, {"t_ns", t_ns}};
}

GroundStation::GroundStation(const Clock& clock, bus::Bus& south, std::size_t store_capacity)
    : clock_(clock),
      ep_(south.open_endpoint()),
      notifier_(std::make_shared<Notifier>()),
      store_(store_capacity) {
  inbox_ = ep_->subscribe("uav");
  inbox_->set_notifier(notifier_);
  freeze_inbox_ = ep_->subscribe(flightsim::kFreezeTopic);
  freeze_inbox_->set_notifier(notifier_);
}

GroundStation::~GroundStation() { ep_->close(); }

void GroundStation::add_uav(int uav_id) {
  if (started_) throw GcsError("add_uav after start");
  if (!uavs_.emplace(uav_id, UavEntry{}).second)
    throw GcsError("duplicate uav id " + std::to_string(uav_id));
}

void GroundStation::set_control_cadence(int uav_id, ControlCadence cadence) {
  auto it = uavs_.find(uav_id);
  if (it == uavs_.end()) throw GcsError("unknown uav " + std::to_string(uav_id));
  if (!(cadence.rate_hz > 0.0)) throw GcsError("control rate_hz must be > 0");
  it->second.cadence = cadence;
}

void GroundStation::set_mission(int uav_id, std::vector<MissionStep> steps) {
  auto it = uavs_.find(uav_id);
  if (it == uavs_.end()) throw GcsError("unknown uav " + std::to_string(uav_id));
  it->second.mission = std::move(steps);
  it->second.step = 0;
  it->second.phase = it->second.mission.empty() ? Phase::Done : Phase::Idle;
}

FrameSink& GroundStation::add_frame_sink(int uav_id, const std::string& stream) {
  if (!uavs_.count(uav_id)) throw GcsError("unknown uav " + std::to_string(uav_id));
  auto& slot = sinks_[{uav_id, stream}];
  if (slot) throw GcsError("duplicate frame sink " + stream);
  slot = std::make_unique<FrameSink>(stream);
  return *slot;
}

void GroundStation::set_event_sink(EventSink sink) {
  std::lock_guard lk(sink_mu_);
  event_sink_ = std::move(sink);
}

void GroundStation::emit(const nlohmann::json& ev) {
  std::lock_guard lk(sink_mu_);
  if (event_sink_) event_sink_(ev);
}

void GroundStation::start(Nanos t_start) {
  if (started_) throw GcsError("ground station already started");
  started_ = true;
  for (auto& [id, u] : uavs_) u.next_heartbeat = t_start;
}

std::vector<int> GroundStation::uav_ids() const {
  std::vector<int> out;
  for (const auto& [id, u] : uavs_) out.push_back(id);
  return out;
}

const FrameSink* GroundStation::frame_sink(int uav_id, const std::string& stream) const {
  auto it = sinks_.find({uav_id, stream});
  return it == sinks_.end() ? nullptr : it->second.get();
}

bool GroundStation::mission_done(int uav_id) const {
  auto it = uavs_.find(uav_id);
  return it == uavs_.end() || it->second.phase == Phase::Done;
}

std::uint64_t GroundStation::send_command(int uav_id, flightsim::Command cmd) {
  if (!uavs_.count(uav_id)) throw GcsError("unknown uav " + std::to_string(uav_id));
  cmd.cmd_id = next_cmd_id_.fetch_add(1);
  cmd.t_issue = clock_.now();
  CommandRecord rec;
  rec.uav_id = uav_id;
  rec.cmd_id = cmd.cmd_id;
  rec.cmd = cmd;
  rec.t_issue = cmd.t_issue;
  store_.add_command(rec);
  {
    std::lock_guard lk(pub_mu_);
    ep_->publish(flightsim::command_topic(uav_id), bus::make_payload(flightsim::encode_command(cmd)));
  }
  emit(cmd_status_event(uav_id, cmd.cmd_id, CmdStatus::Pending));
  return cmd.cmd_id;
}

void GroundStation::on_telemetry(const flightsim::Telemetry& t, Nanos now) {
  ++telemetry_;
  store_.ingest(t);
  emit(telemetry_event(t));
  if (t.ack_cmd_id) {
    const auto status = t.ack_status == flightsim::AckStatus::Ack ? CmdStatus::Ack : CmdStatus::Nack;
    const auto before = store_.command(*t.ack_cmd_id);
    if (before && before->status == CmdStatus::Pending &&
        store_.resolve(*t.ack_cmd_id, status, now, t.seq))
      emit(cmd_status_event(t.uav_id, *t.ack_cmd_id, status));
  }
}

bool GroundStation::step_complete(int uav_id, const UavEntry& u) const {
  const auto rec = store_.command(u.cmd_id);
  if (!rec || rec->status == CmdStatus::Pending) return false;
  if (rec->status == CmdStatus::Nack) return true;
  using flightsim::CommandKind;
  using flightsim::Mode;
  const auto latest = store_.latest(uav_id);
  switch (rec->cmd.kind) {
    case CommandKind::Arm:
    case CommandKind::SetSpeed:
      return true;
    case CommandKind::Takeoff:
    case CommandKind::Goto:
    case CommandKind::Move:
      return latest && latest->seq >= rec->ack_seq && latest->mode == Mode::Hovering;
    case CommandKind::Land:
      return latest && latest->seq >= rec->ack_seq && latest->mode == Mode::Disarmed;
  }
  return false;
}

bool GroundStation::advance_mission(int uav_id, UavEntry& u, Nanos now) {
  bool did = false;
  for (;;) {
    switch (u.phase) {
      case Phase::Done:
        return did;
      case Phase::Idle:
        u.cmd_id = send_command(uav_id, u.mission[u.step].cmd);
        u.phase = Phase::AwaitDone;
        did = true;
        continue;
      case Phase::AwaitDone:
        if (!step_complete(uav_id, u)) return did;
        u.hold_until = now + s_to_ns(u.mission[u.step].hold_s);
        u.phase = Phase::Hold;
        did = true;
        continue;
      case Phase::Hold:
        if (now < u.hold_until) return did;
        ++u.step;
        u.phase = u.step < u.mission.size() ? Phase::Idle : Phase::Done;
        did = true;
        continue;
    }
  }
}

bool GroundStation::service(Nanos now) {
  if (!started_) return false;
  const Nanos stamp = clock_.is_logical() ? now : clock_.now();
  bool did = false;

  for (const auto& env : freeze_inbox_->try_poll()) {
    did = true;
    try {
      const auto sig = flightsim::decode_freeze(env.text());
      emit(freeze_event(sig.frozen, sig.t_ns));
    } catch (const flightsim::FlightError&) {
      ++malformed_;
    }
  }

  for (const auto& env : inbox_->try_poll()) {
    did = true;
    if (on_receive_) on_receive_(env);
    int uav_id = 0;
    std::string rest;
    if (!split_uav_topic(env.topic.str(), uav_id, rest)) {
      ++malformed_;
      continue;
    }
    if (rest == "telemetry") {
      try {
        on_telemetry(flightsim::decode_telemetry(env.text()), stamp);
      } catch (const flightsim::FlightError&) {
        ++malformed_;
      }
    } else if (rest.rfind("frames/", 0) == 0) {
      auto it = sinks_.find({uav_id, rest.substr(7)});
      if (it != sinks_.end()) it->second->on_fragment(env.bytes(), clock_.is_logical() ? now : env.t_sub_recv);
    }
  }

  for (auto& [id, u] : uavs_) {
    if (u.cadence) {
      const Nanos period = static_cast<Nanos>(1e9 / u.cadence->rate_hz);
      while (u.next_heartbeat <= now) {
        flightsim::Heartbeat hb{u.heartbeat_seq++, u.next_heartbeat};
        {
          std::lock_guard lk(pub_mu_);
          ep_->publish(flightsim::command_topic(id),
                       bus::make_payload(flightsim::encode_heartbeat(hb, u.cadence->payload_bytes)));
        }
        ++heartbeats_;
        u.next_heartbeat += period;
        did = true;
      }
    }
    did |= advance_mission(id, u, stamp);
  }
  return did;
}

Nanos GroundStation::next_due() const {
  if (!started_) return kNever;
  Nanos due = kNever;
  for (const auto& [id, u] : uavs_) {
    if (u.cadence) due = std::min(due, u.next_heartbeat);
    if (u.phase == Phase::Hold) due = std::min(due, u.hold_until);
    if (u.phase == Phase::Idle) due = std::min(due, Nanos{0});
  }
  return due;
}

}  // namespace uavnet::gcs

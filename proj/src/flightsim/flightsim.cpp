#include "uavnet/flightsim/flightsim.hpp"

#include <limits>

#include "uavnet/flightsim/topics.hpp"

namespace uavnet::flightsim {

FlightSim::FlightSim(const Clock& clock, bus::Bus& bus, VehicleParams params)
    : clock_(clock),
      bus_(bus),
      params_(params),
      notifier_(std::make_shared<bus::Notifier>()),
      tick_ns_(s_to_ns(params.tick_s)),
      next_tick_(std::numeric_limits<Nanos>::max()) {
  if (tick_ns_ <= 0 || params.tick_s > 0.1) throw FlightError("tick must be in (0, 0.1] s");
  control_ = bus_.open_endpoint();
  freeze_inbox_ = control_->subscribe(kFreezeTopic);
  freeze_inbox_->set_notifier(notifier_);
}

FlightSim::~FlightSim() {
  for (auto& [id, t] : tasks_) t->endpoint->close();
  control_->close();
}

const Vehicle& FlightSim::spawn_uav(int uav_id, const geo::GeoPos& home) {
  if (tasks_.count(uav_id)) throw FlightError("duplicate uav id " + std::to_string(uav_id));
  auto ep = bus_.open_endpoint();
  auto inbox = ep->subscribe(command_topic(uav_id));
  inbox->set_notifier(notifier_);
  auto task = std::make_unique<Task>(Task{Vehicle(uav_id, home, params_, clock_.now()), ep,
                                          inbox, telemetry_topic(uav_id), std::nullopt});
  auto& ref = *task;
  tasks_.emplace(uav_id, std::move(task));
  if (started_) publish(ref, ref.vehicle.report(clock_.now()));
  return ref.vehicle;
}

void FlightSim::start(Nanos t_start) {
  if (started_) throw FlightError("flight simulator already started");
  started_ = true;
  next_tick_ = t_start;
  for (auto& [id, t] : tasks_) publish(*t, t->vehicle.report(t_start));
}

std::vector<int> FlightSim::ids() const {
  std::vector<int> out;
  out.reserve(tasks_.size());
  for (const auto& [id, t] : tasks_) out.push_back(id);
  return out;
}

const Vehicle& FlightSim::vehicle(int uav_id) const {
  auto it = tasks_.find(uav_id);
  if (it == tasks_.end()) throw FlightError("unknown uav id " + std::to_string(uav_id));
  return it->second->vehicle;
}

Nanos FlightSim::next_due() const {
  return frozen_ ? std::numeric_limits<Nanos>::max() : next_tick_;
}

void FlightSim::publish(Task& t, const Telemetry& tel) {
  if (on_telemetry_) on_telemetry_(tel, t.vehicle.state());
  t.endpoint->publish(t.topic, bus::make_payload(encode_telemetry(tel)));
}

void FlightSim::drain_inbox(Task& t, Nanos now) {
  for (const auto& env : t.inbox->try_poll()) {
    if (on_uplink_) on_uplink_(env);
    Uplink up;
    try {
      up = decode_uplink(env.text());
    } catch (const FlightError&) {
      ++malformed_;
      continue;
    }
    if (std::holds_alternative<Heartbeat>(up)) {
      ++heartbeats_;
      continue;
    }
    ++commands_;
    auto outcome = t.vehicle.handle_command(std::get<Command>(up), now);
    publish(t, outcome.telemetry);
  }
}

void FlightSim::tick(Nanos t_tick) {
  const Nanos stamp = clock_.is_logical() ? t_tick : clock_.now();
  ++ticks_;
  for (auto& [id, t] : tasks_) {
    drain_inbox(*t, stamp);
    if (auto tel = t->vehicle.step(params_.tick_s, stamp)) publish(*t, *tel);
  }
}

void FlightSim::freeze_all(Nanos t) {
  for (auto& [id, task] : tasks_) task->snapshot = task->vehicle.freeze(t);
  frozen_ = true;
  frozen_at_ = t;
  ++freeze_count_;
}

void FlightSim::resume_all(Nanos t, Nanos pause) {
  (void)t;
  for (auto& [id, task] : tasks_) {
    task->vehicle.resume(*task->snapshot, pause);
    task->snapshot.reset();
  }
  frozen_ = false;
  frozen_total_ += pause;
  next_tick_ += pause;
}

bool FlightSim::service(Nanos now) {
  if (!started_) return false;
  bool did = false;
  for (const auto& env : freeze_inbox_->try_poll()) {
    try {
      pending_signals_.push_back(decode_freeze(env.text()));
    } catch (const FlightError&) {
      ++malformed_;
    }
  }
  for (const auto& sig : pending_signals_) {
    did = true;
    if (sig.frozen) {
      if (frozen_) continue;
      while (next_tick_ <= sig.t_ns) {
        tick(next_tick_);
        next_tick_ += tick_ns_;
      }
      freeze_all(sig.t_ns);
    } else if (frozen_) {
      resume_all(sig.t_ns, std::max<Nanos>(0, sig.t_ns - frozen_at_));
    }
  }
  pending_signals_.clear();
  if (frozen_) return did;
  while (next_tick_ <= now) {
    tick(next_tick_);
    next_tick_ += tick_ns_;
    did = true;
  }
  return did;
}

}  // namespace uavnet::flightsim

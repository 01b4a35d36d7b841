#include "uavnet/bus/bus.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>

namespace uavnet::bus {

Topic Topic::parse(std::string_view path) {
  if (path.empty()) throw BusError("topic must not be empty");
  validate_prefix(path);
  Topic t;
  t.path_ = std::string(path);
  return t;
}

void validate_prefix(std::string_view prefix) {
  if (prefix.empty()) return;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = prefix.find('/', start);
    const std::size_t end = slash == std::string_view::npos ? prefix.size() : slash;
    if (end == start) throw BusError("empty segment in topic '" + std::string(prefix) + "'");
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
}

bool prefix_matches(std::string_view prefix, std::string_view topic) {
  if (prefix.empty()) return true;
  if (topic.size() < prefix.size() || topic.compare(0, prefix.size(), prefix) != 0) return false;
  return topic.size() == prefix.size() || topic[prefix.size()] == '/';
}

PayloadPtr make_payload(std::string_view text) {
  auto p = std::make_shared<Payload>(text.size());
  std::memcpy(p->data(), text.data(), text.size());
  return p;
}

PayloadPtr make_payload(std::span<const std::byte> bytes) {
  return std::make_shared<const Payload>(bytes.begin(), bytes.end());
}

BusDelaySample Envelope::delay() const {
  BusDelaySample d;
  d.d_pub = t_enq - t_pub_send;
  d.d_q = t_deq - t_enq;
  d.d_sub = t_sub_recv - t_deq;
  d.d_ze2e = t_sub_recv - t_pub_send;
  return d;
}

std::span<const std::byte> Envelope::bytes() const {
  if (!payload) return {};
  return {payload->data(), payload->size()};
}

std::string_view Envelope::text() const {
  if (!payload) return {};
  return {reinterpret_cast<const char*>(payload->data()), payload->size()};
}

// --- Subscription ---------------------------------------------------------

Subscription::Subscription(const Bus& bus, std::string prefix, std::size_t capacity)
    : bus_(bus), prefix_(std::move(prefix)), capacity_(capacity) {}

bool Subscription::push(Envelope env) {
  std::shared_ptr<Notifier> notifier;
  {
    std::lock_guard lk(mu_);
    notifier = notifier_;
    if (cancelled_) return false;
    env.t_enq = bus_.clock().now();
    if (queue_.size() >= capacity_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(std::move(env));
  }
  cv_.notify_one();
  if (notifier) notifier->notify();
  return true;
}

std::vector<Envelope> Subscription::drain_locked() {
  std::vector<Envelope> out;
  out.reserve(queue_.size());
  const Clock& clock = bus_.clock();
  while (!queue_.empty()) {
    Envelope env = std::move(queue_.front());
    queue_.pop_front();
    env.t_deq = clock.now();
    out.push_back(std::move(env));
    out.back().t_sub_recv = clock.now();
  }
  return out;
}

std::vector<Envelope> Subscription::poll(Nanos deadline) {
  std::unique_lock lk(mu_);
  if (cancelled_) throw SubscriptionCancelled("subscription '" + prefix_ + "' cancelled");
  if (queue_.empty()) {
    if (const auto* wall = dynamic_cast<const WallClock*>(&bus_.clock())) {
      const auto tp = wall->to_time_point(deadline);
      cv_.wait_until(lk, tp, [&] { return cancelled_ || interrupted_ || !queue_.empty(); });
    }
    interrupted_ = false;
    if (cancelled_) throw SubscriptionCancelled("subscription '" + prefix_ + "' cancelled");
  }
  return drain_locked();
}

std::vector<Envelope> Subscription::try_poll() {
  std::lock_guard lk(mu_);
  if (cancelled_) throw SubscriptionCancelled("subscription '" + prefix_ + "' cancelled");
  return drain_locked();
}

void Subscription::cancel() {
  {
    std::lock_guard lk(mu_);
    cancelled_ = true;
    queue_.clear();
  }
  cv_.notify_all();
}

bool Subscription::cancelled() const {
  std::lock_guard lk(mu_);
  return cancelled_;
}

void Subscription::interrupt() {
  {
    std::lock_guard lk(mu_);
    interrupted_ = true;
  }
  cv_.notify_all();
}

void Subscription::set_notifier(std::shared_ptr<Notifier> n) {
  std::lock_guard lk(mu_);
  notifier_ = std::move(n);
}

std::uint64_t Subscription::dropped() const {
  std::lock_guard lk(mu_);
  return dropped_;
}

std::size_t Subscription::pending() const {
  std::lock_guard lk(mu_);
  return queue_.size();
}

// --- Endpoint -------------------------------------------------------------

Endpoint::Endpoint(Bus& bus, EndpointId id) : bus_(bus), id_(id) {}

bool Endpoint::is_open() const {
  std::lock_guard lk(mu_);
  return open_;
}

void Endpoint::close() {
  std::vector<std::shared_ptr<Subscription>> subs;
  {
    std::lock_guard lk(mu_);
    if (!open_) return;
    open_ = false;
    subs.swap(subs_);
  }
  for (auto& s : subs) {
    s->cancel();
    bus_.detach(s.get());
  }
}

PublishAck Endpoint::publish(std::string_view topic, PayloadPtr payload, std::uint32_t stream_id,
                             std::optional<std::uint64_t> origin_seq) {
  Envelope env;
  env.t_pub_send = bus_.clock().now();
  env.topic = Topic::parse(topic);
  env.payload = std::move(payload);
  env.src_id = id_;
  env.stream_id = stream_id;
  {
    std::lock_guard lk(mu_);
    if (!open_) throw EndpointClosed("publish on closed endpoint " + std::to_string(id_));
    auto it = next_seq_.find(topic);
    if (it == next_seq_.end()) it = next_seq_.emplace(std::string(topic), 0).first;
    env.seq = it->second++;
  }
  env.origin_seq = origin_seq.value_or(env.seq);
  PublishAck ack;
  ack.seq = env.seq;
  ack.delivered_to = bus_.fan_out(env);
  return ack;
}

std::shared_ptr<Subscription> Endpoint::subscribe(std::string_view prefix) {
  validate_prefix(prefix);
  auto sub = std::make_shared<Subscription>(bus_, std::string(prefix), bus_.options_.queue_capacity);
  {
    std::lock_guard lk(mu_);
    if (!open_) throw EndpointClosed("subscribe on closed endpoint " + std::to_string(id_));
    subs_.push_back(sub);
  }
  bus_.attach(sub);
  return sub;
}

// --- Bus ------------------------------------------------------------------

Bus::Bus(const Clock& clock, BusOptions options) : clock_(clock), options_(options) {}

std::shared_ptr<Endpoint> Bus::open_endpoint() {
  std::unique_lock lk(mu_);
  return std::make_shared<Endpoint>(*this, next_endpoint_++);
}

std::size_t Bus::fan_out(const Envelope& proto) {
  std::shared_lock lk(mu_);
  std::size_t n = 0;
  for (const auto& sub : subs_) {
    if (!prefix_matches(sub->prefix(), proto.topic.str())) continue;
    if (sub->push(proto)) ++n;
  }
  return n;
}

void Bus::attach(std::shared_ptr<Subscription> sub) {
  std::unique_lock lk(mu_);
  subs_.push_back(std::move(sub));
}

void Bus::detach(const Subscription* sub) {
  std::unique_lock lk(mu_);
  std::erase_if(subs_, [&](const auto& s) { return s.get() == sub; });
}

std::uint64_t Bus::total_dropped() const {
  std::shared_lock lk(mu_);
  std::uint64_t n = 0;
  for (const auto& s : subs_) n += s->dropped();
  return n;
}

}  // namespace uavnet::bus

#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "uavnet/core/clock.hpp"
#include "uavnet/core/notifier.hpp"

namespace uavnet::bus {

class BusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EndpointClosed : public BusError {
 public:
  using BusError::BusError;
};
class SubscriptionCancelled : public BusError {
 public:
  using BusError::BusError;
};
class CapacityError : public BusError {
 public:
  using BusError::BusError;
};

/// Slash-delimited topic path, e.g. "uav/3/telemetry".
class Topic {
 public:
  /// Throws BusError when empty or when a segment is empty.
  static Topic parse(std::string_view path);

  const std::string& str() const { return path_; }
  bool operator==(const Topic&) const = default;

 private:
  std::string path_;
};

/// True when `prefix` selects `topic` on segment boundaries. The empty
/// prefix selects everything; "uav/3" selects "uav/3/telemetry" but not
/// "uav/30/x".
bool prefix_matches(std::string_view prefix, std::string_view topic);

/// Throws BusError unless `prefix` is empty or a valid topic path.
void validate_prefix(std::string_view prefix);

using Payload = std::vector<std::byte>;
using PayloadPtr = std::shared_ptr<const Payload>;

PayloadPtr make_payload(std::string_view text);
PayloadPtr make_payload(std::span<const std::byte> bytes);

/// Delay decomposition of one delivery: publish, queueing, and reception
/// components. d_ze2e is always their exact sum.
struct BusDelaySample {
  Nanos d_pub = 0;
  Nanos d_q = 0;
  Nanos d_sub = 0;
  Nanos d_ze2e = 0;
};

using EndpointId = std::uint32_t;

struct Envelope {
  Topic topic;
  PayloadPtr payload;
  std::uint64_t seq = 0;         // per (publisher, topic), assigned by the bus
  std::uint64_t origin_seq = 0;  // seq at the originating publisher; equals seq unless forwarded
  EndpointId src_id = 0;
  std::uint32_t stream_id = 0;
  Nanos t_pub_send = 0;
  Nanos t_enq = 0;
  Nanos t_deq = 0;
  Nanos t_sub_recv = 0;

  BusDelaySample delay() const;
  std::span<const std::byte> bytes() const;
  std::string_view text() const;
};

struct BusOptions {
  std::size_t queue_capacity = 10'000;
};

struct PublishAck {
  std::uint64_t seq = 0;
  std::size_t delivered_to = 0;  // number of matching subscriptions
};

class Bus;
class Endpoint;

using Notifier = uavnet::Notifier;

/// Queue of envelopes matching one prefix. Consumed by one task at a time.
class Subscription {
 public:
  Subscription(const Bus& bus, std::string prefix, std::size_t capacity);

  /// Returns every queued envelope in arrival order. When the queue is empty
  /// and the bus runs on wall time, blocks until a message arrives or the
  /// deadline (bus clock ns) passes. Throws SubscriptionCancelled.
  std::vector<Envelope> poll(Nanos deadline);
  std::vector<Envelope> try_poll();

  void cancel();
  bool cancelled() const;
  /// Wakes a blocked poll without delivering anything.
  void interrupt();
  /// Signals `n` on every enqueue, in addition to waking poll().
  void set_notifier(std::shared_ptr<Notifier> n);

  const std::string& prefix() const { return prefix_; }
  std::uint64_t dropped() const;
  std::size_t pending() const;

 private:
  friend class Bus;
  bool push(Envelope env);
  std::vector<Envelope> drain_locked();

  const Bus& bus_;
  std::string prefix_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> queue_;
  std::shared_ptr<Notifier> notifier_;
  std::uint64_t dropped_ = 0;
  bool cancelled_ = false;
  bool interrupted_ = false;
};

/// A publisher/subscriber endpoint attached to a bus.
class Endpoint {
 public:
  Endpoint(Bus& bus, EndpointId id);

  EndpointId id() const { return id_; }
  bool is_open() const;
  /// Closes the endpoint and cancels its subscriptions.
  void close();

  /// Non-blocking fan-out to every matching subscription.
  PublishAck publish(std::string_view topic, PayloadPtr payload, std::uint32_t stream_id = 0,
                     std::optional<std::uint64_t> origin_seq = std::nullopt);

  std::shared_ptr<Subscription> subscribe(std::string_view prefix);

 private:
  Bus& bus_;
  EndpointId id_;
  mutable std::mutex mu_;
  bool open_ = true;
  std::map<std::string, std::uint64_t, std::less<>> next_seq_;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

/// In-process many-to-many publish/subscribe bus.
class Bus {
 public:
  explicit Bus(const Clock& clock, BusOptions options = {});

  std::shared_ptr<Endpoint> open_endpoint();
  const Clock& clock() const { return clock_; }
  std::uint64_t total_dropped() const;

 private:
  friend class Endpoint;
  std::size_t fan_out(const Envelope& proto);
  void attach(std::shared_ptr<Subscription> sub);
  void detach(const Subscription* sub);

  const Clock& clock_;
  BusOptions options_;
  mutable std::shared_mutex mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  EndpointId next_endpoint_ = 1;
};

}  // namespace uavnet::bus

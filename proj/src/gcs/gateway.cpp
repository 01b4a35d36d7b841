#include "uavnet/gcs/gateway.hpp"

#include <atomic>
#include <deque>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

namespace uavnet::gcs {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

constexpr std::size_t kMaxQueuedFrames = 4096;

double number_field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number()) throw GcsError(std::string("cmd.") + key + " must be a number");
  return it->get<double>();
}

nlohmann::json error_frame(const std::string& message) {
  return {{"type", "error"}, {"message", message}};
}

}  // namespace

flightsim::Command parse_command_json(const nlohmann::json& cmd) {
  using flightsim::Command;
  if (!cmd.is_object()) throw GcsError("cmd must be an object");
  auto kind_it = cmd.find("kind");
  if (kind_it == cmd.end() || !kind_it->is_string()) throw GcsError("cmd.kind must be a string");
  const auto kind = kind_it->get<std::string>();
  if (kind == "arm") return Command::arm();
  if (kind == "land") return Command::land();
  if (kind == "takeoff") return Command::takeoff(number_field(cmd, "alt_m"));
  if (kind == "goto")
    return Command::go_to({number_field(cmd, "lat"), number_field(cmd, "lon"), number_field(cmd, "alt_m")});
  if (kind == "move")
    return Command::move(number_field(cmd, "dx"), number_field(cmd, "dy"), number_field(cmd, "dz"));
  if (kind == "set_speed") return Command::set_speed(number_field(cmd, "speed_mps"));
  throw GcsError("cmd.kind: unknown command kind '" + kind + "'");
}

class Session;

struct Gateway::Impl {
  GroundStation& gcs;
  std::string address;
  std::uint16_t requested_port;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;
  std::atomic<std::uint16_t> bound_port{0};
  std::set<std::shared_ptr<Session>> sessions;  // io thread only
  std::atomic<std::size_t> session_count{0};
  std::atomic<std::uint64_t> commands{0};
  std::atomic<std::uint64_t> errors{0};
  std::mutex handler_mu;
  ControlHandler control;
  bool running = false;

  Impl(GroundStation& g, std::string addr, std::uint16_t port)
      : gcs(g), address(std::move(addr)), requested_port(port) {}

  void do_accept();
  void handle(Session& s, const std::string& text);
  void remove(const std::shared_ptr<Session>& s) {
    if (sessions.erase(s)) session_count = sessions.size();
  }
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, Gateway::Impl& gw) : ws_(std::move(socket)), gw_(gw) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(beast::bind_front_handler(&Session::on_accept, shared_from_this()));
  }

  void send(std::shared_ptr<const std::string> text) {
    if (!open_) return;
    if (out_.size() >= kMaxQueuedFrames) return;  // slow client: shed load
    out_.push_back(std::move(text));
    if (out_.size() == 1) do_write();
  }

  bool wants(const std::string& type) const { return topics_.empty() || topics_.count(type); }
  void subscribe(std::set<std::string> topics) { topics_ = std::move(topics); }

  void close() {
    if (!open_) return;
    open_ = false;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    open_ = true;
    gw_.sessions.insert(shared_from_this());
    gw_.session_count = gw_.sessions.size();
    do_read();
  }

  void do_read() {
    ws_.async_read(buf_, beast::bind_front_handler(&Session::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      open_ = false;
      gw_.remove(shared_from_this());
      return;
    }
    const std::string text = beast::buffers_to_string(buf_.data());
    buf_.consume(buf_.size());
    gw_.handle(*this, text);
    do_read();
  }

  void do_write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*out_.front()),
                    beast::bind_front_handler(&Session::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    if (ec) {
      open_ = false;
      out_.clear();
      gw_.remove(shared_from_this());
      return;
    }
    out_.pop_front();
    if (!out_.empty()) do_write();
  }

  websocket::stream<beast::tcp_stream> ws_;
  Gateway::Impl& gw_;
  beast::flat_buffer buf_;
  std::deque<std::shared_ptr<const std::string>> out_;
  std::set<std::string> topics_;
  bool open_ = false;
};

void Gateway::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<Session>(std::move(socket), *this)->run();
    do_accept();
  });
}

void Gateway::Impl::handle(Session& s, const std::string& text) {
  auto reply_error = [&](const std::string& msg) {
    ++errors;
    s.send(std::make_shared<const std::string>(error_frame(msg).dump()));
  };
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return reply_error("malformed JSON");
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return reply_error("message must be an object with a string 'type'");
  const auto type = msg["type"].get<std::string>();
  if (type == "command") {
    if (!msg.contains("uav_id") || !msg["uav_id"].is_number_integer())
      return reply_error("uav_id must be an integer");
    if (!msg.contains("cmd")) return reply_error("cmd is required");
    try {
      auto cmd = parse_command_json(msg["cmd"]);
      gcs.send_command(msg["uav_id"].get<int>(), cmd);
      ++commands;
    } catch (const GcsError& e) {
      reply_error(e.what());
    }
  } else if (type == "subscribe") {
    if (!msg.contains("topics") || !msg["topics"].is_array())
      return reply_error("topics must be an array of strings");
    std::set<std::string> topics;
    for (const auto& t : msg["topics"]) {
      if (!t.is_string()) return reply_error("topics must be an array of strings");
      topics.insert(t.get<std::string>());
    }
    s.subscribe(std::move(topics));
  } else if (type == "control") {
    if (!msg.contains("action") || !msg["action"].is_string()) return reply_error("action must be a string");
    std::lock_guard lk(handler_mu);
    if (!control || !control(msg["action"].get<std::string>()))
      reply_error("control action rejected");
  } else {
    reply_error("unknown message type '" + type + "'");
  }
}

Gateway::Gateway(GroundStation& gcs, std::string address, std::uint16_t port)
    : impl_(std::make_unique<Impl>(gcs, std::move(address), port)) {
  gcs.set_event_sink([this](const nlohmann::json& ev) { broadcast(ev); });
}

Gateway::~Gateway() {
  impl_->gcs.set_event_sink(nullptr);
  stop();
}

void Gateway::start() {
  if (impl_->running) throw GcsError("gateway already started");
  try {
    const tcp::endpoint ep{net::ip::make_address(impl_->address), impl_->requested_port};
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(net::socket_base::max_listen_connections);
    impl_->bound_port = impl_->acceptor.local_endpoint().port();
  } catch (const boost::system::system_error& e) {
    throw GcsError(std::string("gateway bind failed: ") + e.what());
  }
  impl_->running = true;
  impl_->do_accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
}

void Gateway::stop() {
  if (!impl_->running) return;
  impl_->running = false;
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    for (const auto& s : impl_->sessions) s->close();
    impl_->sessions.clear();
    impl_->session_count = 0;
  });
  // Let close handshakes finish briefly, then stop the loop.
  net::steady_timer timer(impl_->ioc, std::chrono::milliseconds(200));
  timer.async_wait([this](beast::error_code) { impl_->ioc.stop(); });
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

std::uint16_t Gateway::port() const { return impl_->bound_port; }

void Gateway::broadcast(const nlohmann::json& ev) {
  if (!impl_->running) return;
  auto text = std::make_shared<const std::string>(ev.dump());
  std::string type = ev.contains("type") && ev["type"].is_string() ? ev["type"].get<std::string>() : "";
  net::post(impl_->ioc, [this, text, type = std::move(type)] {
    for (const auto& s : impl_->sessions)
      if (s->wants(type)) s->send(text);
  });
}

void Gateway::set_control_handler(ControlHandler h) {
  std::lock_guard lk(impl_->handler_mu);
  impl_->control = std::move(h);
}

std::size_t Gateway::session_count() const { return impl_->session_count; }
std::uint64_t Gateway::commands_accepted() const { return impl_->commands; }
std::uint64_t Gateway::errors_sent() const { return impl_->errors; }

}  // namespace uavnet::gcs

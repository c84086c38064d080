#include "gear/gateway.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "gear/analysis.hpp"
#include "gear/codec.hpp"
#include "gear/errors.hpp"
#include "gear/session.hpp"
#include "gear/sim.hpp"
#include "gear/trace.hpp"
#include "gear/wire.hpp"

namespace gear {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using asio::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxLineBytes = 1 << 20;

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  using LineHandler = std::function<void(const std::shared_ptr<Connection>&, std::string)>;
  using CloseHandler = std::function<void(std::uint64_t)>;

  Connection(std::uint64_t id, std::string name) : id_(id), name_(std::move(name)) {}
  virtual ~Connection() = default;

  virtual void start() = 0;
  /// Queues one line; the newline is added here.
  virtual void send_line(std::string line) = 0;
  /// Flushes queued output, then closes.
  virtual void close_after_flush() = 0;
  virtual void close_now() = 0;

  std::uint64_t id() const { return id_; }
  const std::string& name() const { return name_; }

  void send(WireMessage msg) {
    msg.seq = ++out_seq;
    send_line(encode(msg));
  }

  bool hello_done = false;
  std::optional<std::uint64_t> last_seq;
  std::uint64_t out_seq = 0;
  std::uint64_t line_no = 0;

  LineHandler on_line;
  CloseHandler on_close;

 private:
  std::uint64_t id_;
  std::string name_;
};

class TcpConnection : public Connection {
 public:
  TcpConnection(std::uint64_t id, tcp::socket socket)
      : Connection(id, "tcp-" + std::to_string(id)),
        socket_(std::move(socket)),
        buffer_(kMaxLineBytes) {}

  void start() override { read(); }

  void send_line(std::string line) override {
    if (closed_) return;
    line.push_back('\n');
    queue_.push_back(std::move(line));
    if (queue_.size() == 1) write();
  }

  void close_after_flush() override {
    closing_ = true;
    if (queue_.empty()) close_now();
  }

  void close_now() override {
    if (closed_) return;
    closed_ = true;
    boost::system::error_code ec;
    socket_.shutdown(tcp::socket::shutdown_both, ec);
    socket_.close(ec);
    if (on_close) on_close(id());
  }

 private:
  void read() {
    auto self = std::static_pointer_cast<TcpConnection>(shared_from_this());
    asio::async_read_until(socket_, buffer_, '\n',
                           [self](boost::system::error_code ec, std::size_t n) {
                             if (ec) {
                               self->close_now();
                               return;
                             }
                             std::string line(asio::buffers_begin(self->buffer_.data()),
                                              asio::buffers_begin(self->buffer_.data()) + n - 1);
                             self->buffer_.consume(n);
                             if (self->on_line) self->on_line(self, std::move(line));
                             if (!self->closed_ && !self->closing_) self->read();
                           });
  }

  void write() {
    auto self = std::static_pointer_cast<TcpConnection>(shared_from_this());
    asio::async_write(socket_, asio::buffer(queue_.front()),
                      [self](boost::system::error_code ec, std::size_t) {
                        if (ec) {
                          self->close_now();
                          return;
                        }
                        self->queue_.pop_front();
                        if (!self->queue_.empty()) {
                          self->write();
                        } else if (self->closing_) {
                          self->close_now();
                        }
                      });
  }

  tcp::socket socket_;
  asio::streambuf buffer_;
  std::deque<std::string> queue_;
  bool closing_ = false;
  bool closed_ = false;
};

std::string content_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript; charset=utf-8";
  if (ext == ".css") return "text/css; charset=utf-8";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

/// Resolves a request target below `root`; nullopt for anything that would
/// escape it or does not exist.
std::optional<std::filesystem::path> static_file(const std::string& root, std::string target) {
  if (root.empty()) return std::nullopt;
  if (auto q = target.find_first_of("?#"); q != std::string::npos) target.resize(q);
  if (target.empty() || target.front() != '/') return std::nullopt;
  if (target.back() == '/') target += "index.html";
  const std::filesystem::path rel = std::filesystem::path(target.substr(1)).lexically_normal();
  if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") return std::nullopt;
  std::filesystem::path full = std::filesystem::path(root) / rel;
  std::error_code ec;
  if (!std::filesystem::is_regular_file(full, ec)) return std::nullopt;
  return full;
}

class WsConnection : public Connection {
 public:
  WsConnection(std::uint64_t id, tcp::socket socket, std::string path, std::string static_root,
               std::function<void(const std::shared_ptr<Connection>&)> on_open)
      : Connection(id, "ws-" + std::to_string(id)),
        ws_(std::move(socket)),
        path_(std::move(path)),
        static_root_(std::move(static_root)),
        on_open_(std::move(on_open)) {}

  void start() override {
    auto self = std::static_pointer_cast<WsConnection>(shared_from_this());
    beast::get_lowest_layer(ws_).expires_after(std::chrono::seconds(30));
    http::async_read(ws_.next_layer(), buffer_, request_,
                     [self](beast::error_code ec, std::size_t) {
                       if (ec) {
                         self->close_now();
                         return;
                       }
                       self->on_request();
                     });
  }

  void send_line(std::string line) override {
    if (closed_ || !open_) return;
    line.push_back('\n');
    queue_.push_back(std::move(line));
    if (queue_.size() == 1) write();
  }

  void close_after_flush() override {
    closing_ = true;
    if (queue_.empty()) finish();
  }

  void close_now() override {
    if (closed_) return;
    closed_ = true;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close();
    if (open_ && on_close) on_close(id());
  }

 private:
  void on_request() {
    auto self = std::static_pointer_cast<WsConnection>(shared_from_this());
    if (websocket::is_upgrade(request_)) {
      std::string target(request_.target());
      if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
      if (target != path_) {
        respond(http::status::not_found, "text/plain", "unknown websocket path\n");
        return;
      }
      beast::get_lowest_layer(ws_).expires_never();
      ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
      ws_.text(true);
      ws_.async_accept(request_, [self](beast::error_code ec) {
        if (ec) {
          self->close_now();
          return;
        }
        self->open_ = true;
        if (self->on_open_) self->on_open_(self);
        self->read();
      });
      return;
    }
    if (request_.method() != http::verb::get && request_.method() != http::verb::head) {
      respond(http::status::method_not_allowed, "text/plain", "method not allowed\n");
      return;
    }
    auto file = static_file(static_root_, std::string(request_.target()));
    if (!file) {
      respond(http::status::not_found, "text/plain", "not found\n");
      return;
    }
    std::ifstream in(*file, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    respond(http::status::ok, content_type(*file), body.str());
  }

  void respond(http::status status, const std::string& type, std::string body) {
    auto self = std::static_pointer_cast<WsConnection>(shared_from_this());
    auto res = std::make_shared<http::response<http::string_body>>(status, request_.version());
    res->set(http::field::server, "gear");
    res->set(http::field::content_type, type);
    res->keep_alive(false);
    if (request_.method() != http::verb::head) res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(ws_.next_layer(), *res, [self, res](beast::error_code, std::size_t) {
      self->close_now();
    });
  }

  void read() {
    auto self = std::static_pointer_cast<WsConnection>(shared_from_this());
    ws_.async_read(buffer_, [self](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close_now();
        return;
      }
      std::string data = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      // One frame may carry several lines or a single line without newline.
      std::size_t start = 0;
      while (start <= data.size() && !self->closed_ && !self->closing_) {
        const auto nl = data.find('\n', start);
        const auto end = nl == std::string::npos ? data.size() : nl;
        if (end > start || nl != std::string::npos) {
          if (self->on_line) self->on_line(self, data.substr(start, end - start));
        }
        if (nl == std::string::npos) break;
        start = nl + 1;
        if (start == data.size()) break;
      }
      if (!self->closed_ && !self->closing_) self->read();
    });
  }

  void write() {
    auto self = std::static_pointer_cast<WsConnection>(shared_from_this());
    ws_.async_write(asio::buffer(queue_.front()), [self](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close_now();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) {
        self->write();
      } else if (self->closing_) {
        self->finish();
      }
    });
  }

  void finish() {
    if (closed_) return;
    auto self = std::static_pointer_cast<WsConnection>(shared_from_this());
    ws_.async_close(websocket::close_code::normal,
                    [self](beast::error_code) { self->close_now(); });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::string path_;
  std::string static_root_;
  std::function<void(const std::shared_ptr<Connection>&)> on_open_;
  std::deque<std::string> queue_;
  bool open_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

WireMessage fault_message(const std::string& code, const std::string& message,
                          std::optional<std::uint64_t> line = std::nullopt) {
  return {MessageType::Fault, 0, FaultInfo{code, message, line}};
}

}  // namespace

struct Gateway::Impl {
  explicit Impl(GatewayOptions o)
      : options(std::move(o)),
        orchestrator(options.plan, options.config.run.orchestrator),
        assembler(options.config.run.assemble_delay_us),
        tcp_acceptor(io),
        ws_acceptor(io),
        tick_timer(io),
        signals(io) {
    if (options.simulate) sim.emplace(options.plan, options.config.run.sim, options.seed);
  }

  GatewayOptions options;
  asio::io_context io;
  Orchestrator orchestrator;
  std::optional<Simulator> sim;
  SimulatedAssembler assembler;
  tcp::acceptor tcp_acceptor;
  tcp::acceptor ws_acceptor;
  asio::steady_timer tick_timer;
  asio::signal_set signals;
  std::thread thread;

  mutable std::mutex state_mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;
  bool started = false;

  std::ofstream trace_stream;
  std::optional<TraceWriter> trace;
  std::map<std::uint64_t, std::shared_ptr<Connection>> connections;
  std::uint64_t next_connection_id = 0;
  std::uint64_t sim_seq = 0;
  std::uint64_t engine_seq = 0;
  std::chrono::steady_clock::time_point epoch;
  std::int64_t next_frame_us = 0;
  std::int64_t next_snapshot_us = 0;
  std::uint16_t bound_tcp = 0;
  std::uint16_t bound_ws = 0;

  std::int64_t now_us() const {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now() - epoch)
        .count();
  }

  void open_trace() {
    if (options.trace_path.empty()) return;
    trace_stream.open(options.trace_path, std::ios::trunc);
    if (!trace_stream) throw InputError("cannot write trace file '" + options.trace_path + "'");
    TraceHeader header;
    header.producer = "serve";
    header.plan = plan_to_json(options.plan);
    header.seed = options.seed;
    header.orchestrator = options.config.run.orchestrator;
    header.session_start_us = 0;
    header.extra = {{"simulate", options.simulate}};
    if (sim) header.extra["scene"] = sim->scene();
    trace.emplace(trace_stream, header);
  }

  void bind(tcp::acceptor& acceptor, std::uint16_t port, std::uint16_t& bound) {
    boost::system::error_code ec;
    const auto address = asio::ip::make_address(options.config.gateway.host, ec);
    if (ec) throw InputError("gateway: bad host '" + options.config.gateway.host + "'");
    const tcp::endpoint endpoint(address, port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint, ec);
    if (ec) {
      throw InputError("gateway: cannot bind " + options.config.gateway.host + ":" +
                       std::to_string(port) + ": " + ec.message());
    }
    acceptor.listen();
    bound = acceptor.local_endpoint().port();
  }

  void record(Direction dir, const std::string& channel, const WireMessage& msg, std::int64_t t) {
    if (trace) trace->append({t, dir, channel, msg});
  }

  /// Sends to every connection that completed HELLO and records one copy.
  void broadcast(const WireMessage& msg, std::int64_t t) {
    WireMessage traced = msg;
    traced.seq = ++engine_seq;
    record(Direction::Out, "engine", traced, t);
    for (auto& [id, conn] : connections) {
      if (conn->hello_done) conn->send(msg);
    }
  }

  void reply(const std::shared_ptr<Connection>& conn, WireMessage msg, std::int64_t t) {
    conn->send(msg);
    msg.seq = conn->out_seq;
    record(Direction::Out, conn->name(), msg, t);
  }

  WireMessage metrics_message() const {
    return {MessageType::Metrics, 0, session_metrics(orchestrator.log(), options.plan, {})};
  }

  WireMessage snapshot_message(std::int64_t t) const {
    json payload = {{"timestamp_us", t},
                    {"phase", to_string(orchestrator.phase())},
                    {"plan_id", options.plan.plan_id()}};
    if (sim) {
      payload["scene"] = sim->scene();
      payload["robot_pose_m"] = sim->robot_position();
    }
    return {MessageType::SceneSnapshot, 0, std::move(payload)};
  }

  WireMessage config_message() const {
    json parts = json::array();
    for (const auto& step : options.plan.steps()) {
      parts.push_back({{"step_id", step.step_id},
                       {"label", step.part_label},
                       {"source", to_string(step.source)},
                       {"prerequisites", step.prerequisites}});
    }
    return {MessageType::Config,
            0,
            {{"version", kProtocolVersion},
             {"plan_id", options.plan.plan_id()},
             {"parts", std::move(parts)},
             {"stream", options.config.run.orchestrator.stream},
             {"user_camera", options.config.run.sim.cameras.user},
             {"orchestrator", options.config.run.orchestrator}}};
  }

  /// Runs one input through the orchestrator and fans out what it logged.
  void feed(const OrchestratorInput& input, std::int64_t t) {
    std::optional<RobotCommand> command;
    bool metrics_changed = false;
    {
      std::lock_guard lock(state_mutex);
      const std::size_t before = orchestrator.log().size();
      command = orchestrator.dispatch(input, t);
      const auto& log = orchestrator.log();
      for (std::size_t i = before; i < log.size(); ++i) {
        if (auto out = outbound_for(log[i], orchestrator.outstanding_command())) {
          broadcast(*out, log[i].timestamp_us);
        }
        const auto& p = log[i].payload;
        metrics_changed = metrics_changed || std::holds_alternative<ValidationRecord>(p) ||
                          std::holds_alternative<AssemblyMark>(p);
      }
      if (metrics_changed) broadcast(metrics_message(), t);
    }
    if (command && sim) sim->command_fetch(command->label);
  }

  void feed_from_sim(const OrchestratorInput& input, std::int64_t t) {
    WireMessage msg = to_wire(input, t);
    msg.seq = ++sim_seq;
    record(Direction::In, "sim", msg, t);
    feed(input, t);
  }

  void handle_line(const std::shared_ptr<Connection>& conn, std::string line) {
    ++conn->line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) return;
    const std::int64_t t = now_us();

    WireMessage msg;
    try {
      msg = decode(line);
    } catch (const UnknownMessageType& e) {
      reply(conn, fault_message("unknown_type", e.what(), conn->line_no), t);
      conn->close_after_flush();
      return;
    } catch (const ProtocolError& e) {
      reply(conn, fault_message("malformed", e.what(), conn->line_no), t);
      return;
    }

    if (conn->last_seq && msg.seq != *conn->last_seq + 1) {
      reply(conn,
            fault_message("seq_gap",
                          "expected seq " + std::to_string(*conn->last_seq + 1) + ", got " +
                              std::to_string(msg.seq),
                          conn->line_no),
            t);
    }
    conn->last_seq = msg.seq;

    if (!conn->hello_done) {
      if (msg.type != MessageType::Hello) {
        reply(conn, fault_message("hello_required", "first message must be HELLO", conn->line_no),
              t);
        return;
      }
      Hello hello;
      try {
        hello = msg.payload.get<Hello>();
      } catch (const std::exception& e) {
        reply(conn, fault_message("malformed", e.what(), conn->line_no), t);
        return;
      }
      if (hello.version != kProtocolVersion) {
        reply(conn,
              fault_message("version_mismatch",
                            "server speaks version " + std::to_string(kProtocolVersion) +
                                ", client sent " + std::to_string(hello.version),
                            conn->line_no),
              t);
        conn->close_after_flush();
        return;
      }
      record(Direction::In, conn->name(), msg, t);
      conn->hello_done = true;
      std::lock_guard lock(state_mutex);
      reply(conn, {MessageType::Hello, 0, Hello{kProtocolVersion, "engine"}}, t);
      reply(conn, config_message(), t);
      reply(conn, snapshot_message(t), t);
      reply(conn, metrics_message(), t);
      return;
    }
    if (msg.type == MessageType::Hello) {
      reply(conn, fault_message("duplicate_hello", "HELLO already received", conn->line_no), t);
      return;
    }

    record(Direction::In, conn->name(), msg, t);
    std::optional<OrchestratorInput> input;
    try {
      input = to_orchestrator_input(msg);
    } catch (const ProtocolError& e) {
      reply(conn, fault_message("bad_payload", e.what(), conn->line_no), t);
      return;
    }
    if (!input) return;
    feed(*input, t);
    // A client-side assembly mark also moves the simulated part.
    if (const auto* mark = std::get_if<AssemblyInput>(&*input); mark != nullptr && sim) {
      const auto* step = options.plan.find_step(mark->step_id);
      if (step != nullptr && orchestrator.plan_state().assembled.contains(step->step_id)) {
        const ScenePart* part = sim->scene().find(step->part_label);
        if (part != nullptr && !part->assembled) sim->mark_assembled(step->part_label);
      }
    }
  }

  void accept(tcp::acceptor& acceptor, bool websocket) {
    acceptor.async_accept([this, &acceptor, websocket](boost::system::error_code ec,
                                                       tcp::socket socket) {
      if (ec) return;  // acceptor closed
      const std::uint64_t id = ++next_connection_id;
      std::shared_ptr<Connection> conn;
      if (websocket) {
        conn = std::make_shared<WsConnection>(
            id, std::move(socket), options.config.gateway.ws_path,
            options.config.gateway.static_dir,
            [this](const std::shared_ptr<Connection>& c) { connections[c->id()] = c; });
      } else {
        conn = std::make_shared<TcpConnection>(id, std::move(socket));
        connections[id] = conn;
      }
      conn->on_line = [this](const std::shared_ptr<Connection>& c, std::string line) {
        handle_line(c, std::move(line));
      };
      conn->on_close = [this](std::uint64_t cid) { connections.erase(cid); };
      conn->start();
      accept(acceptor, websocket);
    });
  }

  void tick() {
    const std::int64_t t = now_us();
    if (sim) {
      const auto& run = options.config.run;
      const std::int64_t tick_us = run.sim.tick_us;
      while (sim->now_us() + tick_us <= t) {
        for (const auto& ev : sim->step(tick_us)) feed_from_sim(RobotEventInput{ev}, t);
        if (options.auto_assemble) {
          for (const auto& step_id : assembler.take_due(sim->now_us())) {
            sim->mark_assembled(options.plan.step(step_id).part_label);
            feed_from_sim(AssemblyInput{step_id}, t);
          }
          assembler.schedule(options.plan, orchestrator.plan_state(), sim->scene(),
                             sim->now_us());
        }
        if (sim->now_us() >= next_frame_us) {
          next_frame_us = sim->now_us() + run.frame_period_us;
          feed_from_sim(DetectionInput{sim->render(Viewpoint::User)}, t);
          feed_from_sim(DetectionInput{sim->render(Viewpoint::Robot)}, t);
        }
      }
    }
    if (t >= next_snapshot_us) {
      next_snapshot_us = t + options.config.gateway.snapshot_period_us;
      std::lock_guard lock(state_mutex);
      broadcast(snapshot_message(t), t);
    }
    tick_timer.expires_after(std::chrono::microseconds(options.config.run.sim.tick_us));
    tick_timer.async_wait([this](boost::system::error_code ec) {
      if (!ec) tick();
    });
  }

  void shutdown() {
    boost::system::error_code ec;
    tick_timer.cancel();
    signals.cancel(ec);
    tcp_acceptor.close(ec);
    ws_acceptor.close(ec);
    auto open = connections;
    for (auto& [id, conn] : open) conn->close_now();
    connections.clear();
    io.stop();
  }
};

Gateway::Gateway(GatewayOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  Impl& s = *impl_;
  if (s.started) return;
  s.bind(s.tcp_acceptor, s.options.config.gateway.tcp_port, s.bound_tcp);
  s.bind(s.ws_acceptor, s.options.config.gateway.ws_port, s.bound_ws);
  s.open_trace();
  s.epoch = std::chrono::steady_clock::now();
  s.orchestrator.start_session(0);
  s.accept(s.tcp_acceptor, false);
  s.accept(s.ws_acceptor, true);
  asio::post(s.io, [&s] { s.tick(); });
  s.started = true;
  s.thread = std::thread([&s] {
    s.io.run();
    std::lock_guard lock(s.state_mutex);
    s.stopped = true;
    s.stopped_cv.notify_all();
  });
}

void Gateway::stop() {
  Impl& s = *impl_;
  if (!s.started) return;
  asio::post(s.io, [&s] { s.shutdown(); });
  if (s.thread.joinable()) s.thread.join();
  s.started = false;
}

void Gateway::wait() {
  Impl& s = *impl_;
  if (!s.started) return;
  asio::post(s.io, [&s] {
    s.signals.add(SIGINT);
    s.signals.add(SIGTERM);
    s.signals.async_wait([&s](boost::system::error_code ec, int) {
      if (!ec) s.shutdown();
    });
  });
  std::unique_lock lock(s.state_mutex);
  s.stopped_cv.wait(lock, [&s] { return s.stopped; });
}

std::uint16_t Gateway::tcp_port() const { return impl_->bound_tcp; }
std::uint16_t Gateway::ws_port() const { return impl_->bound_ws; }

std::vector<EventLogRecord> Gateway::event_log() const {
  std::lock_guard lock(impl_->state_mutex);
  return impl_->orchestrator.log();
}

}  // namespace gear

#include "bbranch/gateway.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "json.hpp"

#include "bbranch/protocol.hpp"
#include "bbranch/script.hpp"

namespace bbranch {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

// ---------------------------------------------------------------------------
// Configuration

std::vector<std::string> GatewayConfig::problems() const {
  std::vector<std::string> out;
  if (!(tick_rate > 0.0) || tick_rate > 1000.0) out.push_back("tick_rate must be in (0, 1000] Hz");
  if (state_queue == 0) out.push_back("state_queue must be at least 1");
  if (translation_threads == 0) out.push_back("translation_threads must be at least 1");
  if (max_line_bytes < 16) out.push_back("max_line_bytes must be at least 16");
  for (auto& p : sim.problems()) out.push_back("sim." + p);
  return out;
}

void GatewayConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ConfigError("invalid gateway config: " + p.front());
}

GatewayConfig gateway_config_from_json(std::string_view text, GatewayConfig base) {
  using nlohmann::json;
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("config file is not a JSON object");
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "host") base.host = value.get<std::string>();
      else if (key == "port") base.tcp_port = value.get<std::uint16_t>();
      else if (key == "ws_port") base.ws_port = value.get<std::uint16_t>();
      else if (key == "tick_rate") base.tick_rate = value.get<double>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "state_queue") base.state_queue = value.get<std::size_t>();
      else if (key == "translation_threads") base.translation_threads = value.get<std::size_t>();
      else if (key == "opponent_policy") {
        auto p = policy_from_string(value.get<std::string>());
        if (!p) throw ConfigError("unknown opponent_policy " + value.dump());
        base.opponent_policy = *p;
      } else if (key == "sim") {
        base.sim = value.get<SimConfig>();
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
  base.validate();
  return base;
}

// ---------------------------------------------------------------------------
// Sessions

namespace {

class Session : public std::enable_shared_from_this<Session> {
 public:
  using Handler = std::function<void(const std::shared_ptr<Session>&, std::string)>;
  using Closer = std::function<void(std::uint64_t)>;

  Session(std::uint64_t id, asio::any_io_executor io, asio::thread_pool& pool, std::size_t state_cap)
      : id_(id), strand_(std::move(io)), translate_(asio::make_strand(pool.get_executor())),
        state_cap_(state_cap) {}
  virtual ~Session() = default;

  std::uint64_t id() const { return id_; }
  asio::strand<asio::thread_pool::executor_type>& translation_strand() { return translate_; }

  std::atomic<bool> want_state{false};
  std::atomic<bool> want_branch{false};
  std::atomic<bool> want_events{false};

  virtual void start(Handler on_line, Closer on_close) = 0;
  virtual void close() = 0;

  /// Thread-safe. State messages are dropped oldest-first past the cap.
  void deliver(std::string message, bool is_state) {
    asio::post(strand_, [self = shared_from_this(), m = std::move(message), is_state]() mutable {
      self->enqueue(std::move(m), is_state);
    });
  }

 protected:
  struct Out {
    std::string text;
    bool state;
  };

  virtual void write_front() = 0;

  void enqueue(std::string m, bool is_state) {
    if (closed_ || close_when_drained_) return;
    queue_.push_back({std::move(m), is_state});
    if (is_state && ++states_ > state_cap_) {
      // Never touch the entry currently being written.
      for (auto it = queue_.begin() + (writing_ ? 1 : 0); it != queue_.end(); ++it) {
        if (it->state) {
          queue_.erase(it);
          --states_;
          break;
        }
      }
    }
    if (!writing_) {
      writing_ = true;
      write_front();
    }
  }

  void written(const beast::error_code& ec) {
    if (ec) {
      fail();
      return;
    }
    if (queue_.front().state) --states_;
    queue_.pop_front();
    if (!queue_.empty()) {
      write_front();
      return;
    }
    writing_ = false;
    if (close_when_drained_) fail();
  }

  void fail() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    if (on_close_) on_close_(id_);
    close_transport();
  }

  virtual void close_transport() = 0;

  std::uint64_t id_;
  asio::any_io_executor strand_;  // the socket's own strand
  asio::strand<asio::thread_pool::executor_type> translate_;
  std::size_t state_cap_;
  std::deque<Out> queue_;
  std::size_t states_ = 0;
  bool writing_ = false;
  bool closed_ = false;
  bool close_when_drained_ = false;
  Handler on_line_;
  Closer on_close_;
};

class TcpSession final : public Session {
 public:
  TcpSession(std::uint64_t id, tcp::socket socket, asio::thread_pool& pool, std::size_t state_cap,
             std::size_t max_line)
      : Session(id, socket.get_executor(), pool, state_cap), socket_(std::move(socket)), buffer_(max_line) {}

  void start(Handler on_line, Closer on_close) override {
    on_line_ = std::move(on_line);
    on_close_ = std::move(on_close);
    asio::dispatch(strand_, [self = std::static_pointer_cast<TcpSession>(shared_from_this())] { self->read(); });
  }

  void close() override {
    asio::post(strand_, [self = shared_from_this()] { static_cast<TcpSession&>(*self).fail(); });
  }

 private:
  void read() {
    asio::async_read_until(
        socket_, buffer_, '\n',
        asio::bind_executor(strand_, [self = std::static_pointer_cast<TcpSession>(shared_from_this())](
                                         const beast::error_code& ec, std::size_t n) { self->on_read(ec, n); }));
  }

  void on_read(const beast::error_code& ec, std::size_t n) {
    if (closed_) return;
    if (ec == asio::error::not_found) {
      // Flush the error before hanging up.
      enqueue(encode_error("line too long"), false);
      close_when_drained_ = true;
      return;
    }
    if (ec) {
      fail();
      return;
    }
    std::string line(asio::buffers_begin(buffer_.data()), asio::buffers_begin(buffer_.data()) + static_cast<std::ptrdiff_t>(n));
    buffer_.consume(n);
    line.pop_back();
    on_line_(shared_from_this(), std::move(line));
    read();
  }

  void write_front() override {
    current_ = queue_.front().text + '\n';
    asio::async_write(socket_, asio::buffer(current_),
                      asio::bind_executor(strand_, [self = shared_from_this()](const beast::error_code& ec, std::size_t) {
                        static_cast<TcpSession&>(*self).written(ec);
                      }));
  }

  void close_transport() override {
    beast::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
  }

  tcp::socket socket_;
  asio::streambuf buffer_;
  std::string current_;
};

class WsSession final : public Session {
 public:
  WsSession(std::uint64_t id, tcp::socket socket, asio::thread_pool& pool, std::size_t state_cap, std::size_t max_line)
      : Session(id, socket.get_executor(), pool, state_cap), ws_(std::move(socket)) {
    ws_.read_message_max(max_line);
    ws_.text(true);
  }

  void start(Handler on_line, Closer on_close) override {
    on_line_ = std::move(on_line);
    on_close_ = std::move(on_close);
    asio::dispatch(strand_, [self = std::static_pointer_cast<WsSession>(shared_from_this())] {
      self->ws_.async_accept(asio::bind_executor(self->strand_, [self](const beast::error_code& ec) {
        if (ec) self->fail();
        else {
          self->accepted_ = true;
          self->read();
          if (!self->queue_.empty() && !self->writing_) {
            self->writing_ = true;
            self->write_front();
          }
        }
      }));
    });
  }

  void close() override {
    asio::post(strand_, [self = shared_from_this()] { static_cast<WsSession&>(*self).fail(); });
  }

 private:
  void read() {
    ws_.async_read(buffer_, asio::bind_executor(strand_, [self = std::static_pointer_cast<WsSession>(shared_from_this())](
                                                             const beast::error_code& ec, std::size_t) {
                     self->on_read(ec);
                   }));
  }

  void on_read(const beast::error_code& ec) {
    if (closed_) return;
    if (ec) {
      fail();
      return;
    }
    std::string msg = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    on_line_(shared_from_this(), std::move(msg));
    read();
  }

  void write_front() override {
    if (!accepted_) {
      writing_ = false;
      return;
    }
    ws_.async_write(asio::buffer(queue_.front().text),
                    asio::bind_executor(strand_, [self = shared_from_this()](const beast::error_code& ec, std::size_t) {
                      static_cast<WsSession&>(*self).written(ec);
                    }));
  }

  void close_transport() override {
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).socket().close(ignored);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  bool accepted_ = false;
};

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gateway

struct Gateway::Impl {
  struct GraftItem {
    std::weak_ptr<Session> origin;
    AgentId agent;
    BranchFragment fragment;
    std::string canonical;
    Clock::time_point received;
  };
  struct ErrorItem {
    std::weak_ptr<Session> origin;
    std::string message;
  };
  struct ResetItem {
    std::weak_ptr<Session> origin;
  };
  using InboxItem = std::variant<GraftItem, ErrorItem, ResetItem>;

  Impl(GatewayConfig c, std::shared_ptr<const Translator> t)
      : config(std::move(c)),
        translator(std::move(t)),
        pool(config.translation_threads),
        tcp_acceptor(io),
        ws_acceptor(io),
        match(config.sim, config.seed, config.opponent_policy) {
    log.header = {config.seed, config.sim, config.opponent_policy};
    latest_state = encode_state(match.state());
  }

  GatewayConfig config;
  std::shared_ptr<const Translator> translator;

  asio::io_context io;
  std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
  std::thread io_thread;
  asio::thread_pool pool;
  tcp::acceptor tcp_acceptor;
  tcp::acceptor ws_acceptor;
  std::optional<std::uint16_t> ws_bound;

  // Simulation state, guarded by sim_mutex.
  mutable std::mutex sim_mutex;
  Match match;
  EventLog log;
  std::atomic<bool> finished{false};
  std::atomic<Tick> current_tick{0};

  std::mutex state_mutex;
  std::string latest_state;

  std::mutex inbox_mutex;
  std::deque<InboxItem> inbox;

  std::mutex pending_mutex;
  std::condition_variable pending_cv;
  std::size_t pending = 0;

  mutable std::mutex sessions_mutex;
  std::map<std::uint64_t, std::shared_ptr<Session>> sessions;
  std::uint64_t next_session = 1;

  std::thread sim_thread;
  std::atomic<bool> running{false};
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopped = false;
  bool started = false;

  // -- network side ---------------------------------------------------------

  void listen(tcp::acceptor& acceptor, std::uint16_t port) {
    const tcp::endpoint ep(asio::ip::make_address(config.host), port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
  }

  void accept(tcp::acceptor& acceptor, bool websocket) {
    acceptor.async_accept(asio::make_strand(io), [this, &acceptor, websocket](beast::error_code ec, tcp::socket s) {
      if (ec) return;  // acceptor closed
      std::shared_ptr<Session> session;
      {
        std::lock_guard lock(sessions_mutex);
        const std::uint64_t id = next_session++;
        if (websocket) {
          session = std::make_shared<WsSession>(id, std::move(s), pool, config.state_queue, config.max_line_bytes);
        } else {
          session = std::make_shared<TcpSession>(id, std::move(s), pool, config.state_queue, config.max_line_bytes);
        }
        sessions[id] = session;
      }
      session->start([this](const std::shared_ptr<Session>& from, std::string line) { on_message(from, line); },
                     [this](std::uint64_t id) {
                       std::lock_guard lock(sessions_mutex);
                       sessions.erase(id);
                     });
      accept(acceptor, websocket);
    });
  }

  void on_message(const std::shared_ptr<Session>& from, const std::string& line) {
    if (blank(line)) return;
    DecodeResult decoded = decode_client_message(line);
    if (!decoded.message) {
      from->deliver(encode_error(decoded.error), false);
      return;
    }
    std::visit([&](auto& m) { handle(from, m); }, *decoded.message);
  }

  void handle(const std::shared_ptr<Session>& from, const SubscribeMessage& m) {
    from->want_state = m.channels.state;
    from->want_branch = m.channels.branch;
    from->want_events = m.channels.events;
    from->deliver(encode_ack(m.id), false);
    if (m.channels.state) {
      std::lock_guard lock(state_mutex);
      from->deliver(latest_state, true);
    }
  }

  void handle(const std::shared_ptr<Session>& from, const ResetMessage& m) {
    from->deliver(encode_ack(m.id), false);
    push(ResetItem{from});
  }

  void handle(const std::shared_ptr<Session>& from, CommandMessage& m) {
    if (blank(m.text)) {
      from->deliver(encode_error("empty command"), false);
      return;
    }
    if (finished) {
      from->deliver(encode_error("game finished; send reset to start a new one"), false);
      return;
    }
    from->deliver(encode_ack(m.id), false);
    {
      std::lock_guard lock(pending_mutex);
      ++pending;
    }
    const auto received = Clock::now();
    asio::post(from->translation_strand(),
               [this, weak = std::weak_ptr<Session>(from), agent = m.agent, text = std::move(m.text), received] {
                 translate(weak, agent, text, received);
               });
  }

  void translate(const std::weak_ptr<Session>& origin, AgentId agent, const std::string& text,
                 Clock::time_point received) {
    try {
      TranslationResult t = translator->translate(text);
      CompileResult compiled = compile(t.script);
      if (!compiled.ok()) throw TranslationError(TranslationError::Code::Configuration, describe(compiled.diagnostics));
      push(GraftItem{origin, agent, std::move(*compiled.fragment), std::move(t.canonical), received});
    } catch (const TranslationError& e) {
      push(ErrorItem{origin, std::string("translation failed: ") + e.what()});
    } catch (const std::exception& e) {
      push(ErrorItem{origin, std::string("internal error: ") + e.what()});
    }
    {
      std::lock_guard lock(pending_mutex);
      --pending;
    }
    pending_cv.notify_all();
  }

  void push(InboxItem item) {
    std::lock_guard lock(inbox_mutex);
    inbox.push_back(std::move(item));
  }

  std::vector<std::shared_ptr<Session>> snapshot_sessions() const {
    std::lock_guard lock(sessions_mutex);
    std::vector<std::shared_ptr<Session>> out;
    out.reserve(sessions.size());
    for (const auto& [_, s] : sessions) out.push_back(s);
    return out;
  }

  // -- simulation side (sim_mutex held) -------------------------------------

  void broadcast_state(const std::shared_ptr<Session>& also = nullptr) {
    std::string msg = encode_state(match.state());
    {
      std::lock_guard lock(state_mutex);
      latest_state = msg;
    }
    for (const auto& s : snapshot_sessions()) {
      if (s->want_state || s == also) s->deliver(msg, true);
    }
  }

  void boundary() {
    std::deque<InboxItem> items;
    {
      std::lock_guard lock(inbox_mutex);
      items.swap(inbox);
    }
    for (auto& item : items) {
      if (auto* g = std::get_if<GraftItem>(&item)) {
        auto origin = g->origin.lock();
        if (match.finished()) {
          if (origin) origin->deliver(encode_error("game finished; send reset to start a new one"), false);
          continue;
        }
        const Tick at = match.world().tick;
        const GraftReport report = match.graft(g->agent, g->fragment);
        if (auto problems = check_structure(match.branch(g->agent)); !problems.empty()) {
          std::cerr << "bbranch: branch invariant violated after graft: " << problems.front() << "\n";
        }
        log.records.push_back({at, GraftRecord{g->agent, g->canonical}});
        const double latency = std::chrono::duration<double, std::milli>(Clock::now() - g->received).count();
        const std::string msg = encode_graft(g->agent, report.rule, g->canonical, latency);
        for (const auto& s : snapshot_sessions()) {
          if (s->want_branch || s->want_events || s == origin) s->deliver(msg, false);
        }
      } else if (auto* e = std::get_if<ErrorItem>(&item)) {
        if (auto origin = e->origin.lock()) origin->deliver(encode_error(e->message), false);
      } else {
        log.records.push_back({match.world().tick, ResetRecord{}});
        match.reset();
        finished = false;
        current_tick = 0;
        broadcast_state(std::get<ResetItem>(item).origin.lock());
      }
    }
  }

  void step() {
    if (match.finished()) return;
    match.step();
    finished = match.finished();
    current_tick = match.world().tick;
    broadcast_state();
  }

  void run_clock() {
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / config.tick_rate));
    auto next = Clock::now();
    while (running) {
      {
        std::lock_guard lock(sim_mutex);
        boundary();
        step();
      }
      next += period;
      const auto now = Clock::now();
      if (next < now - 10 * period) next = now;  // fell far behind: do not burst
      std::this_thread::sleep_until(next);
    }
  }
};

Gateway::Gateway(GatewayConfig config, std::shared_ptr<const Translator> translator) {
  config.validate();
  if (!translator) throw ConfigError("gateway needs a translator");
  impl_ = std::make_unique<Impl>(std::move(config), std::move(translator));
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  Impl& m = *impl_;
  if (m.started) return;
  m.listen(m.tcp_acceptor, m.config.tcp_port);
  if (m.config.ws_port) {
    m.listen(m.ws_acceptor, *m.config.ws_port);
    m.ws_bound = m.ws_acceptor.local_endpoint().port();
    m.accept(m.ws_acceptor, true);
  }
  m.accept(m.tcp_acceptor, false);
  m.work.emplace(m.io.get_executor());
  m.io_thread = std::thread([&m] { m.io.run(); });
  m.started = true;
  m.running = true;
  if (!m.config.manual_clock) m.sim_thread = std::thread([&m] { m.run_clock(); });
}

void Gateway::stop() {
  if (!impl_) return;
  Impl& m = *impl_;
  {
    std::lock_guard lock(m.stop_mutex);
    if (m.stopped) return;
    m.stopped = true;
  }
  m.running = false;
  if (m.sim_thread.joinable()) m.sim_thread.join();
  if (m.started) {
    asio::post(m.io, [&m] {
      beast::error_code ignored;
      m.tcp_acceptor.close(ignored);
      m.ws_acceptor.close(ignored);
    });
    m.pool.join();
    for (const auto& s : m.snapshot_sessions()) s->close();
    m.work.reset();
    // Sessions finish closing on the io thread; give it a bounded moment.
    const auto deadline = Clock::now() + std::chrono::seconds(2);
    while (!m.snapshot_sessions().empty() && Clock::now() < deadline) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    m.io.stop();
    if (m.io_thread.joinable()) m.io_thread.join();
  }
  {
    std::lock_guard lock(m.sim_mutex);
    m.log.records.push_back({m.match.world().tick, EndRecord{}});
    if (m.config.log_path) {
      std::ofstream out(*m.config.log_path, std::ios::binary);
      out << encode_log(m.log);
    }
  }
  m.stop_cv.notify_all();
}

void Gateway::wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stop_cv.wait(lock, [&] { return impl_->stopped; });
}

std::uint16_t Gateway::tcp_port() const { return impl_->tcp_acceptor.local_endpoint().port(); }
std::optional<std::uint16_t> Gateway::ws_port() const { return impl_->ws_bound; }

void Gateway::advance(std::size_t ticks) {
  std::lock_guard lock(impl_->sim_mutex);
  if (ticks == 0) impl_->boundary();
  for (std::size_t i = 0; i < ticks; ++i) {
    impl_->boundary();
    impl_->step();
  }
}

void Gateway::wait_translations() {
  std::unique_lock lock(impl_->pending_mutex);
  impl_->pending_cv.wait(lock, [&] { return impl_->pending == 0; });
}

Tick Gateway::tick() const { return impl_->current_tick; }

std::size_t Gateway::session_count() const {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->sessions.size();
}

EventLog Gateway::event_log() const {
  std::lock_guard lock(impl_->sim_mutex);
  return impl_->log;
}

}  // namespace bbranch

#include "effort/rtserver.hpp"

#include <chrono>
#include <csignal>
#include <cmath>
#include <deque>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

namespace effort {

using nlohmann::json;

namespace {

json pt(const Vec2& v) { return json::array({v(0), v(1)}); }

json vec6(const Vec6& v) {
  json a = json::array();
  for (int i = 0; i < kMuscles; ++i) a.push_back(v(i));
  return a;
}

json error_frame(std::string_view code, std::string_view msg) {
  return json{{"type", "error"}, {"code", code}, {"msg", msg}};
}

const char* phase_name(LivePhase p) {
  switch (p) {
    case LivePhase::Idle: return "idle";
    case LivePhase::Trial: return "trial";
    case LivePhase::Rest: return "rest";
    case LivePhase::Complete: return "complete";
  }
  return "?";
}

}  // namespace

LiveSession::LiveSession(const SessionConfig& cfg, std::uint64_t seed, int geometry_points)
    : cfg_(cfg),
      protocol_(build_protocol(cfg.timing.trial_duration_s, cfg.timing.rest_s)),
      pipeline_(cfg, live_calibration(cfg, seed), seed),
      geometry_points_(geometry_points) {
  if (geometry_points_ < 3) throw std::invalid_argument("geometry_points must be >= 3");
  enter_trial(1);
  last_pos_ = neutral_point(pipeline_.trajectory(), 0.0);
}

void LiveSession::enter_trial(std::size_t pos) {
  trial_pos_ = pos;
  pipeline_.begin_trial(protocol_[pos]);
  trial_ticks_total_ =
      static_cast<int>(std::lround(protocol_[pos].duration_s * cfg_.timing.live_tick_hz));
  trial_ticks_done_ = 0;
  geometry_pending_ = true;
}

void LiveSession::advance_trial() {
  if (trial_pos_ + 1 < protocol_.size()) {
    enter_trial(trial_pos_ + 1);
    phase_ = LivePhase::Trial;
  } else {
    phase_ = LivePhase::Complete;
    running_ = false;
  }
}

void LiveSession::on_disconnect() {
  running_ = false;
  geometry_pending_ = true;
  fresh_ = false;
  last_pos_t_.reset();
}

std::optional<json> LiveSession::handle_message(std::string_view text) {
  const json msg = json::parse(text, nullptr, false);
  if (msg.is_discarded()) return error_frame("bad_json", "message is not valid JSON");
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return error_frame("bad_message", "message must be an object with a string 'type'");
  const std::string type = msg["type"].get<std::string>();

  if (type == "pos") {
    Point2 p;
    const char* keys[2] = {"x1", "x2"};
    for (int i = 0; i < 2; ++i) {
      if (!msg.contains(keys[i]) || !msg[keys[i]].is_number())
        return error_frame("bad_field", std::string("'pos' requires numeric ") + keys[i]);
      p(i) = msg[keys[i]].get<double>();
      if (!std::isfinite(p(i)))
        return error_frame("bad_field", std::string(keys[i]) + " must be finite");
    }
    if (msg.contains("t") && !msg["t"].is_number())
      return error_frame("bad_field", "'t' must be a number");
    last_pos_ = p;
    last_pos_t_.reset();
    if (msg.contains("t")) last_pos_t_ = msg["t"].get<double>();
    fresh_ = true;
    return std::nullopt;
  }
  if (type == "start") {
    if (phase_ == LivePhase::Complete)
      return error_frame("session_complete", "all trials have been run");
    if (phase_ == LivePhase::Idle) phase_ = LivePhase::Trial;
    running_ = true;
    return std::nullopt;
  }
  if (type == "pause") {
    running_ = false;
    return std::nullopt;
  }
  if (type == "next_trial") {
    if (phase_ == LivePhase::Complete)
      return error_frame("session_complete", "all trials have been run");
    if (phase_ == LivePhase::Idle) phase_ = LivePhase::Trial;
    advance_trial();
    return std::nullopt;
  }
  return error_frame("unknown_type", "unknown message type '" + type + "'");
}

json LiveSession::geometry_frame() const {
  const TrajectoryConfig& tc = pipeline_.trajectory();
  const TrialConfig& tr = trial();
  const Label label = cfg_.levels.label(tr);
  ToleranceBand band(tc);
  json tol = json::array();
  for (const auto& p : band.sample_inner(geometry_points_)) tol.push_back(pt(p));
  for (const auto& p : band.sample_outer(geometry_points_)) tol.push_back(pt(p));
  const double reach =
      std::max(tc.circle_radius, tc.ellipse_semi_major) + tc.tolerance_halfwidth;
  return json{{"type", "geometry"},
              {"trial", tr.index},
              {"impedance", to_string(tr.impedance_level)},
              {"speed", to_string(tr.speed_level)},
              {"K", label(0)},
              {"theta", label(1)},
              {"period_s", tc.period_s},
              {"duration_s", tr.duration_s},
              {"rest_s", tr.rest_s},
              {"center", pt(tc.center)},
              {"circle_radius", tc.circle_radius},
              {"semi_major", tc.ellipse_semi_major},
              {"semi_minor", tc.ellipse_semi_minor},
              {"orientation_deg", tc.orientation_deg},
              {"tolerance_halfwidth", tc.tolerance_halfwidth},
              {"extent", json::array({tc.center(0) - reach, tc.center(0) + reach,
                                      tc.center(1) - reach, tc.center(1) + reach})},
              {"units", "rad"},
              {"tol_points", geometry_points_},
              {"tol", tol}};
}

std::vector<json> LiveSession::tick() {
  std::vector<json> out;
  if (!running_ || phase_ == LivePhase::Complete || phase_ == LivePhase::Idle) return out;

  const bool stale = !fresh_;
  fresh_ = false;
  ++tick_;
  if (geometry_pending_) {
    out.push_back(geometry_frame());
    geometry_pending_ = false;
  }
  json state;
  if (phase_ == LivePhase::Trial) {
    last_tick_ = pipeline_.tick(last_pos_);
    state = json{{"type", "state"},
                 {"tick", tick_},
                 {"t", last_tick_.t_trial},
                 {"trial", trial().index},
                 {"phase", "trial"},
                 {"target", pt(last_tick_.target)},
                 {"neutral", pt(last_tick_.neutral)},
                 {"actual", pt(last_tick_.actual)},
                 {"torque", pt(last_tick_.torque)},
                 {"dist", vec6(last_tick_.distribution.M)},
                 {"degenerate", last_tick_.distribution.degenerate},
                 {"new_frame", last_tick_.new_frame},
                 {"fatigue", vec6(pipeline_.fatigue().multiplier)},
                 {"stale", stale}};
    if (++trial_ticks_done_ >= trial_ticks_total_) {
      phase_ = LivePhase::Rest;
      rest_ticks_left_ =
          static_cast<int>(std::lround(trial().rest_s * cfg_.timing.live_tick_hz));
      if (rest_ticks_left_ == 0) advance_trial();
    }
  } else {
    // Rest: nothing is recorded and fatigue is frozen.
    const double rest_total = trial().rest_s;
    const double t_rest = rest_total - rest_ticks_left_ * tick_period() + tick_period();
    state = json{{"type", "state"},
                 {"tick", tick_},
                 {"t", t_rest},
                 {"trial", trial().index},
                 {"phase", "rest"},
                 {"target", pt(last_tick_.target)},
                 {"neutral", pt(last_tick_.neutral)},
                 {"actual", pt(last_pos_)},
                 {"torque", json::array({0.0, 0.0})},
                 {"dist", vec6(last_tick_.distribution.M)},
                 {"degenerate", last_tick_.distribution.degenerate},
                 {"new_frame", false},
                 {"fatigue", vec6(pipeline_.fatigue().multiplier)},
                 {"stale", stale}};
    if (--rest_ticks_left_ <= 0) advance_trial();
  }
  state["pos_t"] = last_pos_t_ ? json(*last_pos_t_) : json(nullptr);
  if (phase_ == LivePhase::Complete) state["phase"] = phase_name(phase_);
  out.push_back(std::move(state));
  return out;
}

// Transport.

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection;

}  // namespace

struct SessionServer::Impl {
  explicit Impl(const ServerOptions& o)
      : opt(o),
        session(o.cfg, o.seed, o.geometry_points),
        acceptor(ioc),
        timer(ioc),
        signals(ioc) {
    const tcp::endpoint ep(asio::ip::make_address(opt.address), opt.port);
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
    period = std::chrono::duration_cast<asio::steady_timer::duration>(
        std::chrono::duration<double>(session.tick_period()));
  }

  void do_accept();
  void schedule_tick();
  void on_tick();
  void broadcast(const json& frame);

  ServerOptions opt;
  LiveSession session;
  asio::io_context ioc{1};
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  asio::signal_set signals;
  asio::steady_timer::duration period{};
  asio::steady_timer::time_point next_deadline{};
  std::shared_ptr<Connection> client;
  std::uint64_t next_client_id = 1;
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket sock, SessionServer::Impl& srv, std::uint64_t id)
      : ws_(std::move(sock)), srv_(srv), id_(id) {}

  void start() {
    auto self = shared_from_this();
    http::async_read(ws_.next_layer(), buf_, req_, [self](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->on_request();
    });
  }

  void send(std::string text) {
    if (closed_) return;
    outq_.push_back(std::move(text));
    if (!writing_) do_write();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    auto self = shared_from_this();
    ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
  }

  std::uint64_t id() const { return id_; }

 private:
  void on_request() {
    if (!websocket::is_upgrade(req_) || req_.target() != "/session") {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found,
                                                                      req_.version());
      res->set(http::field::content_type, "text/plain");
      res->body() = "websocket endpoint is /session\n";
      res->prepare_payload();
      auto self = shared_from_this();
      http::async_write(ws_.next_layer(), *res, [self, res](beast::error_code, std::size_t) {
        beast::error_code ignored;
        self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_both, ignored);
      });
      return;
    }
    ws_.text(true);
    auto self = shared_from_this();
    ws_.async_accept(req_, [self](beast::error_code ec) {
      if (ec) return;
      self->on_open();
    });
  }

  void on_open() {
    beast::get_lowest_layer(ws_).expires_never();
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    if (srv_.client && srv_.client.get() != this) {
      send(error_frame("busy", "another client holds this session").dump());
      close();
      return;
    }
    srv_.client = shared_from_this();
    spdlog::info("client {} connected", id_);
    do_read();
  }

  void do_read() {
    auto self = shared_from_this();
    ws_.async_read(buf_, [self](beast::error_code ec, std::size_t n) {
      if (ec) {
        self->on_gone();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buf_.data());
      self->buf_.consume(n);
      if (auto err = self->srv_.session.handle_message(text)) self->send(err->dump());
      self->do_read();
    });
  }

  void do_write() {
    writing_ = true;
    auto self = shared_from_this();
    ws_.async_write(asio::buffer(outq_.front()), [self](beast::error_code ec, std::size_t) {
      self->outq_.pop_front();
      if (ec) {
        self->writing_ = false;
        self->on_gone();
        return;
      }
      if (self->outq_.empty()) {
        self->writing_ = false;
      } else {
        self->do_write();
      }
    });
  }

  void on_gone() {
    closed_ = true;
    if (srv_.client.get() == this) {
      srv_.session.on_disconnect();
      srv_.client.reset();
      spdlog::info("client {} disconnected; session paused", id_);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buf_;
  http::request<http::string_body> req_;
  std::deque<std::string> outq_;
  bool writing_ = false;
  bool closed_ = false;
  SessionServer::Impl& srv_;
  std::uint64_t id_;
};

}  // namespace

void SessionServer::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
    if (ec) return;
    // Small frames each tick; Nagle batching would add a period of latency.
    sock.set_option(tcp::no_delay(true), ec);
    std::make_shared<Connection>(std::move(sock), *this, next_client_id++)->start();
    do_accept();
  });
}

void SessionServer::Impl::schedule_tick() {
  // Absolute deadlines keep the tick rate free of drift.
  next_deadline += period;
  timer.expires_at(next_deadline);
  timer.async_wait([this](beast::error_code ec) {
    if (ec) return;
    on_tick();
  });
}

void SessionServer::Impl::on_tick() {
  if (client) {
    try {
      for (const json& f : session.tick()) client->send(f.dump());
    } catch (const std::exception& e) {
      client->send(error_frame("internal", e.what()).dump());
      session.on_disconnect();
    }
  }
  const auto now = asio::steady_timer::clock_type::now();
  if (now - next_deadline > 10 * period) next_deadline = now;  // resync after a stall
  schedule_tick();
}

SessionServer::SessionServer(const ServerOptions& opt) : impl_(std::make_unique<Impl>(opt)) {}

SessionServer::~SessionServer() = default;

unsigned short SessionServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void SessionServer::run() {
  if (impl_->opt.handle_signals) {
    impl_->signals.add(SIGINT);
    impl_->signals.add(SIGTERM);
    impl_->signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) impl_->ioc.stop();
    });
  }
  impl_->do_accept();
  impl_->next_deadline = asio::steady_timer::clock_type::now();
  impl_->schedule_tick();
  impl_->ioc.run();
}

void SessionServer::stop() { impl_->ioc.stop(); }

}  // namespace effort

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "effort/protocol.hpp"

namespace effort {

enum class LivePhase { Idle, Trial, Rest, Complete };

/// Network-free live session: consumes client messages, emits outbound
/// frames once per control tick. One instance per connected session.
class LiveSession {
 public:
  LiveSession(const SessionConfig& cfg, std::uint64_t seed, int geometry_points = 128);

  /// Returns an error frame for malformed or unknown messages; the message
  /// is otherwise dropped.
  std::optional<nlohmann::json> handle_message(std::string_view text);

  /// Advances the clock by one tick when running; returns frames to send.
  std::vector<nlohmann::json> tick();

  /// Disconnect pauses the trial clock.
  void on_disconnect();

  bool running() const { return running_; }
  LivePhase phase() const { return phase_; }
  std::uint64_t tick_count() const { return tick_; }
  const TrialConfig& trial() const { return protocol_[trial_pos_]; }
  const LivePipeline& pipeline() const { return pipeline_; }
  double tick_period() const { return pipeline_.tick_period(); }

  nlohmann::json geometry_frame() const;

 private:
  void enter_trial(std::size_t pos);
  void advance_trial();

  SessionConfig cfg_;
  std::vector<TrialConfig> protocol_;
  LivePipeline pipeline_;
  int geometry_points_;
  std::size_t trial_pos_ = 1;  // index into protocol_; trial 0 is synthesized
  LivePhase phase_ = LivePhase::Idle;
  bool running_ = false;
  bool geometry_pending_ = true;
  std::uint64_t tick_ = 0;
  int rest_ticks_left_ = 0;
  int trial_ticks_total_ = 0;
  int trial_ticks_done_ = 0;
  Point2 last_pos_ = Point2::Zero();
  std::optional<double> last_pos_t_;  // client stamp of last_pos_, echoed as pos_t
  bool fresh_ = false;
  LiveTick last_tick_;
};

struct ServerOptions {
  SessionConfig cfg;
  std::uint64_t seed = 1;
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  int geometry_points = 128;
  bool handle_signals = false;  // stop on SIGINT/SIGTERM
};

/// WebSocket endpoint at /session serving one client at a time. All session
/// state lives on the single thread that calls run().
class SessionServer {
 public:
  explicit SessionServer(const ServerOptions& opt);
  ~SessionServer();
  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  unsigned short port() const;
  void run();
  /// Safe to call from any thread.
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace effort

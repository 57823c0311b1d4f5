// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "qsync/node.hpp"

namespace qsync {

// Control-socket command kinds (the 0x80..0xFF range reserved in the frame
// codec). Requests and responses carry JSON bodies.
constexpr uint8_t kCtlRequest = 0x80;
constexpr uint8_t kCtlResponse = 0x81;

// Stream mode: the identical frame bytes, u32 big-endian length-prefixed on
// the wire. Returns false on EOF.
bool read_stream_frame(int fd, std::string& out);
bool write_stream_frame(int fd, const std::string& frame);

// Offline environment for one-shot CLI operations against a node's state
// directory: every link is down (sends park in outgoing queues), timers never
// fire, and posted work runs when drain() is called.
class LocalEnv : public NetworkEnv {
 public:
  uint64_t now_ms() const override;
  void send_frame(const NodeId&, const NodeId&, std::string) override {}
  uint64_t set_timer(const NodeId&, uint64_t, std::function<void()>) override {
    return ++next_timer_;
  }
  void cancel_timer(uint64_t) override {}
  void post(const NodeId&, std::function<void()> fn) override {
    pending_.push_back(std::move(fn));
  }
  bool link_online(const NodeId&, const NodeId&) const override { return false; }

  void drain();

 private:
  uint64_t next_timer_ = 0;
  std::deque<std::function<void()>> pending_;
};

// The node daemon: real clock, TCP frame transport between nodes, a control
// socket for the admin CLI, and a single engine thread owning all node state.
// Peers are resolved from the topology config (host=/port= on node lines).
class Daemon : public NetworkEnv {
 public:
  Daemon(TopologyConfig topo, NodeId id, std::filesystem::path state_dir);
  ~Daemon();

  Daemon(const Daemon&) = delete;
  Daemon& operator=(const Daemon&) = delete;

  void start();  // binds, recovers, spawns threads; throws Err::Refused if
                 // another daemon holds this node's state directory
  void stop();
  void wait();  // block until stop() is called (for `qsync run`)

  uint16_t port() const { return port_; }
  size_t recovered_txns() const;

  // Run fn on the engine thread and wait for its result.
  nlohmann::ordered_json control(const std::string& cmd, const nlohmann::json& args);

  // --- NetworkEnv ---
  uint64_t now_ms() const override;
  void send_frame(const NodeId& from, const NodeId& to, std::string frame) override;
  uint64_t set_timer(const NodeId& node, uint64_t delay_ms, std::function<void()> fn) override;
  void cancel_timer(uint64_t timer_id) override;
  void post(const NodeId& node, std::function<void()> fn) override;
  bool link_online(const NodeId& a, const NodeId& b) const override;

 private:
  struct Timer {
    uint64_t deadline;
    std::function<void()> fn;
  };

  void engine_loop();
  void accept_loop();
  void serve_connection(int fd);
  void run_on_engine(std::function<void()> fn);
  nlohmann::ordered_json handle_control(const std::string& cmd, const nlohmann::json& args);

  TopologyConfig topo_;
  NodeId id_;
  std::filesystem::path state_dir_;
  std::unique_ptr<Node> node_;
  uint16_t port_ = 0;
  int listen_fd_ = -1;
  int lock_fd_ = -1;
  std::atomic<bool> running_{false};

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> jobs_;
  std::map<uint64_t, Timer> timers_;
  uint64_t next_timer_ = 0;
  std::chrono::steady_clock::time_point epoch_;

  std::thread engine_thread_;
  std::thread accept_thread_;
  std::vector<std::thread> conn_threads_;
};

// Thin client side of the control socket.
class ControlClient {
 public:
  ControlClient(const std::string& host, uint16_t port);
  ~ControlClient();

  static bool reachable(const std::string& host, uint16_t port);

  nlohmann::ordered_json call(const std::string& cmd, const nlohmann::json& args);

 private:
  int fd_ = -1;
};

// Shared by the daemon's control handler and the CLI's offline mode, so both
// paths produce identical command output.
nlohmann::ordered_json control_command(Node& node, const std::string& cmd,
                                       const nlohmann::json& args);

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <string>

#include "qsync/node.hpp"

namespace qsync {

struct LinkState {
  bool online = true;
  uint64_t latency_ms = 10;
  double loss_rate = 0.0;
  double dup_rate = 0.0;
  bool reorder = false;
};

// Deterministic discrete-event simulator: one event loop owns the simulated
// clock; node logic runs as callbacks within event processing. Every loss,
// duplication, and reorder decision comes from a per-link splitmix64 stream
// derived from the run seed, so (seed, scenario) fully determines the run.
// A CrashInjected escaping a node callback "kills" that node: the instance
// is dropped and rebuilt from its WAL, exactly like a process restart.
class Simulator : public NetworkEnv {
 public:
  Simulator(const TopologyConfig& topo, uint64_t seed, std::filesystem::path state_root);

  Node& node(const NodeId& id);
  std::vector<Node*> nodes();

  void set_link(const NodeId& a, const NodeId& b, const LinkState& state);
  LinkState link(const NodeId& a, const NodeId& b) const;

  // Schedule work. Scenario text uses the command grammar:
  //   at <ms> link <a> <b> online|offline|loss <r>|dup <r>|latency <ms>|reorder on|off
  //   at <ms> client <node> exec <sql...>
  void load_scenario(const std::string& text);
  void at(uint64_t ms, std::function<void()> fn);
  void client_exec_at(uint64_t ms, const NodeId& node, const std::string& sql);

  // Process the next event; returns false when the heap is empty.
  bool step();
  // Run until no events remain and every node is quiescent. Throws
  // Err::MaxTimeExceeded when the clock passes max_time_ms or the event heap
  // drains while work is still stuck (e.g. an offline link with pending
  // frames).
  uint64_t run_until_quiet(uint64_t max_time_ms);
  bool quiet() const;

  void crash_node(const NodeId& id);
  size_t restarts() const { return restarts_; }

  // Observe every frame handed to the transport (before loss/dup), for tests.
  using FrameTap = std::function<void(const NodeId& from, const NodeId& to, const std::string&)>;
  void set_frame_tap(FrameTap tap) { tap_ = std::move(tap); }

  const std::vector<std::string>& exec_errors() const { return exec_errors_; }

  // --- NetworkEnv ---
  uint64_t now_ms() const override { return clock_; }
  void send_frame(const NodeId& from, const NodeId& to, std::string frame) override;
  uint64_t set_timer(const NodeId& node, uint64_t delay_ms, std::function<void()> fn) override;
  void cancel_timer(uint64_t timer_id) override;
  void post(const NodeId& node, std::function<void()> fn) override;
  bool link_online(const NodeId& a, const NodeId& b) const override;

 private:
  struct Event {
    uint64_t time = 0;
    uint64_t order = 0;      // tie-break: insertion sequence
    NodeId node;             // target node ("" = scenario event)
    uint64_t epoch = 0;      // node incarnation the callback belongs to (0 = any)
    uint64_t timer_id = 0;   // nonzero for cancelable timers
    std::string frame;       // nonempty for frame deliveries
    std::function<void()> fn;
  };
  struct EventAfter {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.order > b.order;
    }
  };

  static std::pair<NodeId, NodeId> link_key(const NodeId& a, const NodeId& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }
  SplitMix64& stream(const NodeId& from, const NodeId& to);
  void schedule(Event ev);
  void make_node(const NodeId& id);
  void dispatch_event(const Event& ev);

  const TopologyConfig& topo_;
  uint64_t seed_;
  std::filesystem::path state_root_;
  uint64_t clock_ = 0;
  uint64_t next_order_ = 0;
  uint64_t next_timer_ = 0;
  size_t restarts_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventAfter> heap_;
  std::set<uint64_t> canceled_;
  std::map<NodeId, std::unique_ptr<Node>> nodes_;
  std::map<NodeId, uint64_t> epochs_;
  std::map<std::pair<NodeId, NodeId>, LinkState> links_;
  std::map<std::pair<NodeId, NodeId>, SplitMix64> streams_;
  FrameTap tap_;
  std::vector<std::string> exec_errors_;
};

}  // namespace qsync

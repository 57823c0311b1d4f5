// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/sim.hpp"

#include <sstream>

#include "qsync/errors.hpp"

namespace qsync {

Simulator::Simulator(const TopologyConfig& topo, uint64_t seed, std::filesystem::path state_root)
    : topo_(topo), seed_(seed), state_root_(std::move(state_root)) {
  for (const auto& entry : topo_.nodes()) {
    make_node(entry.name);
  }
  for (auto& [id, node] : nodes_) {
    node->start();
  }
}

void Simulator::make_node(const NodeId& id) {
  epochs_[id] += 1;
  nodes_[id] = std::make_unique<Node>(topo_, id, state_root_ / id, this);
}

Node& Simulator::node(const NodeId& id) {
  auto it = nodes_.find(id);
  if (it == nodes_.end()) throw Error(Err::UnknownNode, "'" + id + "'");
  return *it->second;
}

std::vector<Node*> Simulator::nodes() {
  std::vector<Node*> out;
  for (auto& [id, n] : nodes_) out.push_back(n.get());
  return out;
}

void Simulator::set_link(const NodeId& a, const NodeId& b, const LinkState& state) {
  if (!topo_.has_node(a)) throw Error(Err::UnknownNode, "'" + a + "'");
  if (!topo_.has_node(b)) throw Error(Err::UnknownNode, "'" + b + "'");
  LinkState before = link(a, b);
  links_[link_key(a, b)] = state;
  if (!before.online && state.online) {
    // In-flight frames are unaffected; waking the endpoints drains whatever
    // queued up during the outage.
    node(a).on_link_up(b);
    node(b).on_link_up(a);
  }
}

LinkState Simulator::link(const NodeId& a, const NodeId& b) const {
  auto it = links_.find(link_key(a, b));
  return it == links_.end() ? LinkState{} : it->second;
}

bool Simulator::link_online(const NodeId& a, const NodeId& b) const {
  if (a == b) return true;
  return link(a, b).online;
}

SplitMix64& Simulator::stream(const NodeId& from, const NodeId& to) {
  auto key = std::make_pair(from, to);  // one stream per direction
  auto it = streams_.find(key);
  if (it == streams_.end()) {
    it = streams_.emplace(key, SplitMix64::stream(seed_, from + "->" + to)).first;
  }
  return it->second;
}

void Simulator::schedule(Event ev) {
  ev.order = next_order_++;
  heap_.push(std::move(ev));
}

void Simulator::send_frame(const NodeId& from, const NodeId& to, std::string frame) {
  if (tap_) tap_(from, to, frame);
  LinkState ls = link(from, to);
  if (!ls.online) return;  // sender raced a link drop; retransmission recovers
  SplitMix64& rng = stream(from, to);
  auto deliver = [&](const std::string& bytes) {
    uint64_t delay = ls.latency_ms;
    if (ls.reorder) delay += rng.below(ls.latency_ms + 1);
    Event ev;
    ev.time = clock_ + delay;
    ev.node = to;
    ev.epoch = 0;  // frames are delivered to whatever incarnation is alive
    ev.timer_id = 0;
    ev.frame = bytes;
    schedule(std::move(ev));
  };
  bool lost = rng.next_unit() < ls.loss_rate;
  if (!lost) deliver(frame);
  if (rng.next_unit() < ls.dup_rate) deliver(frame);
}

uint64_t Simulator::set_timer(const NodeId& node, uint64_t delay_ms, std::function<void()> fn) {
  Event ev;
  ev.time = clock_ + delay_ms;
  ev.node = node;
  ev.epoch = epochs_[node];
  ev.timer_id = ++next_timer_;
  ev.fn = std::move(fn);
  uint64_t id = ev.timer_id;
  schedule(std::move(ev));
  return id;
}

void Simulator::cancel_timer(uint64_t timer_id) { canceled_.insert(timer_id); }

void Simulator::post(const NodeId& node, std::function<void()> fn) {
  Event ev;
  ev.time = clock_;
  ev.node = node;
  ev.epoch = epochs_[node];
  ev.timer_id = 0;
  ev.fn = std::move(fn);
  schedule(std::move(ev));
}

void Simulator::at(uint64_t ms, std::function<void()> fn) {
  Event ev;
  ev.time = ms;
  ev.epoch = 0;
  ev.timer_id = 0;
  ev.fn = std::move(fn);
  schedule(std::move(ev));
}

void Simulator::client_exec_at(uint64_t ms, const NodeId& id, const std::string& sql) {
  at(ms, [this, id, sql] {
    try {
      node(id).client_exec(sql);
    } catch (const Error& e) {
      exec_errors_.push_back(id + ": " + e.what());
    } catch (const CrashInjected&) {
      crash_node(id);  // the "client" dies with its node
    }
  });
}

void Simulator::crash_node(const NodeId& id) {
  // The old incarnation's timers and posts are fenced off by the epoch bump;
  // its memory vanishes, and the new instance recovers from the WAL alone.
  nodes_.erase(id);
  ++restarts_;
  make_node(id);
  node(id).start();
}

void Simulator::dispatch_event(const Event& ev) {
  if (!ev.frame.empty()) {
    auto it = nodes_.find(ev.node);
    if (it == nodes_.end()) return;
    try {
      it->second->on_frame(ev.frame);
    } catch (const CrashInjected&) {
      crash_node(ev.node);
    }
    return;
  }
  if (!ev.node.empty()) {
    if (ev.epoch != 0 && epochs_[ev.node] != ev.epoch) return;  // stale incarnation
    try {
      ev.fn();
    } catch (const CrashInjected&) {
      crash_node(ev.node);
    }
    return;
  }
  // Scenario event; closures that can crash a node handle CrashInjected
  // themselves (they know which node they touched).
  ev.fn();
}

bool Simulator::step() {
  while (!heap_.empty()) {
    Event ev = heap_.top();
    heap_.pop();
    if (ev.timer_id != 0 && canceled_.erase(ev.timer_id)) continue;
    clock_ = std::max(clock_, ev.time);
    dispatch_event(ev);
    return true;
  }
  return false;
}

bool Simulator::quiet() const {
  if (!heap_.empty()) return false;
  for (const auto& [id, n] : nodes_) {
    if (!n->quiescent()) return false;
  }
  return true;
}

uint64_t Simulator::run_until_quiet(uint64_t max_time_ms) {
  while (true) {
    if (heap_.empty()) {
      bool all_quiet = true;
      for (const auto& [id, n] : nodes_) {
        if (!n->quiescent()) all_quiet = false;
      }
      if (all_quiet) return clock_;
      throw Error(Err::MaxTimeExceeded,
                  "no events left but nodes still have pending work (offline link?)");
    }
    if (clock_ > max_time_ms) {
      throw Error(Err::MaxTimeExceeded, "simulated clock passed " + std::to_string(max_time_ms) +
                                            " ms before the system went quiet");
    }
    step();
  }
}

void Simulator::load_scenario(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw)) continue;
    auto bad = [&](const std::string& what) {
      return Error(Err::Parse, "scenario line " + std::to_string(lineno) + ": " + what);
    };
    if (kw != "at") throw bad("expected 'at <ms> ...'");
    uint64_t ms = 0;
    if (!(ls >> ms)) throw bad("expected time in ms");
    std::string what;
    if (!(ls >> what)) throw bad("expected 'link' or 'client'");
    if (what == "link") {
      std::string a, b, verb;
      if (!(ls >> a >> b >> verb)) throw bad("link <a> <b> <setting>");
      if (!topo_.has_node(a) || !topo_.has_node(b)) throw bad("unknown node in link command");
      double rate = 0.0;
      uint64_t ms_arg = 0;
      std::string onoff;
      if (verb == "loss" || verb == "dup") {
        if (!(ls >> rate) || rate < 0.0 || rate > 1.0) throw bad("rate in [0,1]");
      } else if (verb == "latency") {
        if (!(ls >> ms_arg)) throw bad("latency needs ms");
      } else if (verb == "reorder") {
        if (!(ls >> onoff) || (onoff != "on" && onoff != "off")) throw bad("reorder on|off");
      } else if (verb != "online" && verb != "offline") {
        throw bad("unknown link setting '" + verb + "'");
      }
      at(ms, [this, a, b, verb, rate, ms_arg, onoff] {
        LinkState ls2 = link(a, b);
        if (verb == "online") ls2.online = true;
        if (verb == "offline") ls2.online = false;
        if (verb == "loss") ls2.loss_rate = rate;
        if (verb == "dup") ls2.dup_rate = rate;
        if (verb == "latency") ls2.latency_ms = ms_arg;
        if (verb == "reorder") ls2.reorder = onoff == "on";
        set_link(a, b, ls2);
      });
    } else if (what == "client") {
      std::string node_id, verb;
      if (!(ls >> node_id >> verb)) throw bad("client <node> exec <sql>");
      if (verb != "exec") throw bad("only 'client <node> exec <sql>' is supported");
      if (!topo_.has_node(node_id)) throw bad("unknown node '" + node_id + "'");
      std::string sql;
      std::getline(ls, sql);
      auto b = sql.find_first_not_of(" \t");
      if (b == std::string::npos) throw bad("missing sql text");
      sql = sql.substr(b);
      client_exec_at(ms, node_id, sql);
    } else {
      throw bad("unknown command '" + what + "'");
    }
  }
}

}  // namespace qsync

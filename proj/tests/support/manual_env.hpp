// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <deque>
#include <map>
#include <set>
#include <vector>

#include "qsync/bytes.hpp"
#include "qsync/env.hpp"
#include "qsync/wal.hpp"

namespace qsync::testing {

// Hand-cranked environment for queue-level unit tests: the test decides when
// time advances, which frames get delivered, and in what order.
class ManualEnv : public NetworkEnv {
 public:
  struct SentFrame {
    NodeId from, to;
    std::string bytes;
  };

  uint64_t now = 0;
  std::vector<SentFrame> wire;  // frames handed to the transport, in order
  std::deque<std::function<void()>> posted;
  bool links_up = true;

  uint64_t now_ms() const override { return now; }

  void send_frame(const NodeId& from, const NodeId& to, std::string frame) override {
    wire.push_back(SentFrame{from, to, std::move(frame)});
  }

  uint64_t set_timer(const NodeId&, uint64_t delay_ms, std::function<void()> fn) override {
    uint64_t id = ++next_timer_;
    timers_[id] = {now + delay_ms, std::move(fn)};
    return id;
  }

  void cancel_timer(uint64_t timer_id) override { timers_.erase(timer_id); }

  void post(const NodeId&, std::function<void()> fn) override {
    posted.push_back(std::move(fn));
  }

  bool link_online(const NodeId& a, const NodeId& b) const override {
    return a == b || links_up;
  }

  // Advance the clock, firing due timers in deadline order.
  void advance(uint64_t ms) {
    uint64_t target = now + ms;
    while (true) {
      uint64_t best = UINT64_MAX;
      uint64_t best_id = 0;
      for (const auto& [id, t] : timers_) {
        if (t.first <= target && t.first < best) {
          best = t.first;
          best_id = id;
        }
      }
      if (best_id == 0) break;
      auto fn = std::move(timers_.at(best_id).second);
      timers_.erase(best_id);
      now = best;
      fn();
    }
    now = target;
  }

  void drain_posted() {
    while (!posted.empty()) {
      auto fn = std::move(posted.front());
      posted.pop_front();
      fn();
    }
  }

  std::vector<SentFrame> take_wire() {
    std::vector<SentFrame> out;
    out.swap(wire);
    return out;
  }

  size_t timer_count() const { return timers_.size(); }

 private:
  uint64_t next_timer_ = 0;
  std::map<uint64_t, std::pair<uint64_t, std::function<void()>>> timers_;
};

// Counts per-message-id Accept records in a node's WAL: the durable,
// implementation-independent record of what the node let in. The exactly-once
// criterion is checked against this multiset.
inline std::map<std::string, int> wal_accept_counts(const std::filesystem::path& wal_path) {
  std::map<std::string, int> counts;
  Wal::scan(wal_path, [&](WalType type, const std::string& payload) {
    if (type != WalType::Accept) return;
    ByteReader r(payload);
    std::string origin = r.str();
    uint64_t seq = r.u64();
    counts[origin + "/" + std::to_string(seq)]++;
  });
  return counts;
}

}  // namespace qsync::testing

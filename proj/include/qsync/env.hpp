// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "qsync/topology.hpp"

namespace qsync {

// What a node needs from the outside world: a clock, frame delivery, timers,
// and link visibility. Implemented by the deterministic simulator and by the
// real stream transport. All callbacks into node logic happen on the owner's
// single event-processing activity.
class NetworkEnv {
 public:
  virtual ~NetworkEnv() = default;

  virtual uint64_t now_ms() const = 0;

  // Hand a frame to the transport. May drop, duplicate, or reorder; must
  // never corrupt (frames are checksummed end-to-end).
  virtual void send_frame(const NodeId& from, const NodeId& to, std::string frame) = 0;

  virtual uint64_t set_timer(const NodeId& node, uint64_t delay_ms,
                             std::function<void()> fn) = 0;
  virtual void cancel_timer(uint64_t timer_id) = 0;

  // Schedule fn to run on the node's activity as soon as possible.
  virtual void post(const NodeId& node, std::function<void()> fn) = 0;

  virtual bool link_online(const NodeId& a, const NodeId& b) const = 0;
};

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <map>
#include <string>

#include "qsync/sim.hpp"

namespace qsync::testing {

// Hub-and-spoke config: central HQ node "C" in every branch's network.
inline std::string hub_config(int branches) {
  std::string cns;
  for (int i = 1; i <= branches; ++i) cns += (i > 1 ? "," : "") + ("lan" + std::to_string(i));
  std::string text = "[node] name=C role=CENTRAL cn=" + cns + "\n";
  for (int i = 1; i <= branches; ++i) {
    text += "[node] name=B" + std::to_string(i) + " role=BRANCH cn=lan" + std::to_string(i) + "\n";
  }
  return text;
}

inline void set_all_links(Simulator& sim, const TopologyConfig& topo, const LinkState& state) {
  for (const auto& b : topo.branches()) {
    sim.set_link(b, topo.central(), state);
  }
}

// APPLIED apply-log counts per (message id, statement index).
inline std::map<std::string, int> applied_counts(const Node& node) {
  std::map<std::string, int> counts;
  for (const auto& e : node.store().applied_log()) {
    if (e.outcome == ApplyOutcome::Applied) {
      counts[e.source.str() + "#" + std::to_string(e.stmt_index)]++;
    }
  }
  return counts;
}

// True when, at `node`, applied origin record ids are strictly increasing per
// origin (the per-origin ordering invariant).
inline bool origin_order_strict(const Node& node) {
  std::map<NodeId, uint64_t> last;
  for (const auto& e : node.store().applied_log()) {
    if (e.outcome != ApplyOutcome::Applied) continue;
    auto it = last.find(e.origin);
    if (it != last.end() && e.origin_record_id <= it->second) return false;
    last[e.origin] = e.origin_record_id;
  }
  return true;
}

inline bool has_self_origin_applies(const Node& node) {
  for (const auto& e : node.store().applied_log()) {
    if (e.origin == node.id()) return true;
  }
  return false;
}

}  // namespace qsync::testing

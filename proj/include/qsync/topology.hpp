// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace qsync {

using NodeId = std::string;  // [A-Za-z0-9_-]{1,32}

enum class NodeRole { Branch, Central };

struct NodeEntry {
  NodeId name;
  NodeRole role = NodeRole::Branch;
  std::vector<std::string> cns;  // connected networks this node belongs to
  std::string host = "127.0.0.1";
  uint16_t port = 0;  // 0 = no listen port configured (simulator-only node)
};

// Static model of the enterprise. Immutable after load; safe to share
// read-only across threads. The central node plays the routing-server role:
// any pair of nodes without a common connected network exchanges traffic
// through it.
class TopologyConfig {
 public:
  static TopologyConfig load(const std::string& text);
  static TopologyConfig load_file(const std::string& path);

  const std::vector<NodeEntry>& nodes() const { return nodes_; }
  const NodeEntry& node(const NodeId& id) const;
  bool has_node(const NodeId& id) const { return index_.count(id) != 0; }
  const NodeId& central() const { return central_; }

  std::vector<NodeId> branches() const;

  // Direct connectivity: a shared connected network (a CN is a group of
  // directly interconnected machines) or an explicit [link] entry.
  bool linked(const NodeId& a, const NodeId& b) const;

  // Next hop for traffic from -> to: `to` itself when a direct connection
  // exists, otherwise the central routing server.
  NodeId route_next_hop(const NodeId& from, const NodeId& to) const;

  // Enterprise-wide mail key (32 bytes). A fixed default applies when the
  // config has no [mailkey] line.
  const std::string& mail_key() const { return mail_key_; }

  const std::map<std::string, std::vector<NodeId>>& connected_networks() const { return cns_; }

 private:
  void validate() const;

  std::vector<NodeEntry> nodes_;
  std::map<NodeId, size_t> index_;
  std::map<std::string, std::vector<NodeId>> cns_;
  std::set<std::pair<NodeId, NodeId>> links_;  // normalized a < b
  NodeId central_;
  std::string mail_key_;
};

}  // namespace qsync

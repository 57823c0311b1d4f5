// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/topology.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "qsync/bytes.hpp"
#include "qsync/errors.hpp"

namespace qsync {

namespace {

constexpr const char* kDefaultMailKeySeed = "qsync-default-enterprise-mail-key";

bool valid_node_name(const std::string& s) {
  if (s.empty() || s.size() > 32) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  });
}

// "key=value key=value ..." after the [section] tag.
std::map<std::string, std::string> parse_kv(const std::string& rest, int lineno) {
  std::map<std::string, std::string> kv;
  std::istringstream in(rest);
  std::string tok;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(Err::Parse, "line " + std::to_string(lineno) + ": expected key=value, got '" + tok + "'");
    }
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TopologyConfig TopologyConfig::load(const std::string& text) {
  TopologyConfig topo;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);

    auto close = line.find(']');
    if (line[0] != '[' || close == std::string::npos) {
      throw Error(Err::Parse, "line " + std::to_string(lineno) + ": expected [section]");
    }
    std::string section = line.substr(1, close - 1);
    auto kv = parse_kv(line.substr(close + 1), lineno);

    if (section == "node") {
      NodeEntry n;
      n.name = kv.count("name") ? kv["name"] : "";
      if (!valid_node_name(n.name)) {
        throw Error(Err::Parse, "line " + std::to_string(lineno) + ": bad or missing node name");
      }
      std::string role = kv.count("role") ? kv["role"] : "";
      if (role == "BRANCH") {
        n.role = NodeRole::Branch;
      } else if (role == "CENTRAL") {
        n.role = NodeRole::Central;
      } else {
        throw Error(Err::Parse, "line " + std::to_string(lineno) + ": role must be BRANCH or CENTRAL");
      }
      if (!kv.count("cn") || kv["cn"].empty()) {
        throw Error(Err::Parse, "line " + std::to_string(lineno) + ": node needs cn=");
      }
      n.cns = split_commas(kv["cn"]);
      if (kv.count("host")) n.host = kv["host"];
      if (kv.count("port")) {
        unsigned long p = std::stoul(kv["port"]);
        if (p == 0 || p > 65535) {
          throw Error(Err::Parse, "line " + std::to_string(lineno) + ": bad port");
        }
        n.port = static_cast<uint16_t>(p);
      }
      if (topo.index_.count(n.name)) {
        throw Error(Err::Validation, "duplicate node '" + n.name + "'");
      }
      topo.index_[n.name] = topo.nodes_.size();
      topo.nodes_.push_back(n);
      for (const auto& cn : n.cns) topo.cns_[cn].push_back(n.name);
    } else if (section == "link") {
      if (!kv.count("a") || !kv.count("b")) {
        throw Error(Err::Parse, "line " + std::to_string(lineno) + ": link needs a= and b=");
      }
      NodeId a = kv["a"], b = kv["b"];
      if (a == b) throw Error(Err::Validation, "self-link on '" + a + "'");
      topo.links_.insert({std::min(a, b), std::max(a, b)});
    } else if (section == "mailkey") {
      if (!kv.count("key")) {
        throw Error(Err::Parse, "line " + std::to_string(lineno) + ": mailkey needs key=");
      }
      std::string key = from_hex(kv["key"]);
      if (key.size() != 32) {
        throw Error(Err::Parse, "line " + std::to_string(lineno) + ": mail key must be 64 hex digits");
      }
      topo.mail_key_ = key;
    } else {
      throw Error(Err::Parse, "line " + std::to_string(lineno) + ": unknown section [" + section + "]");
    }
  }
  if (topo.mail_key_.empty()) topo.mail_key_ = sha256(kDefaultMailKeySeed);
  topo.validate();
  return topo;
}

TopologyConfig TopologyConfig::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Err::Io, "cannot read config '" + path + "'");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return load(text);
}

void TopologyConfig::validate() const {
  size_t centrals = 0;
  for (const auto& n : nodes_) {
    if (n.role == NodeRole::Central) ++centrals;
  }
  if (centrals != 1) {
    throw Error(Err::Validation, "config must name exactly one CENTRAL node, found " +
                                     std::to_string(centrals));
  }
  auto* self = const_cast<TopologyConfig*>(this);
  for (const auto& n : nodes_) {
    if (n.role == NodeRole::Central) self->central_ = n.name;
  }
  for (const auto& [a, b] : links_) {
    if (!index_.count(a)) throw Error(Err::Validation, "link names unknown node '" + a + "'");
    if (!index_.count(b)) throw Error(Err::Validation, "link names unknown node '" + b + "'");
  }
  // The routing model is hub-and-spoke with one intermediate hop at most;
  // that requires a direct connection between central and every other node.
  for (const auto& n : nodes_) {
    if (n.name != central_ && !linked(n.name, central_)) {
      throw Error(Err::Validation, "node '" + n.name + "' is not reachable from central");
    }
  }
}

const NodeEntry& TopologyConfig::node(const NodeId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Err::UnknownNode, "'" + id + "'");
  return nodes_[it->second];
}

std::vector<NodeId> TopologyConfig::branches() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.role == NodeRole::Branch) out.push_back(n.name);
  }
  return out;
}

bool TopologyConfig::linked(const NodeId& a, const NodeId& b) const {
  if (links_.count({std::min(a, b), std::max(a, b)})) return true;
  const auto& na = node(a);
  const auto& nb = node(b);
  for (const auto& cn : na.cns) {
    if (std::find(nb.cns.begin(), nb.cns.end(), cn) != nb.cns.end()) return true;
  }
  return false;
}

NodeId TopologyConfig::route_next_hop(const NodeId& from, const NodeId& to) const {
  if (!has_node(from)) throw Error(Err::UnknownNode, "'" + from + "'");
  if (!has_node(to)) throw Error(Err::UnknownNode, "'" + to + "'");
  if (from == to) throw Error(Err::Validation, "route from node to itself");
  if (linked(from, to)) return to;
  return central_;
}

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

#include "qsync/policy.hpp"
#include "qsync/queue.hpp"
#include "qsync/store.hpp"

namespace qsync {

// Dispatch batches at most this many outbox records into one SyncBody.
constexpr size_t kDispatchBatch = 32;
// A message whose apply transaction keeps aborting is consumed and
// dead-lettered after this many attempts.
constexpr int kApplyRetryBudget = 3;

constexpr const char* kSyncQueue = "sync_in";

// Replicated statement batch. Canonical serialization is byte-stable:
// UTF-8 JSON, keys exactly origin, schema_version, records; each record
// {id, sql}; no insignificant whitespace.
struct SyncRecord {
  uint64_t id = 0;  // record id at the origin node
  std::string sql;
};

struct SyncBody {
  NodeId origin;
  int schema_version = 1;
  std::vector<SyncRecord> records;

  std::string encode() const;
  static SyncBody decode(const std::string& bytes);  // throws Err::Parse
};

struct ApplyReport {
  size_t messages = 0;
  size_t applied = 0;
  size_t skipped_permission = 0;
  size_t failed = 0;
  size_t dead_lettered = 0;
};

struct DispatchReport {
  size_t messages_sent = 0;
  size_t records_dispatched = 0;
};

// The SPB/SPC synchronization process: one symmetric engine per node; only
// destination selection depends on the role. The receiving half (the SNTS
// analog) applies arrived statement batches, one external transaction per
// message; the dispatching half (the Agent analog) drains the outbox into
// SyncBody messages.
class SyncEngine {
 public:
  SyncEngine(const TopologyConfig& topo, NodeId self, Coordinator& coord, QueueManager& queues,
             StatementStore& store);

  void set_env(NetworkEnv* env) { env_ = env; }
  void set_policy(PermissionPolicy policy) { policy_ = std::move(policy); }
  const PermissionPolicy& policy() const { return policy_; }

  // Drain every receivable sync message, one transaction per message.
  ApplyReport on_arrived();

  // One dispatch pass: batch PENDING outbox records and send them out.
  DispatchReport dispatch();

  // Schedule a dispatch run on the node's activity; bursts coalesce (many
  // notifications while one run is in flight produce at most one follow-up).
  void notify_dispatch();
  bool dispatch_pending() const { return dispatch_scheduled_ || dispatch_running_; }

  // Arrival notification from the queue layer (the OnArrived analog).
  void notify_arrived();
  bool receive_pending() const { return receive_scheduled_; }

  size_t dispatch_runs() const { return dispatch_runs_; }

  static bool check_permission(const PermissionPolicy& policy, const NodeId& origin,
                               const sql::Statement& stmt) {
    return policy.check(origin, stmt);
  }

  // Detected independence violations: the same primary key written by two
  // different origins (the paper assumes branch transactions are disjoint).
  const std::vector<std::string>& conflict_warnings() const { return conflict_warnings_; }

 private:
  void apply_one(const Message& msg, ApplyReport& report);
  void note_key_writer(const NodeId& origin, uint64_t record_id, const sql::Statement& stmt);
  std::vector<NodeId> destinations_for(const NodeId& origin) const;
  void run_dispatch();
  void run_receive();

  const TopologyConfig& topo_;
  NodeId self_;
  bool is_central_;
  Coordinator& coord_;
  QueueManager& queues_;
  StatementStore& store_;
  NetworkEnv* env_ = nullptr;
  PermissionPolicy policy_;

  std::map<std::string, int> attempts_;  // message id -> failed apply attempts
  std::map<std::string, std::pair<NodeId, uint64_t>> key_writers_;  // table\x1fkey -> (origin, rec)
  std::vector<std::string> conflict_warnings_;

  bool dispatch_scheduled_ = false;
  bool dispatch_running_ = false;
  bool dispatch_rerun_ = false;
  bool receive_scheduled_ = false;
  size_t dispatch_runs_ = 0;
};

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <filesystem>
#include <memory>

#include "qsync/mail.hpp"
#include "qsync/sync_engine.hpp"

namespace qsync {

// One enterprise node: WAL, coordinator, queue manager, statement store,
// sync engine, and mail system wired together. Construction replays the WAL
// (crash recovery); start() kicks any activities the recovered state calls
// for (pending outbox, receivable queues, unacked outgoing frames).
class Node {
 public:
  Node(const TopologyConfig& topo, NodeId id, std::filesystem::path state_dir, NetworkEnv* env);
  ~Node() = default;

  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  void start();

  // In-doubt transactions resolved by recovery at construction.
  size_t recovered_txns() const { return recovered_; }

  // The MainApp path: one external transaction running the statement and
  // registering it in the query table, then the dispatch notification.
  struct ExecResult {
    int64_t rows_affected = 0;
    uint64_t record_id = 0;
  };
  ExecResult client_exec(const std::string& sql_text);

  // Frame arrival from the transport.
  void on_frame(const std::string& bytes);
  void on_link_up(const NodeId& peer);

  // Nothing receivable, nothing pending, nothing in flight from this node.
  bool quiescent() const;

  const NodeId& id() const { return id_; }
  const TopologyConfig& topo() const { return topo_; }
  NodeRole role() const { return topo_.node(id_).role; }

  Wal& wal() { return *wal_; }
  Coordinator& txns() { return *coord_; }
  QueueManager& queues() { return *queues_; }
  StatementStore& store() { return *store_; }
  SyncEngine& sync() { return *sync_; }
  MailSystem& mail() { return *mail_; }
  const QueueManager& queues() const { return *queues_; }
  const StatementStore& store() const { return *store_; }
  const SyncEngine& sync() const { return *sync_; }
  const MailSystem& mail() const { return *mail_; }

  const std::filesystem::path& state_dir() const { return state_dir_; }

 private:
  const TopologyConfig& topo_;
  NodeId id_;
  std::filesystem::path state_dir_;
  NetworkEnv* env_;
  std::unique_ptr<Wal> wal_;
  std::unique_ptr<Coordinator> coord_;
  std::unique_ptr<QueueManager> queues_;
  std::unique_ptr<StatementStore> store_;
  std::unique_ptr<SyncEngine> sync_;
  std::unique_ptr<MailSystem> mail_;
  size_t recovered_ = 0;
};

// True when every node is quiescent; throws Err::NotQuiescent from
// converged() when not. Digest comparison runs over tables matching the glob.
bool all_quiescent(const std::vector<Node*>& nodes);
bool converged(const std::vector<Node*>& nodes, const std::string& table_filter);

}  // namespace qsync

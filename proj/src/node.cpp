// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/node.hpp"

#include "qsync/crashpoint.hpp"
#include "qsync/errors.hpp"

namespace qsync {

Node::Node(const TopologyConfig& topo, NodeId id, std::filesystem::path state_dir,
           NetworkEnv* env)
    : topo_(topo), id_(std::move(id)), state_dir_(std::move(state_dir)), env_(env) {
  topo_.node(id_);  // validate membership

  wal_ = std::make_unique<Wal>(state_dir_ / "queue.wal");
  coord_ = std::make_unique<Coordinator>(*wal_);
  coord_->set_node(id_);
  queues_ = std::make_unique<QueueManager>(id_, *wal_, *coord_);
  store_ = std::make_unique<StatementStore>(id_, *coord_);
  sync_ = std::make_unique<SyncEngine>(topo_, id_, *coord_, *queues_, *store_);
  mail_ = std::make_unique<MailSystem>(topo_, id_, *coord_, *queues_, *store_);

  coord_->register_participant(queues_.get());
  coord_->register_participant(store_.get());
  coord_->register_participant(mail_.get());

  queues_->set_env(env_);
  sync_->set_env(env_);
  mail_->set_env(env_);
  store_->set_clock([this] { return env_ ? env_->now_ms() : 0; });
  store_->set_on_outbox_added([this] { sync_->notify_dispatch(); });
  queues_->set_on_receivable([this](const std::string& queue) {
    if (queue == kSyncQueue) sync_->notify_arrived();
    if (queue == kMailQueue) mail_->notify_arrived();
  });

  // Crash recovery: rebuild the whole in-memory image from the WAL, applying
  // committed transactions' redo and presumed-aborting in-doubt ones.
  wal_->replay([this](WalType type, const std::string& payload) {
    switch (type) {
      case WalType::Prepared:
      case WalType::Commit:
      case WalType::Abort:
      case WalType::InternalCommit:
        coord_->replay_txn_record(type, payload);
        break;
      default:
        queues_->replay_direct(type, payload);
        break;
    }
  });
  recovered_ = coord_->finish_recovery();

  if (!queues_->has_queue(kSyncQueue)) queues_->create_queue(kSyncQueue, true);
  if (!queues_->has_queue(kMailQueue)) queues_->create_queue(kMailQueue, true);
}

void Node::start() {
  // Re-kick whatever the durable state says is outstanding.
  for (const auto& out : queues_->outgoing_stats()) {
    if (out.pending > 0) queues_->flush_outgoing(out.target.node);
  }
  if (queues_->receivable(kSyncQueue) > 0) sync_->notify_arrived();
  if (queues_->receivable(kMailQueue) > 0) mail_->notify_arrived();
  if (store_->pending_count() > 0) sync_->notify_dispatch();
}

Node::ExecResult Node::client_exec(const std::string& sql_text) {
  sql::Statement stmt = sql::parse_statement(sql_text);
  TxnContext& txn = coord_->begin(TxnMode::External);
  ExecResult result;
  try {
    result.rows_affected = store_->execute(txn, stmt);
    crashpoint::hit(id_, "exec.after_execute");
    auto ids = store_->register_executed(txn, {stmt.text});
    result.record_id = ids.at(0);
  } catch (const Error&) {
    coord_->abort(txn);
    throw;
  }
  if (coord_->commit(txn) != CommitOutcome::Committed) {
    throw Error(Err::TxnAborted, "client transaction aborted");
  }
  return result;
}

void Node::on_frame(const std::string& bytes) { queues_->on_frame(bytes); }

void Node::on_link_up(const NodeId& peer) { queues_->on_link_up(peer); }

bool Node::quiescent() const {
  if (queues_->receivable(kSyncQueue) > 0) return false;
  if (queues_->receivable(kMailQueue) > 0) return false;
  if (queues_->total_outgoing_pending() > 0) return false;
  if (queues_->held_count() > 0) return false;
  if (store_->pending_count() > 0) return false;
  if (sync_->dispatch_pending() || sync_->receive_pending()) return false;
  if (mail_->receive_pending()) return false;
  return true;
}

bool all_quiescent(const std::vector<Node*>& nodes) {
  for (const Node* n : nodes) {
    if (!n->quiescent()) return false;
  }
  return true;
}

bool converged(const std::vector<Node*>& nodes, const std::string& table_filter) {
  if (nodes.empty()) return true;
  for (Node* n : nodes) {
    if (!n->quiescent()) {
      throw Error(Err::NotQuiescent, "node " + n->id() + " still has work in flight");
    }
  }
  std::string first = nodes[0]->store().state_digest(table_filter);
  for (size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i]->store().state_digest(table_filter) != first) return false;
  }
  return true;
}

}  // namespace qsync

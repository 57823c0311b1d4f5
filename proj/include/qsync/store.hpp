// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qsync/bytes.hpp"
#include "qsync/dtx.hpp"
#include "qsync/message.hpp"
#include "qsync/sql.hpp"

namespace qsync {

struct TableState {
  std::string name;
  std::vector<sql::ColumnDef> columns;
  // Keyed by the first column (the implicit primary key); row includes it.
  std::map<sql::Value, std::vector<sql::Value>> rows;
};

enum class OutboxStatus : uint8_t { Pending = 1, Dispatched = 2 };

// A row of the "query table": one locally executed (or relayed) statement
// awaiting dispatch. origin/origin_record_id track the statement's original
// node so central's fan-out can skip the origin and receivers can check
// per-origin ordering.
struct QueryTableRecord {
  uint64_t record_id = 0;  // local monotonic; append order = commit order
  std::string sql;
  uint64_t origin_txn = 0;
  OutboxStatus status = OutboxStatus::Pending;
  uint64_t created_at = 0;
  NodeId origin;
  uint64_t origin_record_id = 0;
};

enum class ApplyOutcome : uint8_t { Applied = 1, SkippedPermission = 2, Failed = 3 };

struct AppliedLogEntry {
  MessageId source;
  uint32_t stmt_index = 0;
  NodeId origin;
  uint64_t origin_record_id = 0;
  std::string sql;
  ApplyOutcome outcome = ApplyOutcome::Applied;
  std::string error;
};

enum class DeadLetterReason : uint8_t { ParseFail = 1, ExecFail = 2, PermissionDenied = 3 };

struct DeadLetterEntry {
  MessageId id;
  DeadLetterReason reason = DeadLetterReason::ParseFail;
  std::string body;
};

// Minimal relational store for the replicated SQL subset, plus the outbox,
// the applied log, and the dead-letter log. Durability rides the node WAL
// through the coordinator: effects buffer per transaction and the redo blob
// re-executes statements on apply/replay. Readers see committed state only.
class StatementStore : public Participant {
 public:
  StatementStore(NodeId self, Coordinator& coord);

  void set_clock(std::function<uint64_t()> now) { now_ = std::move(now); }
  // Fired after a commit that appended outbox rows (the dispatch kick).
  void set_on_outbox_added(std::function<void()> cb) { on_outbox_added_ = std::move(cb); }

  // --- inside a transaction ---
  int64_t execute(TxnContext& txn, const sql::Statement& stmt);
  std::vector<uint64_t> register_executed(TxnContext& txn, const std::vector<std::string>& sqls);
  std::vector<uint64_t> register_relayed(
      TxnContext& txn, const NodeId& origin,
      const std::vector<std::pair<uint64_t, std::string>>& records);
  void mark_dispatched(TxnContext& txn, uint64_t record_id);
  void record_applied(TxnContext& txn, AppliedLogEntry entry);
  void record_dead_letter(TxnContext& txn, DeadLetterEntry entry);

  // --- committed-state readers ---
  std::vector<QueryTableRecord> pending_records() const;
  size_t pending_count() const;
  const std::vector<AppliedLogEntry>& applied_log() const { return applied_; }
  const std::vector<DeadLetterEntry>& dead_letters() const { return dead_; }
  std::vector<std::string> table_names() const;
  const TableState* table(const std::string& name) const;

  // Deterministic digest over sorted tables and rows matching the glob
  // (empty filter = "*"). Equal digests == bit-equal replicated state.
  std::string state_digest(const std::string& table_filter) const;

  // Tab-separated dump for the admin CLI.
  std::string dump_tsv(const std::string& table_filter) const;

  // --- Participant ---
  std::string participant_name() const override { return "store"; }
  bool prepare(uint64_t txn_id, std::string& redo_out) override;
  void apply(uint64_t txn_id, const std::string& redo, ApplyMode mode) override;
  void rollback(uint64_t txn_id) override;

 private:
  struct TxnBuf {
    std::map<std::string, TableState> overlay;  // copy-on-write view of touched tables
    ByteWriter ops;
    uint32_t op_count = 0;
    uint64_t records_taken = 0;
  };

  TxnBuf& buf_for(TxnContext& txn);
  static int64_t exec_on(std::map<std::string, TableState>& tables, const sql::Statement& stmt);
  uint64_t now() const { return now_ ? now_() : 0; }

  NodeId self_;
  Coordinator& coord_;
  std::function<uint64_t()> now_;
  std::function<void()> on_outbox_added_;

  std::map<std::string, TableState> tables_;
  std::map<uint64_t, QueryTableRecord> outbox_;
  std::vector<AppliedLogEntry> applied_;
  std::vector<DeadLetterEntry> dead_;
  uint64_t next_record_id_ = 1;
  std::map<uint64_t, TxnBuf> bufs_;
};

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qsync/topology.hpp"
#include "qsync/wal.hpp"

namespace qsync {

enum class TxnMode : uint8_t { Internal, External };
enum class TxnState : uint8_t { Active, Preparing, Committed, Aborted };
enum class CommitOutcome : uint8_t { Committed, Aborted };
enum class ApplyMode : uint8_t { Live, Replay };

// A resource manager enlisted in transactions: the queue manager, the
// statement store, and the mail store. Operations buffer per transaction;
// prepare() serializes the buffer into a redo blob (the durable intent),
// apply() executes a redo blob against live state. apply() must produce
// identical state whether called mid-commit (Live) or from WAL replay
// (Replay); Live mode additionally fires notification side effects.
class Participant {
 public:
  virtual ~Participant() = default;

  virtual std::string participant_name() const = 0;

  // Serialize buffered intent for txn_id. Returning false is a NO vote.
  virtual bool prepare(uint64_t txn_id, std::string& redo_out) = 0;

  virtual void apply(uint64_t txn_id, const std::string& redo, ApplyMode mode) = 0;

  // Discard buffered intent and restore any counters the buffered ops moved.
  virtual void rollback(uint64_t txn_id) = 0;
};

struct TxnContext {
  uint64_t id = 0;
  TxnMode mode = TxnMode::External;
  TxnState state = TxnState::Active;
  std::vector<Participant*> participants;  // enlist order = prepare/apply order
};

// Per-node transaction coordinator (the DTC/MTS analog). External
// transactions run two-phase commit over the co-located participants;
// internal transactions commit a single participant with one durable write.
// Recovery is presumed-abort: a PREPARED record without a COMMIT rolls back.
class Coordinator {
 public:
  explicit Coordinator(Wal& wal) : wal_(wal) {}

  void register_participant(Participant* p);

  TxnContext& begin(TxnMode mode);
  void enlist(TxnContext& txn, Participant* p);
  CommitOutcome commit(TxnContext& txn);
  void abort(TxnContext& txn);

  // --- recovery (driven by Node during WAL replay) ---
  void replay_txn_record(WalType type, const std::string& payload);
  // Presumed-abort any in-doubt transactions; returns how many were resolved.
  size_t finish_recovery();

  void set_node(NodeId n) { node_ = std::move(n); }

 private:
  struct Staged {
    std::vector<std::pair<std::string, std::string>> redo;  // (participant, blob)
  };

  void abort_locked(TxnContext& txn, bool log_abort);
  void retire(uint64_t txn_id);
  Participant* find_participant(const std::string& name);

  Wal& wal_;
  NodeId node_;
  std::vector<Participant*> registry_;
  std::map<uint64_t, std::unique_ptr<TxnContext>> live_;
  // Finished contexts stay alive a while: callers hold references across the
  // commit/abort call and often read the final state right after.
  std::deque<std::unique_ptr<TxnContext>> retired_;
  std::map<uint64_t, Staged> staging_;  // recovery only
  std::vector<uint64_t> staging_order_;
  uint64_t next_txn_id_ = 1;
};

}  // namespace qsync

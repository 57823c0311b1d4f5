// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/dtx.hpp"

#include <algorithm>
#include <deque>

#include "qsync/bytes.hpp"
#include "qsync/crashpoint.hpp"
#include "qsync/errors.hpp"

namespace qsync {

void Coordinator::register_participant(Participant* p) { registry_.push_back(p); }

Participant* Coordinator::find_participant(const std::string& name) {
  for (Participant* p : registry_) {
    if (p->participant_name() == name) return p;
  }
  throw Error(Err::CorruptLog, "log names unknown participant '" + name + "'");
}

TxnContext& Coordinator::begin(TxnMode mode) {
  auto txn = std::make_unique<TxnContext>();
  txn->id = next_txn_id_++;
  txn->mode = mode;
  TxnContext& ref = *txn;
  live_[ref.id] = std::move(txn);
  return ref;
}

void Coordinator::enlist(TxnContext& txn, Participant* p) {
  if (txn.state != TxnState::Active) {
    throw Error(Err::TxnNotActive, "enlist on txn " + std::to_string(txn.id));
  }
  if (std::find(txn.participants.begin(), txn.participants.end(), p) != txn.participants.end()) {
    return;
  }
  // An internal transaction cannot span resource managers; that is the whole
  // point of the internal/external distinction.
  if (txn.mode == TxnMode::Internal && !txn.participants.empty()) {
    throw Error(Err::TooManyParticipants,
                "internal txn already bound to " + txn.participants[0]->participant_name());
  }
  txn.participants.push_back(p);
}

CommitOutcome Coordinator::commit(TxnContext& txn) {
  if (txn.state != TxnState::Active) {
    throw Error(Err::TxnNotActive, "commit on txn " + std::to_string(txn.id));
  }

  if (txn.participants.empty()) {
    txn.state = TxnState::Committed;
    retire(txn.id);
    return CommitOutcome::Committed;
  }

  if (txn.mode == TxnMode::Internal) {
    Participant* p = txn.participants[0];
    std::string redo;
    bool yes = false;
    try {
      yes = p->prepare(txn.id, redo);
    } catch (const Error&) {
      yes = false;
    }
    if (!yes) {
      abort_locked(txn, false);
      return CommitOutcome::Aborted;
    }
    ByteWriter w;
    w.u64(txn.id);
    w.str(p->participant_name());
    w.blob(redo);
    crashpoint::hit(node_, "dtx.internal.before_commit");
    wal_.append(WalType::InternalCommit, w.take());
    crashpoint::hit(node_, "dtx.internal.after_commit");
    p->apply(txn.id, redo, ApplyMode::Live);
    txn.state = TxnState::Committed;
    retire(txn.id);
    return CommitOutcome::Committed;
  }

  txn.state = TxnState::Preparing;
  std::vector<std::pair<Participant*, std::string>> prepared;
  bool logged_any = false;
  for (Participant* p : txn.participants) {
    std::string redo;
    bool yes = false;
    try {
      yes = p->prepare(txn.id, redo);
    } catch (const Error&) {
      yes = false;
    }
    if (!yes) {
      if (logged_any) {
        ByteWriter w;
        w.u64(txn.id);
        wal_.append(WalType::Abort, w.take());
      }
      abort_locked(txn, false);
      return CommitOutcome::Aborted;
    }
    ByteWriter w;
    w.u64(txn.id);
    w.str(p->participant_name());
    w.blob(redo);
    wal_.append(WalType::Prepared, w.take());
    logged_any = true;
    crashpoint::hit(node_, ("dtx.prepared." + p->participant_name()).c_str());
    prepared.emplace_back(p, std::move(redo));
  }

  crashpoint::hit(node_, "dtx.before_commit");
  {
    ByteWriter w;
    w.u64(txn.id);
    wal_.append(WalType::Commit, w.take());
  }
  crashpoint::hit(node_, "dtx.after_commit");

  for (auto& [p, redo] : prepared) {
    p->apply(txn.id, redo, ApplyMode::Live);
  }
  crashpoint::hit(node_, "dtx.after_apply");

  txn.state = TxnState::Committed;
  retire(txn.id);
  return CommitOutcome::Committed;
}

void Coordinator::abort(TxnContext& txn) {
  if (txn.state != TxnState::Active && txn.state != TxnState::Preparing) {
    throw Error(Err::TxnFinished, "abort on txn " + std::to_string(txn.id));
  }
  abort_locked(txn, txn.state == TxnState::Preparing);
}

void Coordinator::abort_locked(TxnContext& txn, bool log_abort) {
  if (log_abort) {
    ByteWriter w;
    w.u64(txn.id);
    wal_.append(WalType::Abort, w.take());
  }
  for (Participant* p : txn.participants) {
    p->rollback(txn.id);
  }
  txn.state = TxnState::Aborted;
  retire(txn.id);
}

void Coordinator::retire(uint64_t txn_id) {
  auto it = live_.find(txn_id);
  if (it == live_.end()) return;
  retired_.push_back(std::move(it->second));
  live_.erase(it);
  while (retired_.size() > 256) retired_.pop_front();
}

void Coordinator::replay_txn_record(WalType type, const std::string& payload) {
  ByteReader r(payload);
  uint64_t id = r.u64();
  next_txn_id_ = std::max(next_txn_id_, id + 1);
  switch (type) {
    case WalType::Prepared: {
      std::string name = r.str();
      std::string redo = r.blob();
      if (!staging_.count(id)) staging_order_.push_back(id);
      staging_[id].redo.emplace_back(std::move(name), std::move(redo));
      break;
    }
    case WalType::Commit: {
      auto it = staging_.find(id);
      if (it == staging_.end()) break;  // empty txn
      for (auto& [name, redo] : it->second.redo) {
        find_participant(name)->apply(id, redo, ApplyMode::Replay);
      }
      staging_.erase(it);
      std::erase(staging_order_, id);
      break;
    }
    case WalType::Abort: {
      staging_.erase(id);
      std::erase(staging_order_, id);
      break;
    }
    case WalType::InternalCommit: {
      std::string name = r.str();
      std::string redo = r.blob();
      find_participant(name)->apply(id, redo, ApplyMode::Replay);
      break;
    }
    default:
      throw Error(Err::CorruptLog, "unexpected record in txn replay");
  }
}

size_t Coordinator::finish_recovery() {
  size_t resolved = staging_order_.size();
  for (uint64_t id : staging_order_) {
    ByteWriter w;
    w.u64(id);
    wal_.append(WalType::Abort, w.take());
  }
  staging_.clear();
  staging_order_.clear();
  return resolved;
}

}  // namespace qsync

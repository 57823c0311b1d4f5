// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/sync_engine.hpp"

#include <json.hpp>

#include <optional>

#include "qsync/errors.hpp"

namespace qsync {

using ordered_json = nlohmann::ordered_json;

std::string SyncBody::encode() const {
  ordered_json j;
  j["origin"] = origin;
  j["schema_version"] = schema_version;
  ordered_json recs = ordered_json::array();
  for (const auto& r : records) {
    ordered_json rec;
    rec["id"] = r.id;
    rec["sql"] = r.sql;
    recs.push_back(std::move(rec));
  }
  j["records"] = std::move(recs);
  return j.dump();
}

SyncBody SyncBody::decode(const std::string& bytes) {
  ordered_json j = ordered_json::parse(bytes, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Err::Parse, "sync body is not a JSON object");
  }
  SyncBody body;
  if (!j.contains("origin") || !j["origin"].is_string() || !j.contains("records") ||
      !j["records"].is_array() || !j.contains("schema_version") ||
      !j["schema_version"].is_number_integer()) {
    throw Error(Err::Parse, "sync body missing origin/schema_version/records");
  }
  body.origin = j["origin"].get<std::string>();
  body.schema_version = j["schema_version"].get<int>();
  for (const auto& rec : j["records"]) {
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("sql") ||
        !rec["id"].is_number_unsigned() || !rec["sql"].is_string()) {
      throw Error(Err::Parse, "sync record needs {id, sql}");
    }
    body.records.push_back(SyncRecord{rec["id"].get<uint64_t>(), rec["sql"].get<std::string>()});
  }
  if (body.records.empty()) throw Error(Err::Parse, "sync body has no records");
  return body;
}

SyncEngine::SyncEngine(const TopologyConfig& topo, NodeId self, Coordinator& coord,
                       QueueManager& queues, StatementStore& store)
    : topo_(topo),
      self_(std::move(self)),
      is_central_(topo.central() == self_),
      coord_(coord),
      queues_(queues),
      store_(store) {}

ApplyReport SyncEngine::on_arrived() {
  ApplyReport report;
  if (!queues_.has_queue(kSyncQueue)) return report;
  QueueRef q = queues_.queue_ref(kSyncQueue);
  while (true) {
    auto next = queues_.receive(nullptr, q, RecvMode::Peek);
    if (!next) break;
    size_t dead_before = report.dead_lettered;
    size_t done_before = report.messages;
    apply_one(*next, report);
    if (report.messages == done_before && report.dead_lettered == dead_before) {
      break;  // could not consume the head message; try again on next notify
    }
  }
  return report;
}

void SyncEngine::apply_one(const Message& head, ApplyReport& report) {
  QueueRef q = queues_.queue_ref(kSyncQueue);
  const std::string key = head.id.str();
  while (true) {
    TxnContext& txn = coord_.begin(TxnMode::External);
    auto msg = queues_.receive(&txn, q, RecvMode::Remove);
    if (!msg) {
      coord_.abort(txn);
      return;
    }

    SyncBody body;
    bool decoded = true;
    try {
      body = SyncBody::decode(msg->body);
    } catch (const Error&) {
      decoded = false;
    }
    if (!decoded) {
      // Poison body: consume the message and keep the bytes for inspection.
      store_.record_dead_letter(txn, DeadLetterEntry{msg->id, DeadLetterReason::ParseFail,
                                                     msg->body});
      if (coord_.commit(txn) == CommitOutcome::Committed) {
        ++report.dead_lettered;
        attempts_.erase(key);
      }
      return;
    }

    ApplyReport local;  // tallies for this attempt only
    std::vector<std::pair<uint64_t, std::string>> relay;
    for (size_t idx = 0; idx < body.records.size(); ++idx) {
      const SyncRecord& rec = body.records[idx];
      AppliedLogEntry entry;
      entry.source = msg->id;
      entry.stmt_index = static_cast<uint32_t>(idx);
      entry.origin = body.origin;
      entry.origin_record_id = rec.id;
      entry.sql = rec.sql;

      sql::Statement stmt;
      bool parsed = true;
      try {
        stmt = sql::parse_statement(rec.sql);
      } catch (const Error& e) {
        parsed = false;
        entry.outcome = ApplyOutcome::Failed;
        entry.error = e.what();
      }
      if (parsed) {
        if (!check_permission(policy_, body.origin, stmt)) {
          entry.outcome = ApplyOutcome::SkippedPermission;
        } else {
          try {
            store_.execute(txn, stmt);
            entry.outcome = ApplyOutcome::Applied;
            note_key_writer(body.origin, rec.id, stmt);
          } catch (const Error& e) {
            entry.outcome = ApplyOutcome::Failed;
            entry.error = e.what();
          }
        }
      }
      switch (entry.outcome) {
        case ApplyOutcome::Applied:
          ++local.applied;
          if (is_central_) relay.emplace_back(rec.id, entry.sql);
          break;
        case ApplyOutcome::SkippedPermission: ++local.skipped_permission; break;
        case ApplyOutcome::Failed: ++local.failed; break;
      }
      store_.record_applied(txn, std::move(entry));
    }
    if (!relay.empty()) {
      store_.register_relayed(txn, body.origin, relay);
    }

    if (coord_.commit(txn) == CommitOutcome::Committed) {
      ++report.messages;
      report.applied += local.applied;
      report.skipped_permission += local.skipped_permission;
      report.failed += local.failed;
      attempts_.erase(key);
      return;
    }

    if (++attempts_[key] < kApplyRetryBudget) continue;

    // Retry budget exhausted: consume and dead-letter the message.
    TxnContext& dl = coord_.begin(TxnMode::External);
    auto poisoned = queues_.receive(&dl, q, RecvMode::Remove);
    if (poisoned) {
      store_.record_dead_letter(
          dl, DeadLetterEntry{poisoned->id, DeadLetterReason::ExecFail, poisoned->body});
      if (coord_.commit(dl) == CommitOutcome::Committed) {
        ++report.dead_lettered;
        attempts_.erase(key);
        return;
      }
    } else {
      coord_.abort(dl);
    }
    return;  // give up for now; the next notification retries
  }
}

void SyncEngine::note_key_writer(const NodeId& origin, uint64_t record_id,
                                 const sql::Statement& stmt) {
  // Independence precondition check: flag the same primary key written from
  // two different origins. Best effort; UPDATE/DELETE count only when the
  // predicate pins the key column.
  const TableState* t = store_.table(stmt.table());
  std::optional<sql::Value> pk;
  if (stmt.kind == sql::SqlKind::Insert) {
    const auto& ins = std::get<sql::InsertStmt>(stmt.node);
    if (!ins.values.empty()) pk = ins.values[0];
  } else if (t && !t->columns.empty()) {
    const std::string& key_col = t->columns[0].name;
    const std::vector<sql::Condition>* where = nullptr;
    if (stmt.kind == sql::SqlKind::Update) where = &std::get<sql::UpdateStmt>(stmt.node).where;
    if (stmt.kind == sql::SqlKind::Delete) where = &std::get<sql::DeleteStmt>(stmt.node).where;
    if (where) {
      for (const auto& c : *where) {
        if (c.column == key_col) pk = c.value;
      }
    }
  }
  if (!pk) return;
  std::string key = stmt.table() + '\x1f' + pk->literal();
  auto it = key_writers_.find(key);
  if (it != key_writers_.end() && it->second.first != origin) {
    conflict_warnings_.push_back("key " + stmt.table() + "/" + pk->literal() +
                                 " written by both " + it->second.first + " and " + origin);
  }
  key_writers_[key] = {origin, record_id};
}

std::vector<NodeId> SyncEngine::destinations_for(const NodeId& origin) const {
  std::vector<NodeId> dests;
  if (is_central_) {
    for (const NodeId& b : topo_.branches()) {
      if (b != origin) dests.push_back(b);  // never echo back to the origin
    }
  } else {
    dests.push_back(topo_.central());
  }
  return dests;
}

DispatchReport SyncEngine::dispatch() {
  DispatchReport report;
  std::vector<QueryTableRecord> pending = store_.pending_records();
  size_t i = 0;
  while (i < pending.size()) {
    // One batch: a run of consecutive records from the same origin.
    size_t j = i;
    while (j < pending.size() && j - i < kDispatchBatch &&
           pending[j].origin == pending[i].origin) {
      ++j;
    }
    SyncBody body;
    body.origin = pending[i].origin;
    for (size_t k = i; k < j; ++k) {
      body.records.push_back(SyncRecord{pending[k].origin_record_id, pending[k].sql});
    }
    std::string encoded = body.encode();

    TxnContext& txn = coord_.begin(TxnMode::External);
    bool ok = true;
    try {
      for (const NodeId& dest : destinations_for(body.origin)) {
        queues_.send(&txn, QueueRef{dest, kSyncQueue, true}, MsgKind::Sync, encoded);
      }
      for (size_t k = i; k < j; ++k) {
        store_.mark_dispatched(txn, pending[k].record_id);
      }
    } catch (const Error&) {
      ok = false;
    }
    if (!ok || coord_.commit(txn) != CommitOutcome::Committed) {
      if (txn.state == TxnState::Active) coord_.abort(txn);
      break;  // records stay PENDING; the next dispatch run retries
    }
    report.messages_sent += destinations_for(body.origin).size();
    report.records_dispatched += j - i;
    i = j;
  }
  return report;
}

void SyncEngine::notify_dispatch() {
  if (dispatch_running_) {
    dispatch_rerun_ = true;
    return;
  }
  if (dispatch_scheduled_) return;
  if (!env_) return;  // without an environment, dispatch() is driven manually
  dispatch_scheduled_ = true;
  env_->post(self_, [this] { run_dispatch(); });
}

void SyncEngine::run_dispatch() {
  dispatch_scheduled_ = false;
  dispatch_running_ = true;
  ++dispatch_runs_;
  dispatch();
  dispatch_running_ = false;
  if (dispatch_rerun_) {
    dispatch_rerun_ = false;
    notify_dispatch();
  }
}

void SyncEngine::notify_arrived() {
  if (receive_scheduled_) return;
  if (!env_) return;
  receive_scheduled_ = true;
  env_->post(self_, [this] { run_receive(); });
}

void SyncEngine::run_receive() {
  receive_scheduled_ = false;
  on_arrived();
}

}  // namespace qsync

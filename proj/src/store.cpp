// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/store.hpp"

#include <algorithm>

#include "qsync/errors.hpp"

namespace qsync {

namespace {

constexpr uint8_t kOpExec = 1;
constexpr uint8_t kOpOutboxAdd = 2;
constexpr uint8_t kOpOutboxMark = 3;
constexpr uint8_t kOpApplied = 4;
constexpr uint8_t kOpDeadLetter = 5;

constexpr char kFieldSep = '\x1f';
constexpr char kRowSep = '\x1e';

const sql::ColumnDef* find_column(const TableState& t, const std::string& name) {
  for (const auto& c : t.columns) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

size_t column_index(const TableState& t, const std::string& name) {
  for (size_t i = 0; i < t.columns.size(); ++i) {
    if (t.columns[i].name == name) return i;
  }
  throw Error(Err::TypeMismatch, "no column '" + name + "' in " + t.name);
}

void check_type(const TableState& t, const std::string& col, const sql::Value& v) {
  const sql::ColumnDef* def = find_column(t, col);
  if (!def) throw Error(Err::TypeMismatch, "no column '" + col + "' in " + t.name);
  if (def->type != v.type) {
    throw Error(Err::TypeMismatch, "column '" + col + "' of " + t.name + " given " +
                                       (v.type == sql::ColType::Int ? "INT" : "TEXT"));
  }
}

bool row_matches(const TableState& t, const std::vector<sql::Value>& row,
                 const std::vector<sql::Condition>& where) {
  for (const auto& c : where) {
    if (row[column_index(t, c.column)] != c.value) return false;
  }
  return true;
}

}  // namespace

StatementStore::StatementStore(NodeId self, Coordinator& coord)
    : self_(std::move(self)), coord_(coord) {}

StatementStore::TxnBuf& StatementStore::buf_for(TxnContext& txn) {
  if (txn.state != TxnState::Active) {
    throw Error(Err::TxnNotActive, "store op in finished txn " + std::to_string(txn.id));
  }
  coord_.enlist(txn, this);
  return bufs_[txn.id];
}

int64_t StatementStore::exec_on(std::map<std::string, TableState>& tables,
                                const sql::Statement& stmt) {
  switch (stmt.kind) {
    case sql::SqlKind::CreateTable: {
      const auto& c = std::get<sql::CreateTableStmt>(stmt.node);
      if (tables.count(c.table)) throw Error(Err::TableExists, "table '" + c.table + "'");
      for (size_t i = 0; i < c.columns.size(); ++i) {
        for (size_t j = i + 1; j < c.columns.size(); ++j) {
          if (c.columns[i].name == c.columns[j].name) {
            throw Error(Err::Validation, "duplicate column '" + c.columns[i].name + "'");
          }
        }
      }
      TableState& t = tables[c.table];
      t.name = c.table;
      t.columns = c.columns;
      return 0;
    }
    case sql::SqlKind::Insert: {
      const auto& ins = std::get<sql::InsertStmt>(stmt.node);
      auto it = tables.find(ins.table);
      if (it == tables.end()) throw Error(Err::NoSuchTable, "table '" + ins.table + "'");
      TableState& t = it->second;
      if (ins.values.size() != t.columns.size()) {
        throw Error(Err::TypeMismatch, "expected " + std::to_string(t.columns.size()) +
                                           " values for " + t.name);
      }
      for (size_t i = 0; i < ins.values.size(); ++i) {
        if (ins.values[i].type != t.columns[i].type) {
          throw Error(Err::TypeMismatch, "column '" + t.columns[i].name + "' of " + t.name);
        }
      }
      const sql::Value& key = ins.values[0];
      if (t.rows.count(key)) {
        throw Error(Err::DuplicateKey, t.name + " key " + key.literal());
      }
      t.rows.emplace(key, ins.values);
      return 1;
    }
    case sql::SqlKind::Update: {
      const auto& u = std::get<sql::UpdateStmt>(stmt.node);
      auto it = tables.find(u.table);
      if (it == tables.end()) throw Error(Err::NoSuchTable, "table '" + u.table + "'");
      TableState& t = it->second;
      for (const auto& a : u.sets) check_type(t, a.column, a.value);
      for (const auto& c : u.where) check_type(t, c.column, c.value);
      std::vector<sql::Value> keys;
      for (const auto& [key, row] : t.rows) {
        if (row_matches(t, row, u.where)) keys.push_back(key);
      }
      for (const auto& key : keys) {
        std::vector<sql::Value> row = t.rows.at(key);
        for (const auto& a : u.sets) {
          row[column_index(t, a.column)] = a.value;
        }
        const sql::Value& new_key = row[0];
        if (!(new_key == key)) {
          if (t.rows.count(new_key)) {
            throw Error(Err::DuplicateKey, t.name + " key " + new_key.literal());
          }
          t.rows.erase(key);
        }
        t.rows[new_key] = std::move(row);
      }
      return static_cast<int64_t>(keys.size());
    }
    case sql::SqlKind::Delete: {
      const auto& d = std::get<sql::DeleteStmt>(stmt.node);
      auto it = tables.find(d.table);
      if (it == tables.end()) throw Error(Err::NoSuchTable, "table '" + d.table + "'");
      TableState& t = it->second;
      for (const auto& c : d.where) check_type(t, c.column, c.value);
      std::vector<sql::Value> keys;
      for (const auto& [key, row] : t.rows) {
        if (row_matches(t, row, d.where)) keys.push_back(key);
      }
      for (const auto& key : keys) t.rows.erase(key);
      return static_cast<int64_t>(keys.size());
    }
  }
  throw Error(Err::SqlSyntax, "bad statement kind");
}

int64_t StatementStore::execute(TxnContext& txn, const sql::Statement& stmt) {
  if (txn.mode != TxnMode::External) {
    throw Error(Err::Validation, "execute requires an external transaction");
  }
  TxnBuf& buf = buf_for(txn);
  const std::string& t = stmt.table();
  if (!buf.overlay.count(t)) {
    auto it = tables_.find(t);
    if (it != tables_.end()) buf.overlay[t] = it->second;
  }
  // A failing statement must leave no partial effect (e.g. a multi-row
  // UPDATE that hits a key collision halfway through).
  std::optional<TableState> before;
  if (auto ov = buf.overlay.find(t); ov != buf.overlay.end()) before = ov->second;
  int64_t rows = 0;
  try {
    rows = exec_on(buf.overlay, stmt);
  } catch (...) {
    if (before) {
      buf.overlay[t] = std::move(*before);
    } else {
      buf.overlay.erase(t);
    }
    throw;
  }
  buf.ops.u8(kOpExec);
  buf.ops.str(stmt.text);
  ++buf.op_count;
  return rows;
}

std::vector<uint64_t> StatementStore::register_executed(TxnContext& txn,
                                                        const std::vector<std::string>& sqls) {
  std::vector<std::pair<uint64_t, std::string>> records;
  records.reserve(sqls.size());
  for (const auto& s : sqls) records.emplace_back(0, s);
  return register_relayed(txn, self_, records);
}

std::vector<uint64_t> StatementStore::register_relayed(
    TxnContext& txn, const NodeId& origin,
    const std::vector<std::pair<uint64_t, std::string>>& records) {
  TxnBuf& buf = buf_for(txn);
  std::vector<uint64_t> ids;
  for (const auto& [origin_record_id, sql_text] : records) {
    uint64_t id = next_record_id_++;
    buf.records_taken++;
    // A locally executed statement is its own origin.
    uint64_t orid = origin_record_id == 0 ? id : origin_record_id;
    buf.ops.u8(kOpOutboxAdd);
    buf.ops.u64(id);
    buf.ops.str(sql_text);
    buf.ops.u64(txn.id);
    buf.ops.u64(now());
    buf.ops.str(origin);
    buf.ops.u64(orid);
    ++buf.op_count;
    ids.push_back(id);
  }
  return ids;
}

void StatementStore::mark_dispatched(TxnContext& txn, uint64_t record_id) {
  auto it = outbox_.find(record_id);
  if (it == outbox_.end()) {
    throw Error(Err::NoSuchRecord, "outbox record " + std::to_string(record_id));
  }
  if (it->second.status != OutboxStatus::Pending) {
    throw Error(Err::NotPending, "outbox record " + std::to_string(record_id));
  }
  TxnBuf& buf = buf_for(txn);
  buf.ops.u8(kOpOutboxMark);
  buf.ops.u64(record_id);
  ++buf.op_count;
}

void StatementStore::record_applied(TxnContext& txn, AppliedLogEntry e) {
  TxnBuf& buf = buf_for(txn);
  buf.ops.u8(kOpApplied);
  buf.ops.str(e.source.origin);
  buf.ops.u64(e.source.seq);
  buf.ops.u32(e.stmt_index);
  buf.ops.str(e.origin);
  buf.ops.u64(e.origin_record_id);
  buf.ops.str(e.sql);
  buf.ops.u8(static_cast<uint8_t>(e.outcome));
  buf.ops.str(e.error);
  ++buf.op_count;
}

void StatementStore::record_dead_letter(TxnContext& txn, DeadLetterEntry e) {
  TxnBuf& buf = buf_for(txn);
  buf.ops.u8(kOpDeadLetter);
  buf.ops.str(e.id.origin);
  buf.ops.u64(e.id.seq);
  buf.ops.u8(static_cast<uint8_t>(e.reason));
  buf.ops.blob(e.body);
  ++buf.op_count;
}

std::vector<QueryTableRecord> StatementStore::pending_records() const {
  std::vector<QueryTableRecord> out;
  for (const auto& [id, rec] : outbox_) {
    if (rec.status == OutboxStatus::Pending) out.push_back(rec);
  }
  return out;
}

size_t StatementStore::pending_count() const {
  size_t n = 0;
  for (const auto& [id, rec] : outbox_) {
    if (rec.status == OutboxStatus::Pending) ++n;
  }
  return n;
}

std::vector<std::string> StatementStore::table_names() const {
  std::vector<std::string> out;
  for (const auto& [name, t] : tables_) out.push_back(name);
  return out;
}

const TableState* StatementStore::table(const std::string& name) const {
  auto it = tables_.find(name);
  return it == tables_.end() ? nullptr : &it->second;
}

std::string StatementStore::state_digest(const std::string& table_filter) const {
  const std::string pattern = table_filter.empty() ? "*" : table_filter;
  std::string canon;
  for (const auto& [name, t] : tables_) {  // std::map: sorted table names
    if (!glob_match(pattern, name)) continue;
    canon += name;
    canon += kFieldSep;
    canon += "#schema";
    for (const auto& c : t.columns) {
      canon += kFieldSep;
      canon += c.name + (c.type == sql::ColType::Int ? ":INT" : ":TEXT");
    }
    canon += kRowSep;
    for (const auto& [key, row] : t.rows) {  // sorted by primary key
      canon += name;
      canon += kFieldSep;
      canon += key.literal();
      for (size_t i = 0; i < row.size(); ++i) {
        canon += kFieldSep;
        canon += t.columns[i].name + "=" + row[i].literal();
      }
      canon += kRowSep;
    }
  }
  return sha256_hex(canon);
}

std::string StatementStore::dump_tsv(const std::string& table_filter) const {
  const std::string pattern = table_filter.empty() ? "*" : table_filter;
  std::string out;
  for (const auto& [name, t] : tables_) {
    if (!glob_match(pattern, name)) continue;
    out += "# " + name;
    for (const auto& c : t.columns) {
      out += "\t" + c.name + (c.type == sql::ColType::Int ? ":INT" : ":TEXT");
    }
    out += "\n";
    for (const auto& [key, row] : t.rows) {
      for (size_t i = 0; i < row.size(); ++i) {
        if (i) out += "\t";
        out += row[i].type == sql::ColType::Int ? std::to_string(row[i].i) : row[i].s;
      }
      out += "\n";
    }
  }
  return out;
}

bool StatementStore::prepare(uint64_t txn_id, std::string& redo_out) {
  ByteWriter w;
  auto it = bufs_.find(txn_id);
  if (it == bufs_.end()) {
    w.u32(0);
    redo_out = w.take();
    return true;
  }
  w.u32(it->second.op_count);
  w.raw(it->second.ops.bytes().data(), it->second.ops.bytes().size());
  redo_out = w.take();
  return true;
}

void StatementStore::apply(uint64_t txn_id, const std::string& redo, ApplyMode mode) {
  ByteReader r(redo);
  uint32_t n = r.u32();
  bool outbox_added = false;
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t op = r.u8();
    switch (op) {
      case kOpExec: {
        std::string text = r.str();
        exec_on(tables_, sql::parse_statement(text));
        break;
      }
      case kOpOutboxAdd: {
        QueryTableRecord rec;
        rec.record_id = r.u64();
        rec.sql = r.str();
        rec.origin_txn = r.u64();
        rec.created_at = r.u64();
        rec.origin = r.str();
        rec.origin_record_id = r.u64();
        rec.status = OutboxStatus::Pending;
        next_record_id_ = std::max(next_record_id_, rec.record_id + 1);
        outbox_.emplace(rec.record_id, std::move(rec));
        outbox_added = true;
        break;
      }
      case kOpOutboxMark: {
        uint64_t id = r.u64();
        auto it = outbox_.find(id);
        if (it != outbox_.end()) it->second.status = OutboxStatus::Dispatched;
        break;
      }
      case kOpApplied: {
        AppliedLogEntry e;
        e.source.origin = r.str();
        e.source.seq = r.u64();
        e.stmt_index = r.u32();
        e.origin = r.str();
        e.origin_record_id = r.u64();
        e.sql = r.str();
        e.outcome = static_cast<ApplyOutcome>(r.u8());
        e.error = r.str();
        applied_.push_back(std::move(e));
        break;
      }
      case kOpDeadLetter: {
        DeadLetterEntry e;
        e.id.origin = r.str();
        e.id.seq = r.u64();
        e.reason = static_cast<DeadLetterReason>(r.u8());
        e.body = r.blob();
        dead_.push_back(std::move(e));
        break;
      }
      default:
        throw Error(Err::CorruptLog, "bad store redo op");
    }
  }
  bufs_.erase(txn_id);
  if (mode == ApplyMode::Live && outbox_added && on_outbox_added_) on_outbox_added_();
}

void StatementStore::rollback(uint64_t txn_id) {
  auto it = bufs_.find(txn_id);
  if (it == bufs_.end()) return;
  next_record_id_ -= it->second.records_taken;
  bufs_.erase(it);
}

}  // namespace qsync

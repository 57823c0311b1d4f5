// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace qsync::sql {

enum class ColType : uint8_t { Int, Text };

struct Value {
  ColType type = ColType::Int;
  int64_t i = 0;
  std::string s;

  static Value of_int(int64_t v) { return Value{ColType::Int, v, {}}; }
  static Value of_text(std::string v) { return Value{ColType::Text, 0, std::move(v)}; }

  friend bool operator==(const Value&, const Value&) = default;
  friend auto operator<=>(const Value&, const Value&) = default;

  // Canonical literal: decimal for INT, single-quoted with '' escapes for TEXT.
  std::string literal() const;
};

struct ColumnDef {
  std::string name;
  ColType type;
  friend bool operator==(const ColumnDef&, const ColumnDef&) = default;
};

struct CreateTableStmt {
  std::string table;
  std::vector<ColumnDef> columns;
};

struct InsertStmt {
  std::string table;
  std::vector<Value> values;  // positional; first is the primary key
};

struct Assignment {
  std::string column;
  Value value;
};

// Equality-only predicate; conjunction of column = literal.
struct Condition {
  std::string column;
  Value value;
};

struct UpdateStmt {
  std::string table;
  std::vector<Assignment> sets;
  std::vector<Condition> where;
};

struct DeleteStmt {
  std::string table;
  std::vector<Condition> where;
};

enum class SqlKind : uint8_t { CreateTable, Insert, Update, Delete };

struct Statement {
  SqlKind kind = SqlKind::Insert;
  std::variant<CreateTableStmt, InsertStmt, UpdateStmt, DeleteStmt> node;
  std::string text;  // canonical rendering; format(parse(t)) is idempotent

  const std::string& table() const;
};

// Whitespace-insensitive, keywords case-insensitive. Throws SqlError with
// Err::SqlSyntax (position + expected set) or Err::UnsupportedConstruct
// (SELECT and friends, joins, subqueries, non-equality predicates).
Statement parse_statement(std::string_view input);

std::string format_statement(const Statement& stmt);

const char* kind_name(SqlKind k);  // "CREATE" | "INSERT" | "UPDATE" | "DELETE"

}  // namespace qsync::sql

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/sql.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "qsync/errors.hpp"

namespace qsync::sql {

namespace {

enum class Tok : uint8_t { Ident, Int, String, Punct, End };

struct Token {
  Tok kind;
  std::string text;   // identifier (as written) / punct char / decoded string
  int64_t ival = 0;
  size_t pos = 0;
};

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

// Keyword set of the replicated subset. Anything SQL-looking outside it is
// reported as unsupported rather than a bare syntax error.
const char* kUnsupportedLeads[] = {"SELECT", "DROP", "ALTER", "TRUNCATE", "BEGIN",
                                   "COMMIT", "ROLLBACK", "GRANT", "MERGE", "REPLACE"};

class Lexer {
 public:
  explicit Lexer(std::string_view in) : in_(in) {}

  Token next() {
    skip_ws();
    Token t;
    t.pos = pos_;
    if (pos_ >= in_.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = in_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < in_.size() &&
             (std::isalnum(static_cast<unsigned char>(in_[pos_])) || in_[pos_] == '_')) {
        ++pos_;
      }
      t.kind = Tok::Ident;
      t.text = std::string(in_.substr(start, pos_ - start));
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '-' && pos_ + 1 < in_.size() &&
         std::isdigit(static_cast<unsigned char>(in_[pos_ + 1])))) {
      size_t start = pos_;
      if (c == '-') ++pos_;
      while (pos_ < in_.size() && std::isdigit(static_cast<unsigned char>(in_[pos_]))) ++pos_;
      t.kind = Tok::Int;
      auto sv = in_.substr(start, pos_ - start);
      auto res = std::from_chars(sv.data(), sv.data() + sv.size(), t.ival);
      if (res.ec != std::errc()) {
        throw SqlError(Err::SqlSyntax, start, "integer literal in range");
      }
      return t;
    }
    if (c == '\'') {
      ++pos_;
      std::string out;
      while (true) {
        if (pos_ >= in_.size()) {
          throw SqlError(Err::SqlSyntax, t.pos, "closing quote");
        }
        if (in_[pos_] == '\'') {
          if (pos_ + 1 < in_.size() && in_[pos_ + 1] == '\'') {
            out.push_back('\'');
            pos_ += 2;
            continue;
          }
          ++pos_;
          break;
        }
        out.push_back(in_[pos_]);
        ++pos_;
      }
      t.kind = Tok::String;
      t.text = std::move(out);
      return t;
    }
    if (c == '(' || c == ')' || c == ',' || c == '=' || c == ';' || c == '*' || c == '.') {
      t.kind = Tok::Punct;
      t.text = std::string(1, c);
      ++pos_;
      return t;
    }
    if (c == '<' || c == '>' || c == '!') {
      throw SqlError(Err::UnsupportedConstruct, pos_, "equality predicate (only = is supported)");
    }
    throw SqlError(Err::SqlSyntax, pos_, "statement token");
  }

 private:
  void skip_ws() {
    while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) ++pos_;
  }
  std::string_view in_;
  size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view in) : lex_(in) { advance(); }

  Statement statement() {
    expect_kind(Tok::Ident, "statement keyword");
    std::string kw = upper(cur_.text);
    for (const char* bad : kUnsupportedLeads) {
      if (kw == bad) {
        throw SqlError(Err::UnsupportedConstruct, cur_.pos,
                       "one of CREATE/INSERT/UPDATE/DELETE (" + kw + " is not replicated)");
      }
    }
    Statement out;
    if (kw == "CREATE") {
      out.kind = SqlKind::CreateTable;
      out.node = create_table();
    } else if (kw == "INSERT") {
      out.kind = SqlKind::Insert;
      out.node = insert();
    } else if (kw == "UPDATE") {
      out.kind = SqlKind::Update;
      out.node = update();
    } else if (kw == "DELETE") {
      out.kind = SqlKind::Delete;
      out.node = del();
    } else {
      throw SqlError(Err::SqlSyntax, cur_.pos, "CREATE, INSERT, UPDATE or DELETE");
    }
    if (cur_.kind == Tok::Punct && cur_.text == ";") advance();
    if (cur_.kind != Tok::End) {
      throw SqlError(Err::SqlSyntax, cur_.pos, "end of statement");
    }
    out.text = format_statement(out);
    return out;
  }

 private:
  void advance() { cur_ = lex_.next(); }

  void expect_kind(Tok k, const char* what) {
    if (cur_.kind != k) throw SqlError(Err::SqlSyntax, cur_.pos, what);
  }

  void keyword(const char* kw) {
    if (cur_.kind != Tok::Ident || upper(cur_.text) != kw) {
      throw SqlError(Err::SqlSyntax, cur_.pos, kw);
    }
    advance();
  }

  bool peek_keyword(const char* kw) const {
    return cur_.kind == Tok::Ident && upper(cur_.text) == kw;
  }

  void punct(char c) {
    if (cur_.kind != Tok::Punct || cur_.text[0] != c) {
      throw SqlError(Err::SqlSyntax, cur_.pos, std::string("'") + c + "'");
    }
    advance();
  }

  std::string identifier(const char* what) {
    expect_kind(Tok::Ident, what);
    std::string kw = upper(cur_.text);
    if (kw == "JOIN" || kw == "SELECT") {
      throw SqlError(Err::UnsupportedConstruct, cur_.pos, what);
    }
    std::string name = cur_.text;
    if (name.size() > 64) throw SqlError(Err::SqlSyntax, cur_.pos, "identifier of at most 64 chars");
    advance();
    return name;
  }

  Value value() {
    if (cur_.kind == Tok::Int) {
      Value v = Value::of_int(cur_.ival);
      advance();
      return v;
    }
    if (cur_.kind == Tok::String) {
      Value v = Value::of_text(cur_.text);
      advance();
      return v;
    }
    if (cur_.kind == Tok::Punct && cur_.text == "(") {
      throw SqlError(Err::UnsupportedConstruct, cur_.pos, "literal value (subqueries are not supported)");
    }
    if (peek_keyword("NULL")) {
      throw SqlError(Err::UnsupportedConstruct, cur_.pos, "literal value (NULL is not supported)");
    }
    throw SqlError(Err::SqlSyntax, cur_.pos, "integer or 'text' literal");
  }

  CreateTableStmt create_table() {
    advance();  // CREATE
    keyword("TABLE");
    CreateTableStmt c;
    c.table = identifier("table name");
    punct('(');
    while (true) {
      ColumnDef col;
      col.name = identifier("column name");
      expect_kind(Tok::Ident, "column type INT or TEXT");
      std::string ty = upper(cur_.text);
      if (ty == "INT" || ty == "INTEGER") {
        col.type = ColType::Int;
      } else if (ty == "TEXT") {
        col.type = ColType::Text;
      } else {
        throw SqlError(Err::UnsupportedConstruct, cur_.pos, "column type INT or TEXT");
      }
      advance();
      c.columns.push_back(std::move(col));
      if (cur_.kind == Tok::Punct && cur_.text == ",") {
        advance();
        continue;
      }
      break;
    }
    punct(')');
    return c;
  }

  InsertStmt insert() {
    advance();  // INSERT
    keyword("INTO");
    InsertStmt ins;
    ins.table = identifier("table name");
    if (cur_.kind == Tok::Punct && cur_.text == "(") {
      throw SqlError(Err::UnsupportedConstruct, cur_.pos,
                     "VALUES (column lists are not supported; values are positional)");
    }
    keyword("VALUES");
    punct('(');
    while (true) {
      ins.values.push_back(value());
      if (cur_.kind == Tok::Punct && cur_.text == ",") {
        advance();
        continue;
      }
      break;
    }
    punct(')');
    return ins;
  }

  std::vector<Condition> where_clause() {
    keyword("WHERE");
    std::vector<Condition> conds;
    while (true) {
      if (peek_keyword("NOT")) {
        throw SqlError(Err::UnsupportedConstruct, cur_.pos, "equality condition (NOT is not supported)");
      }
      Condition c;
      c.column = identifier("column name");
      if (peek_keyword("LIKE") || peek_keyword("IN") || peek_keyword("BETWEEN") ||
          peek_keyword("IS")) {
        throw SqlError(Err::UnsupportedConstruct, cur_.pos, "'=' (only equality predicates)");
      }
      punct('=');
      c.value = value();
      conds.push_back(std::move(c));
      if (peek_keyword("AND")) {
        advance();
        continue;
      }
      if (peek_keyword("OR")) {
        throw SqlError(Err::UnsupportedConstruct, cur_.pos, "AND (OR is not supported)");
      }
      break;
    }
    return conds;
  }

  UpdateStmt update() {
    advance();  // UPDATE
    UpdateStmt u;
    u.table = identifier("table name");
    keyword("SET");
    while (true) {
      Assignment a;
      a.column = identifier("column name");
      punct('=');
      a.value = value();
      u.sets.push_back(std::move(a));
      if (cur_.kind == Tok::Punct && cur_.text == ",") {
        advance();
        continue;
      }
      break;
    }
    u.where = where_clause();
    return u;
  }

  DeleteStmt del() {
    advance();  // DELETE
    keyword("FROM");
    DeleteStmt d;
    d.table = identifier("table name");
    d.where = where_clause();
    return d;
  }

  Lexer lex_;
  Token cur_;
};

void append_conds(std::string& out, const std::vector<Condition>& where) {
  out += " WHERE ";
  for (size_t i = 0; i < where.size(); ++i) {
    if (i) out += " AND ";
    out += where[i].column + " = " + where[i].value.literal();
  }
}

}  // namespace

std::string Value::literal() const {
  if (type == ColType::Int) return std::to_string(i);
  std::string out = "'";
  for (char c : s) {
    out.push_back(c);
    if (c == '\'') out.push_back('\'');
  }
  out.push_back('\'');
  return out;
}

const std::string& Statement::table() const {
  switch (kind) {
    case SqlKind::CreateTable: return std::get<CreateTableStmt>(node).table;
    case SqlKind::Insert: return std::get<InsertStmt>(node).table;
    case SqlKind::Update: return std::get<UpdateStmt>(node).table;
    case SqlKind::Delete: return std::get<DeleteStmt>(node).table;
  }
  throw Error(Err::SqlSyntax, "bad statement kind");
}

Statement parse_statement(std::string_view input) {
  if (input.empty()) throw SqlError(Err::SqlSyntax, 0, "non-empty statement");
  return Parser(input).statement();
}

std::string format_statement(const Statement& stmt) {
  std::string out;
  switch (stmt.kind) {
    case SqlKind::CreateTable: {
      const auto& c = std::get<CreateTableStmt>(stmt.node);
      out = "CREATE TABLE " + c.table + " (";
      for (size_t i = 0; i < c.columns.size(); ++i) {
        if (i) out += ", ";
        out += c.columns[i].name;
        out += c.columns[i].type == ColType::Int ? " INT" : " TEXT";
      }
      out += ")";
      break;
    }
    case SqlKind::Insert: {
      const auto& ins = std::get<InsertStmt>(stmt.node);
      out = "INSERT INTO " + ins.table + " VALUES (";
      for (size_t i = 0; i < ins.values.size(); ++i) {
        if (i) out += ", ";
        out += ins.values[i].literal();
      }
      out += ")";
      break;
    }
    case SqlKind::Update: {
      const auto& u = std::get<UpdateStmt>(stmt.node);
      out = "UPDATE " + u.table + " SET ";
      for (size_t i = 0; i < u.sets.size(); ++i) {
        if (i) out += ", ";
        out += u.sets[i].column + " = " + u.sets[i].value.literal();
      }
      append_conds(out, u.where);
      break;
    }
    case SqlKind::Delete: {
      const auto& d = std::get<DeleteStmt>(stmt.node);
      out = "DELETE FROM " + d.table;
      append_conds(out, d.where);
      break;
    }
  }
  return out;
}

const char* kind_name(SqlKind k) {
  switch (k) {
    case SqlKind::CreateTable: return "CREATE";
    case SqlKind::Insert: return "INSERT";
    case SqlKind::Update: return "UPDATE";
    case SqlKind::Delete: return "DELETE";
  }
  return "?";
}

}  // namespace qsync::sql

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <doctest.h>

#include "qsync/errors.hpp"
#include "qsync/sql.hpp"
#include "support/generators.hpp"
#include "support/oracle.hpp"

using namespace qsync;
using namespace qsync::sql;

TEST_CASE("grammar exemplars parse to the expected shapes") {
  Statement ins = parse_statement("INSERT INTO acct VALUES (1,'a')");
  CHECK(ins.kind == SqlKind::Insert);
  const auto& i = std::get<InsertStmt>(ins.node);
  CHECK(i.table == "acct");
  REQUIRE(i.values.size() == 2);
  CHECK(i.values[0] == Value::of_int(1));
  CHECK(i.values[1] == Value::of_text("a"));
  CHECK(ins.text == "INSERT INTO acct VALUES (1, 'a')");

  Statement up = parse_statement("update Acct SET bal=5, name='x' WHERE id=3 AND name='y'");
  CHECK(up.kind == SqlKind::Update);
  const auto& u = std::get<UpdateStmt>(up.node);
  CHECK(u.table == "Acct");  // identifiers keep their case
  CHECK(u.sets.size() == 2);
  CHECK(u.where.size() == 2);

  Statement del = parse_statement("DELETE FROM t WHERE k = -7;");
  CHECK(del.kind == SqlKind::Delete);
  CHECK(std::get<DeleteStmt>(del.node).where[0].value == Value::of_int(-7));

  Statement ct = parse_statement("create table t (k INT, v TEXT)");
  CHECK(ct.kind == SqlKind::CreateTable);
  CHECK(ct.text == "CREATE TABLE t (k INT, v TEXT)");
}

TEST_CASE("quoted text keeps embedded quotes through the round trip") {
  Statement s = parse_statement("INSERT INTO t VALUES (1, 'o''hara')");
  CHECK(std::get<InsertStmt>(s.node).values[1] == Value::of_text("o'hara"));
  CHECK(s.text == "INSERT INTO t VALUES (1, 'o''hara')");
  Statement again = parse_statement(s.text);
  CHECK(again.text == s.text);
}

TEST_CASE("replication carries only writes: reads and DDL beyond CREATE are unsupported") {
  auto expect_unsupported = [](const char* text) {
    try {
      parse_statement(text);
      FAIL("expected UnsupportedConstruct for: ", text);
    } catch (const SqlError& e) {
      CHECK(e.code() == Err::UnsupportedConstruct);
    }
  };
  expect_unsupported("SELECT * FROM acct");
  expect_unsupported("DROP TABLE acct");
  expect_unsupported("DELETE FROM t WHERE a < 5");
  expect_unsupported("UPDATE t SET a=1 WHERE b LIKE 'x'");
  expect_unsupported("DELETE FROM t WHERE a = 1 OR b = 2");
  expect_unsupported("INSERT INTO t VALUES ((SELECT 1))");
  expect_unsupported("INSERT INTO t VALUES (NULL)");
}

TEST_CASE("syntax errors carry a position and an expectation") {
  try {
    parse_statement("INSERT INTO t VALUES 1)");
    FAIL("expected SyntaxError");
  } catch (const SqlError& e) {
    CHECK(e.code() == Err::SqlSyntax);
    CHECK(e.position() == 21);  // the int literal where '(' was required
    CHECK(e.expected() == "'('");
  }
  CHECK_THROWS_AS(parse_statement(""), SqlError);
  CHECK_THROWS_AS(parse_statement("INSERT INTO t VALUES (1) trailing"), SqlError);
  CHECK_THROWS_AS(parse_statement("UPDATE t SET a=1"), SqlError);  // WHERE required
}

TEST_CASE("parse-format idempotence over a generated corpus") {
  SplitMix64 rng(2024);
  for (int i = 0; i < 500; ++i) {
    std::string messy = qsync::testing::messy_statement(rng);
    Statement first = parse_statement(messy);
    Statement second = parse_statement(first.text);
    CHECK(second.text == first.text);
    CHECK(format_statement(second) == first.text);
  }
}

TEST_CASE("workload generator output always parses and round-trips") {
  qsync::testing::ScriptGen gen(7, "acct", 0, 400);
  for (const std::string& text : gen.script(300)) {
    Statement s = parse_statement(text);
    CHECK(parse_statement(s.text).text == s.text);
  }
}

TEST_CASE("parser totality: random byte fuzz never crashes") {
  SplitMix64 rng(0xFEED);
  int parsed = 0, rejected = 0;
  for (int i = 0; i < 20000; ++i) {
    std::string input;
    size_t len = rng.below(120);
    for (size_t j = 0; j < len; ++j) input.push_back(static_cast<char>(rng.below(256)));
    try {
      parse_statement(input);
      ++parsed;
    } catch (const Error&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 20000);
  CHECK(rejected > 19000);  // almost everything random is garbage
}

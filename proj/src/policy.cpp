// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/policy.hpp"

#include <fstream>
#include <sstream>

#include "qsync/bytes.hpp"
#include "qsync/errors.hpp"

namespace qsync {

PermissionPolicy PermissionPolicy::parse(const std::string& text) {
  PermissionPolicy p;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string verb;
    if (!(ls >> verb)) continue;
    if (verb != "allow") {
      throw Error(Err::Parse, "policy line " + std::to_string(lineno) + ": expected 'allow'");
    }
    Rule r;
    if (!(ls >> r.origin >> r.kind >> r.table_glob)) {
      throw Error(Err::Parse,
                  "policy line " + std::to_string(lineno) + ": allow <origin> <kind> <glob>");
    }
    if (r.kind != "*" && r.kind != "CREATE" && r.kind != "INSERT" && r.kind != "UPDATE" &&
        r.kind != "DELETE") {
      throw Error(Err::Parse, "policy line " + std::to_string(lineno) + ": bad kind " + r.kind);
    }
    p.rules_.push_back(std::move(r));
  }
  return p;
}

PermissionPolicy PermissionPolicy::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Err::Io, "cannot read policy '" + path + "'");
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse(text);
}

bool PermissionPolicy::check(const NodeId& origin, const sql::Statement& stmt) const {
  return check(origin, stmt.kind, stmt.table());
}

bool PermissionPolicy::check(const NodeId& origin, sql::SqlKind kind,
                             const std::string& table) const {
  if (rules_.empty()) return true;
  const char* kind_str = sql::kind_name(kind);
  bool kind_ok = false, table_ok = false;
  for (const Rule& r : rules_) {
    if (r.origin != "*" && r.origin != origin) continue;
    if (r.kind == "*" || r.kind == kind_str) kind_ok = true;
    if (glob_match(r.table_glob, table)) table_ok = true;
  }
  return kind_ok && table_ok;
}

}  // namespace qsync

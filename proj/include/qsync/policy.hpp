// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

#include "qsync/sql.hpp"
#include "qsync/topology.hpp"

namespace qsync {

// Receiver-side apply permissions: which statement kinds an origin may run
// here, and which tables it may touch. A statement passes when its kind is
// allowed for the origin AND its table matches one of the origin's patterns.
// No rules at all means allow everything (the default policy).
//
// File format: one `allow <origin|*> <kind|*> <table-glob>` per line,
// `#` comments.
class PermissionPolicy {
 public:
  PermissionPolicy() = default;

  static PermissionPolicy parse(const std::string& text);
  static PermissionPolicy load_file(const std::string& path);

  bool check(const NodeId& origin, const sql::Statement& stmt) const;
  bool check(const NodeId& origin, sql::SqlKind kind, const std::string& table) const;

  bool empty() const { return rules_.empty(); }

 private:
  struct Rule {
    std::string origin;  // node id or "*"
    std::string kind;    // CREATE/INSERT/UPDATE/DELETE or "*"
    std::string table_glob;
  };
  std::vector<Rule> rules_;
};

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "qsync/bytes.hpp"

namespace qsync::testing {

// Valid-by-construction workload on one shared table, constrained to a key
// range (the per-branch independence precondition). Every statement succeeds
// when replayed in order against fresh state, except a CREATE of an already
// existing table, which receivers and the oracle both skip.
class ScriptGen {
 public:
  ScriptGen(uint64_t seed, std::string table, int64_t key_lo, int64_t key_hi)
      : rng_(seed), table_(std::move(table)), key_lo_(key_lo), key_hi_(key_hi) {}

  std::string create_stmt() const {
    return "CREATE TABLE " + table_ + " (id INT, name TEXT, bal INT)";
  }

  // n statements, starting with CREATE TABLE.
  std::vector<std::string> script(size_t n) {
    std::vector<std::string> out;
    out.push_back(create_stmt());
    while (out.size() < n) out.push_back(next());
    return out;
  }

  std::string next() {
    uint64_t roll = rng_.below(100);
    if (live_.empty() || roll < 55) return gen_insert();
    if (roll < 85) return gen_update();
    return gen_delete();
  }

 private:
  std::string gen_text() {
    static const char* words[] = {"alpha", "o'hara", "x''y", "plain", "q q", "z_9"};
    std::string w = words[rng_.below(6)];
    std::string out;
    for (char c : w) {
      out.push_back(c);
      if (c == '\'') out.push_back('\'');  // SQL escaping for the literal
    }
    return "'" + out + "'";
  }

  int64_t fresh_key() {
    for (int tries = 0; tries < 64; ++tries) {
      int64_t k = key_lo_ + static_cast<int64_t>(rng_.below(key_hi_ - key_lo_ + 1));
      bool used = false;
      for (int64_t v : live_) used |= v == k;
      if (!used) return k;
    }
    return -1;
  }

  std::string gen_insert() {
    int64_t k = fresh_key();
    if (k < 0) return gen_update();
    live_.push_back(k);
    return "INSERT INTO " + table_ + " VALUES (" + std::to_string(k) + ", " + gen_text() + ", " +
           std::to_string(rng_.below(100000)) + ")";
  }

  std::string gen_update() {
    if (live_.empty()) return gen_insert();
    int64_t k = live_[rng_.below(live_.size())];
    if (rng_.below(2) == 0) {
      return "UPDATE " + table_ + " SET bal = " + std::to_string(rng_.below(100000)) +
             " WHERE id = " + std::to_string(k);
    }
    return "UPDATE " + table_ + " SET name = " + gen_text() + ", bal = " +
           std::to_string(rng_.below(100000)) + " WHERE id = " + std::to_string(k);
  }

  std::string gen_delete() {
    size_t idx = rng_.below(live_.size());
    int64_t k = live_[idx];
    live_.erase(live_.begin() + static_cast<long>(idx));
    return "DELETE FROM " + table_ + " WHERE id = " + std::to_string(k);
  }

  SplitMix64 rng_;
  std::string table_;
  int64_t key_lo_, key_hi_;
  std::vector<int64_t> live_;
};

// Random but grammatical statements with messy casing and spacing, for the
// parse/format idempotence property.
inline std::string messy_statement(SplitMix64& rng) {
  auto ws = [&] {
    static const char* pads[] = {" ", "  ", "\t", " \n ", ""};
    return std::string(pads[rng.below(4)]);  // never empty between tokens
  };
  auto kw = [&](const char* up) {
    std::string out;
    for (const char* p = up; *p; ++p) {
      bool lower = rng.below(2) == 0;
      out.push_back(lower ? static_cast<char>(*p + 32) : *p);
    }
    return out;
  };
  std::string table = "t" + std::to_string(rng.below(5));
  switch (rng.below(4)) {
    case 0:
      return kw("CREATE") + ws() + " " + kw("TABLE") + ws() + " " + table + " ( k " + kw("INT") +
             " ,v " + kw("TEXT") + " )";
    case 1:
      return kw("INSERT") + " " + kw("INTO") + ws() + " " + table + " " + kw("VALUES") + "(" +
             std::to_string(static_cast<int64_t>(rng.next() % 2000) - 1000) + ",  'a''b c'" +
             ws() + ")";
    case 2:
      return kw("UPDATE") + " " + table + ws() + " " + kw("SET") + " v='x' , k = 9 " +
             kw("WHERE") + " k =" + ws() + " 4 " + kw("AND") + " v = 'y'";
    default:
      return kw("DELETE") + ws() + " " + kw("FROM") + " " + table + " " + kw("WHERE") + " k= " +
             std::to_string(rng.below(50)) + ";";
  }
}

// Fresh scratch directory under the build tree's temp space.
inline std::filesystem::path fresh_dir(const std::string& tag) {
  static uint64_t counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("qsync-test-" + std::to_string(::getpid())) / (tag + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace qsync::testing

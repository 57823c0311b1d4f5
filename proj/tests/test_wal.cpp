// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <doctest.h>

#include <fstream>

#include "qsync/errors.hpp"
#include "qsync/wal.hpp"
#include "support/generators.hpp"

using namespace qsync;
using qsync::testing::fresh_dir;

namespace {

std::vector<std::pair<WalType, std::string>> read_all(const std::filesystem::path& p) {
  std::vector<std::pair<WalType, std::string>> out;
  Wal::scan(p, [&](WalType t, const std::string& payload) { out.emplace_back(t, payload); });
  return out;
}

}  // namespace

TEST_CASE("append then replay returns records in order") {
  auto dir = fresh_dir("wal");
  auto path = dir / "queue.wal";
  {
    Wal wal(path);
    wal.replay([](WalType, const std::string&) { FAIL("fresh log must be empty"); });
    wal.append(WalType::QueueCreate, "one");
    wal.append(WalType::Commit, "two");
    CHECK(wal.append_count() == 2);
  }
  auto records = read_all(path);
  REQUIRE(records.size() == 2);
  CHECK(records[0].first == WalType::QueueCreate);
  CHECK(records[0].second == "one");
  CHECK(records[1].first == WalType::Commit);
  CHECK(records[1].second == "two");
}

TEST_CASE("torn tail is truncated and appends continue") {
  auto dir = fresh_dir("wal");
  auto path = dir / "queue.wal";
  {
    Wal wal(path);
    wal.replay([](WalType, const std::string&) {});
    wal.append(WalType::QueueCreate, "solid");
  }
  // Simulate a crash mid-append: write half a record.
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out.write("\x00\x00\x00\x10\x01part", 9);
  }
  {
    Wal wal(path);
    size_t seen = 0;
    wal.replay([&](WalType, const std::string& p) {
      ++seen;
      CHECK(p == "solid");
    });
    CHECK(seen == 1);
    wal.append(WalType::Abort, "after");
  }
  auto records = read_all(path);
  REQUIRE(records.size() == 2);
  CHECK(records[1].second == "after");
}

TEST_CASE("mid-file garbage raises CorruptLog") {
  auto dir = fresh_dir("wal");
  auto path = dir / "queue.wal";
  {
    std::ofstream out(path, std::ios::binary);
    // length 3, bogus type 0x7F, then a full valid-looking record after it
    out.write("\x00\x00\x00\x03\x7f"
              "ab",
              7);
  }
  Wal wal(path);
  CHECK_THROWS_AS(wal.replay([](WalType, const std::string&) {}), Error);
}

TEST_CASE("many interleaved records survive a reopen cycle") {
  auto dir = fresh_dir("wal");
  auto path = dir / "queue.wal";
  SplitMix64 rng(9);
  std::vector<std::string> payloads;
  {
    Wal wal(path);
    wal.replay([](WalType, const std::string&) {});
    for (int i = 0; i < 200; ++i) {
      std::string p;
      size_t len = rng.below(300);
      for (size_t j = 0; j < len; ++j) p.push_back(static_cast<char>(rng.below(256)));
      payloads.push_back(p);
      wal.append(WalType::Prepared, p);
    }
  }
  auto records = read_all(path);
  REQUIRE(records.size() == payloads.size());
  for (size_t i = 0; i < payloads.size(); ++i) {
    CHECK(records[i].second == payloads[i]);
  }
}

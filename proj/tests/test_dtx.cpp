// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <doctest.h>

#include "qsync/bytes.hpp"
#include "qsync/dtx.hpp"
#include "qsync/errors.hpp"
#include "support/generators.hpp"

using namespace qsync;
using qsync::testing::fresh_dir;

namespace {

struct FakeResource : Participant {
  explicit FakeResource(std::string n) : name(std::move(n)) {}

  std::string name;
  bool vote_yes = true;
  int prepares = 0;
  int applies = 0;
  int replays = 0;
  int rollbacks = 0;
  std::string last_redo;

  std::string participant_name() const override { return name; }
  bool prepare(uint64_t txn_id, std::string& redo_out) override {
    ++prepares;
    if (!vote_yes) return false;
    redo_out = name + "-redo-" + std::to_string(txn_id);
    return true;
  }
  void apply(uint64_t, const std::string& redo, ApplyMode mode) override {
    last_redo = redo;
    if (mode == ApplyMode::Live) {
      ++applies;
    } else {
      ++replays;
    }
  }
  void rollback(uint64_t) override { ++rollbacks; }
};

struct Fixture {
  std::filesystem::path dir = fresh_dir("dtx");
  Wal wal{dir / "queue.wal"};
  Coordinator coord{wal};
  FakeResource queue{"queue"};
  FakeResource store{"store"};

  Fixture() {
    wal.replay([](WalType, const std::string&) {});
    coord.set_node("T");
    coord.register_participant(&queue);
    coord.register_participant(&store);
  }
};

}  // namespace

TEST_CASE("begin yields active contexts with fresh distinct ids") {
  Fixture f;
  TxnContext& a = f.coord.begin(TxnMode::Internal);
  TxnContext& b = f.coord.begin(TxnMode::External);
  CHECK(a.state == TxnState::Active);
  CHECK(b.state == TxnState::Active);
  CHECK(a.participants.empty());
  CHECK(b.participants.empty());
  CHECK(a.id != b.id);
}

TEST_CASE("internal transactions bind exactly one resource manager") {
  Fixture f;
  TxnContext& txn = f.coord.begin(TxnMode::Internal);
  f.coord.enlist(txn, &f.queue);
  f.coord.enlist(txn, &f.queue);  // same resource again is fine
  CHECK(txn.participants.size() == 1);
  try {
    f.coord.enlist(txn, &f.store);
    FAIL("expected TooManyParticipants");
  } catch (const Error& e) {
    CHECK(e.code() == Err::TooManyParticipants);
  }
  // External spans both.
  TxnContext& ext = f.coord.begin(TxnMode::External);
  f.coord.enlist(ext, &f.queue);
  f.coord.enlist(ext, &f.store);
  CHECK(ext.participants.size() == 2);
}

TEST_CASE("external commit: all YES votes reach every participant atomically") {
  Fixture f;
  TxnContext& txn = f.coord.begin(TxnMode::External);
  f.coord.enlist(txn, &f.queue);
  f.coord.enlist(txn, &f.store);
  CHECK(f.coord.commit(txn) == CommitOutcome::Committed);
  CHECK(f.queue.applies == 1);
  CHECK(f.store.applies == 1);
  CHECK(f.store.last_redo == "store-redo-" + std::to_string(txn.id));
  // PREPARED x2 + COMMIT
  CHECK(f.wal.append_count() == 3);
}

TEST_CASE("one NO vote aborts with zero effects everywhere") {
  Fixture f;
  f.store.vote_yes = false;
  TxnContext& txn = f.coord.begin(TxnMode::External);
  f.coord.enlist(txn, &f.queue);
  f.coord.enlist(txn, &f.store);
  CHECK(f.coord.commit(txn) == CommitOutcome::Aborted);
  CHECK(txn.state == TxnState::Aborted);
  CHECK(f.queue.applies == 0);
  CHECK(f.store.applies == 0);
  CHECK(f.queue.rollbacks == 1);
  CHECK(f.store.rollbacks == 1);
}

TEST_CASE("explicit abort rolls back and finished transactions refuse reuse") {
  Fixture f;
  TxnContext& txn = f.coord.begin(TxnMode::External);
  f.coord.enlist(txn, &f.queue);
  f.coord.abort(txn);
  CHECK(txn.state == TxnState::Aborted);
  CHECK(f.queue.rollbacks == 1);
  try {
    f.coord.abort(txn);
    FAIL("expected TxnFinished");
  } catch (const Error& e) {
    CHECK(e.code() == Err::TxnFinished);
  }
  CHECK_THROWS_AS(f.coord.commit(txn), Error);
  CHECK_THROWS_AS(f.coord.enlist(txn, &f.store), Error);
}

TEST_CASE("internal commit costs strictly fewer durable writes than external") {
  Fixture f;
  TxnContext& internal = f.coord.begin(TxnMode::Internal);
  f.coord.enlist(internal, &f.queue);
  uint64_t before = f.wal.append_count();
  CHECK(f.coord.commit(internal) == CommitOutcome::Committed);
  uint64_t internal_writes = f.wal.append_count() - before;

  TxnContext& external = f.coord.begin(TxnMode::External);
  f.coord.enlist(external, &f.queue);
  before = f.wal.append_count();
  CHECK(f.coord.commit(external) == CommitOutcome::Committed);
  uint64_t external_writes = f.wal.append_count() - before;

  CHECK(internal_writes == 1);
  CHECK(external_writes == 2);
  CHECK(internal_writes < external_writes);
}

TEST_CASE("recovery: dangling PREPARED rolls back, COMMIT replays, ABORT drops") {
  auto dir = fresh_dir("dtx-recovery");
  auto path = dir / "queue.wal";
  {
    Wal wal(path);
    wal.replay([](WalType, const std::string&) {});
    auto prepared = [&](uint64_t id, const char* who) {
      ByteWriter w;
      w.u64(id);
      w.str(who);
      w.blob(std::string(who) + "-redo");
      wal.append(WalType::Prepared, w.take());
    };
    auto mark = [&](WalType t, uint64_t id) {
      ByteWriter w;
      w.u64(id);
      wal.append(t, w.take());
    };
    prepared(1, "queue");  // committed txn
    prepared(1, "store");
    mark(WalType::Commit, 1);
    prepared(2, "queue");  // in doubt: crash before a decision
    prepared(3, "store");  // explicitly aborted
    mark(WalType::Abort, 3);
  }
  {
    Wal wal(path);
    Coordinator coord(wal);
    FakeResource queue{"queue"}, store{"store"};
    coord.register_participant(&queue);
    coord.register_participant(&store);
    wal.replay([&](WalType t, const std::string& p) { coord.replay_txn_record(t, p); });
    CHECK(queue.replays == 1);
    CHECK(store.replays == 1);
    CHECK(coord.finish_recovery() == 1);  // txn 2 presumed-aborted
    // and the abort decision is now durable
    int aborts = 0;
    Wal::scan(path, [&](WalType t, const std::string&) {
      if (t == WalType::Abort) ++aborts;
    });
    CHECK(aborts == 2);
    // fresh ids continue above everything seen in the log
    TxnContext& txn = coord.begin(TxnMode::External);
    CHECK(txn.id >= 4);
  }
}

TEST_CASE("clean shutdown recovers zero transactions") {
  Fixture f;
  TxnContext& txn = f.coord.begin(TxnMode::External);
  f.coord.enlist(txn, &f.queue);
  CHECK(f.coord.commit(txn) == CommitOutcome::Committed);

  Wal wal2(f.dir / "queue.wal");
  Coordinator coord2(wal2);
  FakeResource queue2{"queue"};
  coord2.register_participant(&queue2);
  wal2.replay([&](WalType t, const std::string& p) { coord2.replay_txn_record(t, p); });
  CHECK(coord2.finish_recovery() == 0);
  CHECK(queue2.replays == 1);
}

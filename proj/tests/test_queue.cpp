// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <doctest.h>

#include "qsync/errors.hpp"
#include "qsync/frame.hpp"
#include "qsync/queue.hpp"
#include "support/generators.hpp"
#include "support/manual_env.hpp"

using namespace qsync;
using qsync::testing::fresh_dir;
using qsync::testing::ManualEnv;
using qsync::testing::wal_accept_counts;

namespace {

// Two queue managers joined by a hand-cranked transport.
struct Pair {
  std::filesystem::path dir = fresh_dir("queue");
  ManualEnv env;
  std::unique_ptr<Wal> wal_a, wal_b;
  std::unique_ptr<Coordinator> coord_a, coord_b;
  std::unique_ptr<QueueManager> a, b;

  Pair() { open(); }

  void open() {
    wal_a = std::make_unique<Wal>(dir / "A" / "queue.wal");
    wal_b = std::make_unique<Wal>(dir / "B" / "queue.wal");
    coord_a = std::make_unique<Coordinator>(*wal_a);
    coord_b = std::make_unique<Coordinator>(*wal_b);
    coord_a->set_node("A");
    coord_b->set_node("B");
    a = std::make_unique<QueueManager>("A", *wal_a, *coord_a);
    b = std::make_unique<QueueManager>("B", *wal_b, *coord_b);
    coord_a->register_participant(a.get());
    coord_b->register_participant(b.get());
    a->set_env(&env);
    b->set_env(&env);
    wal_a->replay([&](WalType t, const std::string& p) { replay_into(*coord_a, *a, t, p); });
    wal_b->replay([&](WalType t, const std::string& p) { replay_into(*coord_b, *b, t, p); });
    coord_a->finish_recovery();
    coord_b->finish_recovery();
  }

  static void replay_into(Coordinator& coord, QueueManager& qm, WalType t,
                          const std::string& p) {
    switch (t) {
      case WalType::Prepared:
      case WalType::Commit:
      case WalType::Abort:
      case WalType::InternalCommit:
        coord.replay_txn_record(t, p);
        break;
      default:
        qm.replay_direct(t, p);
        break;
    }
  }

  // Reopen manager B from its WAL, as if the process restarted.
  void restart_b() {
    b.reset();
    coord_b.reset();
    wal_b.reset();
    wal_b = std::make_unique<Wal>(dir / "B" / "queue.wal");
    coord_b = std::make_unique<Coordinator>(*wal_b);
    coord_b->set_node("B");
    b = std::make_unique<QueueManager>("B", *wal_b, *coord_b);
    coord_b->register_participant(b.get());
    b->set_env(&env);
    wal_b->replay([&](WalType t, const std::string& p) { replay_into(*coord_b, *b, t, p); });
    coord_b->finish_recovery();
  }

  // Deliver every frame currently on the wire (in order), including the acks
  // that delivery generates, until the wire is empty.
  void pump() {
    while (!env.wire.empty()) {
      auto frames = env.take_wire();
      for (auto& f : frames) {
        (f.to == "A" ? *a : *b).on_frame(f.bytes);
      }
    }
  }

  MessageId txn_send(QueueManager& qm, Coordinator& coord, const QueueRef& dest,
                     const std::string& body) {
    TxnContext& txn = coord.begin(TxnMode::External);
    MessageId id = qm.send(&txn, dest, MsgKind::Sync, body);
    REQUIRE(coord.commit(txn) == CommitOutcome::Committed);
    return id;
  }
};

}  // namespace

TEST_CASE("queue creation, uniqueness and restart durability") {
  Pair p;
  QueueRef q = p.b->create_queue("work", true);
  CHECK(q.transactional);
  CHECK_THROWS_AS(p.b->create_queue("work", false), Error);
  p.restart_b();
  CHECK(p.b->has_queue("work"));
  CHECK(p.b->queue_ref("work").transactional);
  CHECK(p.b->receivable("work") == 0);
}

TEST_CASE("transactional send rules (the fixed transactional attribute)") {
  Pair p;
  p.a->create_queue("plain", false);
  p.a->create_queue("txq", true);

  TxnContext& txn = p.coord_a->begin(TxnMode::External);
  try {
    p.a->send(&txn, p.a->queue_ref("plain"), MsgKind::Sync, "x");
    FAIL("expected NonTransactionalQueue");
  } catch (const Error& e) {
    CHECK(e.code() == Err::NonTransactionalQueue);
  }
  p.coord_a->abort(txn);

  // a transactional queue only accepts transactional sends
  try {
    p.a->send(nullptr, p.a->queue_ref("txq"), MsgKind::Sync, "x");
    FAIL("expected TransactionRequired");
  } catch (const Error& e) {
    CHECK(e.code() == Err::TransactionRequired);
  }

  // and there is no API to flip the flag after creation: the ref is const
  // data validated against the durable QueueCreate record.
  CHECK(p.a->queue_ref("txq").transactional);
}

TEST_CASE("non-transactional local send is immediately receivable; PEEK is non-destructive") {
  Pair p;
  p.a->create_queue("plain", false);
  CHECK_FALSE(p.a->receive(nullptr, p.a->queue_ref("plain"), RecvMode::Peek).has_value());

  p.a->send(nullptr, p.a->queue_ref("plain"), MsgKind::Sync, "hello");
  auto peek1 = p.a->receive(nullptr, p.a->queue_ref("plain"), RecvMode::Peek);
  auto peek2 = p.a->receive(nullptr, p.a->queue_ref("plain"), RecvMode::Peek);
  REQUIRE(peek1);
  REQUIRE(peek2);
  CHECK(peek1->id == peek2->id);
  CHECK(peek1->body == "hello");

  auto got = p.a->receive(nullptr, p.a->queue_ref("plain"), RecvMode::Remove);
  REQUIRE(got);
  CHECK(got->body == "hello");
  CHECK_FALSE(p.a->receive(nullptr, p.a->queue_ref("plain"), RecvMode::Remove).has_value());
}

TEST_CASE("body size cap") {
  Pair p;
  p.a->create_queue("plain", false);
  std::string big(kMaxBodyBytes + 1, 'x');
  try {
    p.a->send(nullptr, p.a->queue_ref("plain"), MsgKind::Sync, big);
    FAIL("expected BodyTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Err::BodyTooLarge);
  }
}

TEST_CASE("aborted multi-send leaves nothing receivable and burns no seqs") {
  Pair p;
  QueueRef dest{"B", "sync_in", true};
  p.b->create_queue("sync_in", true);

  TxnContext& txn = p.coord_a->begin(TxnMode::External);
  p.a->send(&txn, dest, MsgKind::Sync, "m1");
  p.a->send(&txn, dest, MsgKind::Sync, "m2");
  p.a->send(&txn, dest, MsgKind::Sync, "m3");
  p.coord_a->abort(txn);
  p.pump();
  CHECK(p.b->receivable("sync_in") == 0);
  CHECK(p.a->total_outgoing_pending() == 0);
  CHECK(p.a->journal().empty());

  // Next committed send takes seq 1: no receiver-side gap from the abort.
  MessageId id = p.txn_send(*p.a, *p.coord_a, dest, "after-abort");
  CHECK(id.seq == 1);
  p.pump();
  CHECK(p.b->receivable("sync_in") == 1);
}

TEST_CASE("REMOVE under txn locks, abort restores, commit consumes and journals") {
  Pair p;
  p.a->create_queue("sync_in", true);
  QueueRef q{"A", "sync_in", true};
  p.txn_send(*p.a, *p.coord_a, q, "only");  // local transactional send

  // REMOVE then abort: restored
  TxnContext& t1 = p.coord_a->begin(TxnMode::External);
  auto got1 = p.a->receive(&t1, q, RecvMode::Remove);
  REQUIRE(got1);
  CHECK_FALSE(p.a->receive(nullptr, q, RecvMode::Peek).has_value());  // locked
  p.coord_a->abort(t1);
  auto peek = p.a->receive(nullptr, q, RecvMode::Peek);
  REQUIRE(peek);
  CHECK(peek->id == got1->id);

  // REMOVE then commit: gone, RECEIVED journaled
  TxnContext& t2 = p.coord_a->begin(TxnMode::External);
  auto got2 = p.a->receive(&t2, q, RecvMode::Remove);
  REQUIRE(got2);
  REQUIRE(p.coord_a->commit(t2) == CommitOutcome::Committed);
  CHECK(p.a->receivable("sync_in") == 0);

  auto journal = p.a->journal();
  REQUIRE(journal.size() == 2);  // SENT + RECEIVED
  CHECK(journal[0].direction == Direction::Sent);
  CHECK(journal[1].direction == Direction::Received);
  CHECK(journal[1].id == got2->id);
  CHECK(journal[0].outcome == JournalOutcome::Committed);
}

TEST_CASE("same-transaction order: sends become receivable in send order") {
  Pair p;
  p.b->create_queue("sync_in", true);
  QueueRef dest{"B", "sync_in", true};
  TxnContext& txn = p.coord_a->begin(TxnMode::External);
  for (int i = 0; i < 5; ++i) {
    p.a->send(&txn, dest, MsgKind::Sync, "m" + std::to_string(i));
  }
  REQUIRE(p.coord_a->commit(txn) == CommitOutcome::Committed);
  p.pump();
  for (int i = 0; i < 5; ++i) {
    auto got = p.b->receive(nullptr, QueueRef{"B", "sync_in", true}, RecvMode::Peek);
    REQUIRE(got);
    CHECK(got->body == "m" + std::to_string(i));
    TxnContext& rt = p.coord_b->begin(TxnMode::External);
    p.b->receive(&rt, QueueRef{"B", "sync_in", true}, RecvMode::Remove);
    REQUIRE(p.coord_b->commit(rt) == CommitOutcome::Committed);
  }
}

TEST_CASE("accept_incoming: dedup and gap-holding") {
  Pair p;
  p.b->create_queue("sync_in", true);
  auto frame = [&](uint64_t seq, const std::string& body) {
    Message m;
    m.id = {"A", seq};
    m.kind = MsgKind::Sync;
    m.body = body;
    m.dest_queue = {"B", "sync_in", true};
    return m;
  };

  CHECK(p.b->accept_incoming(frame(1, "one")) == AcceptOutcome::Accepted);
  CHECK(p.b->accept_incoming(frame(1, "one")) == AcceptOutcome::Duplicate);
  CHECK(p.b->duplicates_detected() == 1);

  // seq 3 before 2: held, then released in order when 2 arrives
  CHECK(p.b->accept_incoming(frame(3, "three")) == AcceptOutcome::OutOfOrderHeld);
  CHECK(p.b->receivable("sync_in") == 1);
  CHECK(p.b->held_count() == 1);
  CHECK(p.b->accept_incoming(frame(2, "two")) == AcceptOutcome::Accepted);
  CHECK(p.b->held_count() == 0);
  CHECK(p.b->receivable("sync_in") == 3);

  std::vector<std::string> order;
  while (auto got = p.b->receive(nullptr, QueueRef{"B", "sync_in", true}, RecvMode::Peek)) {
    order.push_back(got->body);
    TxnContext& rt = p.coord_b->begin(TxnMode::External);
    p.b->receive(&rt, QueueRef{"B", "sync_in", true}, RecvMode::Remove);
    REQUIRE(p.coord_b->commit(rt) == CommitOutcome::Committed);
  }
  CHECK(order == std::vector<std::string>{"one", "two", "three"});

  // per-id Accept appears exactly once in the durable log
  auto counts = wal_accept_counts(p.dir / "B" / "queue.wal");
  CHECK(counts.size() == 3);
  for (const auto& [id, n] : counts) CHECK(n == 1);
}

TEST_CASE("store-and-forward: offline holds frames, acks drain the outgoing queue") {
  Pair p;
  p.b->create_queue("sync_in", true);
  QueueRef dest{"B", "sync_in", true};

  p.env.links_up = false;
  p.txn_send(*p.a, *p.coord_a, dest, "queued");
  CHECK(p.a->flush_outgoing("B") == 0);  // OFFLINE: no-op
  CHECK(p.a->total_outgoing_pending() == 1);
  CHECK(p.env.wire.empty());

  p.env.links_up = true;
  p.a->on_link_up("B");
  CHECK(p.env.wire.size() == 1);
  p.pump();  // deliver + ack round trip
  CHECK(p.a->total_outgoing_pending() == 0);
  CHECK(p.b->receivable("sync_in") == 1);

  // the removal survived a restart of A? (OUT_ACKED durability via B restart path)
  p.restart_b();
  CHECK(p.b->receivable("sync_in") == 1);
}

TEST_CASE("retransmission with exponential backoff until acked") {
  Pair p;
  p.b->create_queue("sync_in", true);
  QueueRef dest{"B", "sync_in", true};
  p.txn_send(*p.a, *p.coord_a, dest, "retry-me");
  CHECK(p.env.wire.size() == 1);
  p.env.take_wire();  // drop the first transmission

  p.env.advance(500);
  CHECK(p.env.wire.size() == 1);  // first retry
  p.env.take_wire();              // drop again
  p.env.advance(999);
  CHECK(p.env.wire.empty());  // backoff doubled: nothing yet at t=1499
  p.env.advance(1);
  REQUIRE(p.env.wire.size() == 1);  // second retry fires at t=1500
  auto frames = p.env.take_wire();

  // now deliver; ack flows back and the timer disarms
  p.b->on_frame(frames[0].bytes);
  p.pump();
  CHECK(p.a->total_outgoing_pending() == 0);
  p.env.advance(60000);
  CHECK(p.env.wire.empty());  // nothing retransmits after the ack
}

TEST_CASE("duplicate delivery still acks so the sender can clean up") {
  Pair p;
  p.b->create_queue("sync_in", true);
  p.txn_send(*p.a, *p.coord_a, QueueRef{"B", "sync_in", true}, "dup");
  auto frames = p.env.take_wire();
  REQUIRE(frames.size() == 1);
  p.b->on_frame(frames[0].bytes);
  p.env.take_wire();  // drop the ack
  p.b->on_frame(frames[0].bytes);  // retransmit arrives as duplicate
  auto acks = p.env.take_wire();
  REQUIRE(acks.size() == 1);  // re-acked
  p.a->on_frame(acks[0].bytes);
  CHECK(p.a->total_outgoing_pending() == 0);
  CHECK(p.b->receivable("sync_in") == 1);  // accepted exactly once
}

TEST_CASE("exactly-once under loss, duplication and reordering (property)") {
  Pair p;
  p.b->create_queue("sync_in", true);
  QueueRef dest{"B", "sync_in", true};
  constexpr int kMessages = 120;
  SplitMix64 rng(0xD1CE);

  for (int i = 0; i < kMessages; ++i) {
    p.txn_send(*p.a, *p.coord_a, dest, "m" + std::to_string(i));
  }

  // Chaotic pipe: 25% loss, 25% duplication, shuffled delivery; retransmit
  // timers drive recovery until everything is acked.
  for (int round = 0; round < 200 && p.a->total_outgoing_pending() > 0; ++round) {
    auto frames = p.env.take_wire();
    // shuffle
    for (size_t i = frames.size(); i > 1; --i) {
      std::swap(frames[i - 1], frames[rng.below(i)]);
    }
    for (const auto& f : frames) {
      if (rng.next_unit() < 0.25) continue;  // lost
      int copies = rng.next_unit() < 0.25 ? 2 : 1;
      for (int c = 0; c < copies; ++c) {
        (f.to == "A" ? *p.a : *p.b).on_frame(f.bytes);
      }
    }
    p.env.advance(8000);  // fire any retransmission timers
  }

  CHECK(p.a->total_outgoing_pending() == 0);
  CHECK(p.b->receivable("sync_in") == kMessages);

  // Accepted-id multiset oracle straight from the durable log.
  auto counts = wal_accept_counts(p.dir / "B" / "queue.wal");
  CHECK(counts.size() == kMessages);
  for (const auto& [id, n] : counts) CHECK(n == 1);

  // Per-origin order: receivable bodies appear in send order.
  for (int i = 0; i < kMessages; ++i) {
    TxnContext& rt = p.coord_b->begin(TxnMode::External);
    auto got = p.b->receive(&rt, dest, RecvMode::Remove);
    REQUIRE(got);
    CHECK(got->body == "m" + std::to_string(i));
    CHECK(got->id.seq == static_cast<uint64_t>(i + 1));
    REQUIRE(p.coord_b->commit(rt) == CommitOutcome::Committed);
  }
}

TEST_CASE("journal completeness: committed ops equal COMMITTED journal entries") {
  Pair p;
  p.b->create_queue("sync_in", true);
  QueueRef dest{"B", "sync_in", true};
  for (int i = 0; i < 7; ++i) p.txn_send(*p.a, *p.coord_a, dest, "x");
  // plus one aborted send that must leave no trace
  TxnContext& txn = p.coord_a->begin(TxnMode::External);
  p.a->send(&txn, dest, MsgKind::Sync, "aborted");
  p.coord_a->abort(txn);
  p.pump();

  size_t sent_entries = 0;
  for (const auto& e : p.a->journal()) {
    CHECK(e.outcome == JournalOutcome::Committed);
    if (e.direction == Direction::Sent) ++sent_entries;
  }
  CHECK(sent_entries == 7);

  size_t consumed = 0;
  while (true) {
    TxnContext& rt = p.coord_b->begin(TxnMode::External);
    auto got = p.b->receive(&rt, dest, RecvMode::Remove);
    if (!got) {
      p.coord_b->abort(rt);
      break;
    }
    REQUIRE(p.coord_b->commit(rt) == CommitOutcome::Committed);
    ++consumed;
  }
  size_t received_entries = 0;
  for (const auto& e : p.b->journal()) {
    if (e.direction == Direction::Received) ++received_entries;
  }
  CHECK(consumed == 7);
  CHECK(received_entries == consumed);
}

TEST_CASE("receiver restart mid-stream keeps exactly-once") {
  Pair p;
  p.b->create_queue("sync_in", true);
  QueueRef dest{"B", "sync_in", true};
  p.txn_send(*p.a, *p.coord_a, dest, "one");
  auto frames = p.env.take_wire();
  p.b->on_frame(frames[0].bytes);  // accepted + acked
  p.env.take_wire();               // lose the ack

  p.restart_b();  // crash after durable accept, before the sender saw the ack

  // the sender retransmits; the restarted receiver recognizes the duplicate
  p.env.advance(500);
  auto retries = p.env.take_wire();
  REQUIRE(retries.size() == 1);
  p.b->on_frame(retries[0].bytes);
  auto acks = p.env.take_wire();
  REQUIRE(acks.size() == 1);
  p.a->on_frame(acks[0].bytes);

  CHECK(p.a->total_outgoing_pending() == 0);
  CHECK(p.b->receivable("sync_in") == 1);
  auto counts = wal_accept_counts(p.dir / "B" / "queue.wal");
  CHECK(counts.at("A/1") == 1);
}

TEST_CASE("receive on a missing or remote queue is refused") {
  Pair p;
  CHECK_THROWS_AS(p.a->receive(nullptr, QueueRef{"A", "nope", false}, RecvMode::Peek), Error);
  CHECK_THROWS_AS(p.a->receive(nullptr, QueueRef{"B", "sync_in", true}, RecvMode::Peek), Error);
}

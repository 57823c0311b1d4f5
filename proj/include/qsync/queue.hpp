// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "qsync/bytes.hpp"
#include "qsync/dtx.hpp"
#include "qsync/env.hpp"
#include "qsync/message.hpp"
#include "qsync/wal.hpp"

namespace qsync {

enum class AcceptOutcome : uint8_t { Accepted, Duplicate, OutOfOrderHeld };
enum class RecvMode : uint8_t { Peek, Remove };

// Retransmission policy for unacknowledged outgoing frames.
constexpr uint64_t kRetransmitInitialMs = 500;
constexpr uint64_t kRetransmitMaxMs = 8000;
// Out-of-order frames held per origin; beyond this the frame is dropped and
// sender retransmission recovers it later.
constexpr size_t kMaxHeldPerOrigin = 1024;

struct QueueStat {
  std::string name;
  bool transactional;
  size_t depth;   // committed messages in the queue (including peek-locked)
  size_t locked;  // held under an uncommitted REMOVE
};

struct OutgoingStat {
  QueueRef target;
  size_t pending;
  bool online;
  uint64_t backoff_ms;
};

// Per-node transactional message queues with exactly-once, per-origin
// in-order incoming delivery and durable store-and-forward outgoing queues.
// All durable state lives in the node WAL; the in-memory image is rebuilt by
// replay on restart. Single logical owner: callers serialize through the
// node's activity.
class QueueManager : public Participant {
 public:
  QueueManager(NodeId self, Wal& wal, Coordinator& coord);

  void set_env(NetworkEnv* env) { env_ = env; }
  // Invoked (live mode only) when a queue gains a receivable message.
  void set_on_receivable(std::function<void(const std::string& queue)> cb) {
    on_receivable_ = std::move(cb);
  }

  const NodeId& self() const { return self_; }

  // --- queue lifecycle ---
  QueueRef create_queue(const std::string& name, bool transactional);
  bool has_queue(const std::string& name) const { return local_.count(name) != 0; }
  QueueRef queue_ref(const std::string& name) const;

  // --- messaging ---
  MessageId send(TxnContext* txn, const QueueRef& dest, MsgKind kind, std::string body);
  std::optional<Message> receive(TxnContext* txn, const QueueRef& q, RecvMode mode);

  // Frame arrival from transport (any frame addressed to this node).
  void on_frame(const std::string& bytes);
  AcceptOutcome accept_incoming(const Message& frame);

  // Store-and-forward: hand pending frames for `target` to the transport.
  // No-op (returns 0) while the link is down.
  size_t flush_outgoing(const NodeId& target);
  void on_link_up(const NodeId& peer);

  // --- introspection ---
  std::vector<JournalEntry> journal() const { return journal_; }
  std::vector<QueueStat> queue_stats() const;
  std::vector<OutgoingStat> outgoing_stats() const;
  size_t receivable(const std::string& queue) const;
  size_t total_outgoing_pending() const;
  size_t held_count() const;
  uint64_t duplicates_detected() const { return duplicates_; }

  // --- Participant ---
  std::string participant_name() const override { return "queue"; }
  bool prepare(uint64_t txn_id, std::string& redo_out) override;
  void apply(uint64_t txn_id, const std::string& redo, ApplyMode mode) override;
  void rollback(uint64_t txn_id) override;

  // --- recovery (Node WAL replay) ---
  void replay_direct(WalType type, const std::string& payload);

 private:
  struct LocalQueue {
    QueueRef ref;
    std::deque<Message> msgs;
    std::set<MessageId> locked;
  };
  struct Outgoing {
    QueueRef target;
    std::deque<Message> pending;
    uint64_t backoff_ms = kRetransmitInitialMs;
    uint64_t timer_id = 0;
    bool timer_armed = false;
  };
  struct OriginState {
    uint64_t hwm = 0;
    std::map<uint64_t, Message> held;
  };
  struct OpSend {
    Message msg;
  };
  struct OpConsume {
    std::string queue;
    MessageId id;
    uint64_t ts;
  };
  struct TxnBuf {
    std::vector<std::pair<uint8_t, size_t>> order;  // (kind, index into sends/consumes)
    std::vector<OpSend> sends;
    std::vector<OpConsume> consumes;
    std::map<NodeId, uint64_t> seqs_taken;
    std::vector<std::pair<std::string, MessageId>> locks;
  };

  LocalQueue& need_queue(const std::string& name);
  LocalQueue& ensure_queue(const std::string& name, bool transactional);
  void apply_send(const Message& msg, ApplyMode mode, std::set<NodeId>* flush_later = nullptr);
  void apply_consume(const std::string& queue, const MessageId& id, uint64_t ts);
  void arm_timer(Outgoing& out);
  void on_retransmit(const NodeId& target, const std::string& queue);
  void send_ack(const Message& accepted);
  void on_ack(const Message& ack);
  void notify_receivable(const std::string& queue);

  NodeId self_;
  Wal& wal_;
  Coordinator& coord_;
  NetworkEnv* env_ = nullptr;
  std::function<void(const std::string&)> on_receivable_;

  std::map<std::string, LocalQueue> local_;
  std::map<std::pair<NodeId, std::string>, Outgoing> outgoing_;
  std::map<NodeId, OriginState> origins_;
  std::map<NodeId, uint64_t> next_seq_;  // per destination node
  uint64_t ctrl_seq_ = 0;
  uint64_t duplicates_ = 0;
  std::vector<JournalEntry> journal_;
  std::map<uint64_t, TxnBuf> bufs_;
};

// Message <-> bytes for WAL records and redo payloads (not the wire format;
// see frame.hpp for that).
void message_encode(ByteWriter& w, const Message& m);
Message message_decode(ByteReader& r);

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/queue.hpp"

#include <algorithm>
#include <cassert>

#include "qsync/crashpoint.hpp"
#include "qsync/errors.hpp"
#include "qsync/frame.hpp"

namespace qsync {

namespace {
constexpr uint8_t kOpSend = 1;
constexpr uint8_t kOpConsume = 2;
}  // namespace

void message_encode(ByteWriter& w, const Message& m) {
  w.str(m.id.origin);
  w.u64(m.id.seq);
  w.u8(static_cast<uint8_t>(m.kind));
  w.u8(m.transactional ? 1 : 0);
  w.u64(m.sent_at);
  w.str(m.dest_queue.node);
  w.str(m.dest_queue.name);
  w.u8(m.dest_queue.transactional ? 1 : 0);
  w.blob(m.body);
}

Message message_decode(ByteReader& r) {
  Message m;
  m.id.origin = r.str();
  m.id.seq = r.u64();
  m.kind = static_cast<MsgKind>(r.u8());
  m.transactional = r.u8() != 0;
  m.sent_at = r.u64();
  m.dest_queue.node = r.str();
  m.dest_queue.name = r.str();
  m.dest_queue.transactional = r.u8() != 0;
  m.body = r.blob();
  return m;
}

QueueManager::QueueManager(NodeId self, Wal& wal, Coordinator& coord)
    : self_(std::move(self)), wal_(wal), coord_(coord) {}

QueueRef QueueManager::create_queue(const std::string& name, bool transactional) {
  if (local_.count(name)) throw Error(Err::AlreadyExists, "queue '" + name + "'");
  ByteWriter w;
  w.str(name);
  w.u8(transactional ? 1 : 0);
  wal_.append(WalType::QueueCreate, w.take());
  LocalQueue& q = local_[name];
  q.ref = QueueRef{self_, name, transactional};
  return q.ref;
}

QueueManager::LocalQueue& QueueManager::need_queue(const std::string& name) {
  auto it = local_.find(name);
  if (it == local_.end()) throw Error(Err::QueueMissing, "queue '" + name + "' on " + self_);
  return it->second;
}

QueueManager::LocalQueue& QueueManager::ensure_queue(const std::string& name, bool transactional) {
  auto it = local_.find(name);
  if (it != local_.end()) return it->second;
  LocalQueue& q = local_[name];
  q.ref = QueueRef{self_, name, transactional};
  return q;
}

QueueRef QueueManager::queue_ref(const std::string& name) const {
  auto it = local_.find(name);
  if (it == local_.end()) throw Error(Err::QueueMissing, "queue '" + name + "' on " + self_);
  return it->second.ref;
}

MessageId QueueManager::send(TxnContext* txn, const QueueRef& dest, MsgKind kind,
                             std::string body) {
  if (body.size() > kMaxBodyBytes) {
    throw Error(Err::BodyTooLarge, std::to_string(body.size()) + " bytes");
  }
  QueueRef target = dest;
  if (target.node == self_) {
    target = queue_ref(target.name);  // canonical flag for local destinations
  }
  if (txn) {
    if (txn->state != TxnState::Active) {
      throw Error(Err::TxnAborted, "send inside finished txn " + std::to_string(txn->id));
    }
    if (!target.transactional) {
      throw Error(Err::NonTransactionalQueue, "transactional send to " + target.str());
    }
  } else if (target.transactional) {
    throw Error(Err::TransactionRequired, "non-transactional send to " + target.str());
  }

  Message m;
  m.id = MessageId{self_, ++next_seq_[target.node]};
  m.kind = kind;
  m.body = std::move(body);
  m.transactional = txn != nullptr;
  m.sent_at = env_ ? env_->now_ms() : 0;
  m.dest_queue = target;

  if (txn) {
    coord_.enlist(*txn, this);
    TxnBuf& buf = bufs_[txn->id];
    buf.order.emplace_back(kOpSend, buf.sends.size());
    buf.sends.push_back(OpSend{m});
    buf.seqs_taken[target.node]++;
    return m.id;
  }

  ByteWriter w;
  message_encode(w, m);
  wal_.append(WalType::NontxnSend, w.take());
  apply_send(m, ApplyMode::Live);
  return m.id;
}

std::optional<Message> QueueManager::receive(TxnContext* txn, const QueueRef& q, RecvMode mode) {
  if (q.node != self_) throw Error(Err::QueueMissing, q.str() + " is not local to " + self_);
  LocalQueue& lq = need_queue(q.name);

  auto first_unlocked = [&]() -> Message* {
    for (Message& m : lq.msgs) {
      if (!lq.locked.count(m.id)) return &m;
    }
    return nullptr;
  };

  if (mode == RecvMode::Peek) {
    Message* m = first_unlocked();
    if (!m) return std::nullopt;
    return *m;
  }

  if (txn) {
    if (txn->state != TxnState::Active) {
      throw Error(Err::TxnAborted, "receive inside finished txn");
    }
    if (!lq.ref.transactional) {
      throw Error(Err::NonTransactionalQueue, "transactional receive from " + q.str());
    }
    Message* m = first_unlocked();
    if (!m) return std::nullopt;
    coord_.enlist(*txn, this);
    lq.locked.insert(m->id);
    TxnBuf& buf = bufs_[txn->id];
    buf.order.emplace_back(kOpConsume, buf.consumes.size());
    buf.consumes.push_back(OpConsume{lq.ref.name, m->id, env_ ? env_->now_ms() : 0});
    buf.locks.emplace_back(lq.ref.name, m->id);
    return *m;
  }

  if (lq.ref.transactional) {
    throw Error(Err::TransactionRequired, "non-transactional receive from " + q.str());
  }
  Message* m = first_unlocked();
  if (!m) return std::nullopt;
  Message copy = *m;
  ByteWriter w;
  w.str(lq.ref.name);
  w.str(copy.id.origin);
  w.u64(copy.id.seq);
  w.u64(env_ ? env_->now_ms() : 0);
  wal_.append(WalType::NontxnConsume, w.take());
  apply_consume(lq.ref.name, copy.id, env_ ? env_->now_ms() : 0);
  return copy;
}

void QueueManager::apply_send(const Message& m, ApplyMode mode, std::set<NodeId>* flush_later) {
  JournalEntry e{Direction::Sent, m.id, m.dest_queue.str(), m.sent_at, JournalOutcome::Committed};
  journal_.push_back(e);
  next_seq_[m.dest_queue.node] = std::max(next_seq_[m.dest_queue.node], m.id.seq);
  if (m.dest_queue.node == self_) {
    LocalQueue& q = ensure_queue(m.dest_queue.name, m.dest_queue.transactional);
    q.msgs.push_back(m);
    if (mode == ApplyMode::Live) notify_receivable(q.ref.name);
    return;
  }
  Outgoing& out = outgoing_[{m.dest_queue.node, m.dest_queue.name}];
  out.target = m.dest_queue;
  out.pending.push_back(m);
  if (mode == ApplyMode::Live && env_) {
    if (flush_later) {
      flush_later->insert(m.dest_queue.node);
    } else {
      flush_outgoing(m.dest_queue.node);
    }
  }
}

void QueueManager::apply_consume(const std::string& queue, const MessageId& id, uint64_t ts) {
  auto it = local_.find(queue);
  if (it == local_.end()) return;
  LocalQueue& q = it->second;
  q.locked.erase(id);
  auto pos = std::find_if(q.msgs.begin(), q.msgs.end(),
                          [&](const Message& m) { return m.id == id; });
  if (pos == q.msgs.end()) return;
  q.msgs.erase(pos);
  journal_.push_back(
      JournalEntry{Direction::Received, id, q.ref.str(), ts, JournalOutcome::Committed});
}

void QueueManager::on_frame(const std::string& bytes) {
  Message m = decode_frame(bytes);
  if (m.kind == MsgKind::Ack) {
    on_ack(m);
    return;
  }
  accept_incoming(m);
}

AcceptOutcome QueueManager::accept_incoming(const Message& frame) {
  if (frame.dest_queue.node != self_) return AcceptOutcome::Duplicate;  // misrouted; drop
  OriginState& o = origins_[frame.id.origin];
  if (frame.id.seq <= o.hwm) {
    ++duplicates_;
    send_ack(frame);  // the earlier ack may have been lost
    return AcceptOutcome::Duplicate;
  }
  if (frame.id.seq > o.hwm + 1) {
    if (o.held.size() >= kMaxHeldPerOrigin) return AcceptOutcome::OutOfOrderHeld;  // dropped
    o.held.emplace(frame.id.seq, frame);
    return AcceptOutcome::OutOfOrderHeld;
  }

  // In-order: accept this frame plus any helds it unblocks, in seq order.
  crashpoint::hit(self_, "accept.before_wal");
  std::vector<Message> released;
  released.push_back(frame);
  o.held.erase(frame.id.seq);
  while (true) {
    auto it = o.held.find(o.hwm + released.size() + 1);
    if (it == o.held.end()) break;
    released.push_back(it->second);
    o.held.erase(it);
  }
  std::set<std::string> touched;
  for (const Message& m : released) {
    ByteWriter w;
    message_encode(w, m);
    wal_.append(WalType::Accept, w.take());
    o.hwm = m.id.seq;
    LocalQueue& q = ensure_queue(m.dest_queue.name, m.dest_queue.transactional);
    q.msgs.push_back(m);
    touched.insert(q.ref.name);
  }
  crashpoint::hit(self_, "accept.after_wal");
  for (const Message& m : released) send_ack(m);
  for (const std::string& q : touched) notify_receivable(q);
  return AcceptOutcome::Accepted;
}

void QueueManager::send_ack(const Message& accepted) {
  if (!env_) return;
  if (!env_->link_online(self_, accepted.id.origin)) return;
  Message ack;
  ack.id = MessageId{self_, ++ctrl_seq_};
  ack.kind = MsgKind::Ack;
  ack.sent_at = env_->now_ms();
  ack.dest_queue = QueueRef{accepted.id.origin, "_ctl", false};
  ByteWriter w;
  w.str(accepted.dest_queue.name);
  w.u64(accepted.id.seq);
  ack.body = w.take();
  env_->send_frame(self_, accepted.id.origin, encode_frame(ack));
}

void QueueManager::on_ack(const Message& ack) {
  ByteReader r(ack.body);
  std::string queue = r.str();
  uint64_t seq = r.u64();
  auto it = outgoing_.find({ack.id.origin, queue});
  if (it == outgoing_.end()) return;
  Outgoing& out = it->second;
  auto pos = std::find_if(out.pending.begin(), out.pending.end(),
                          [&](const Message& m) { return m.id.seq == seq; });
  if (pos == out.pending.end()) return;  // duplicate ack
  ByteWriter w;
  w.str(ack.id.origin);
  w.str(queue);
  w.u64(seq);
  wal_.append(WalType::OutAcked, w.take());
  out.pending.erase(pos);
  out.backoff_ms = kRetransmitInitialMs;
  if (out.pending.empty() && out.timer_armed && env_) {
    env_->cancel_timer(out.timer_id);
    out.timer_armed = false;
  }
}

size_t QueueManager::flush_outgoing(const NodeId& target) {
  if (!env_ || !env_->link_online(self_, target)) return 0;
  size_t count = 0;
  for (auto& [key, out] : outgoing_) {
    if (key.first != target || out.pending.empty()) continue;
    for (const Message& m : out.pending) {
      env_->send_frame(self_, target, encode_frame(m));
      ++count;
    }
    arm_timer(out);
  }
  return count;
}

void QueueManager::arm_timer(Outgoing& out) {
  if (out.timer_armed || out.pending.empty() || !env_) return;
  NodeId target = out.target.node;
  std::string queue = out.target.name;
  out.timer_id = env_->set_timer(self_, out.backoff_ms,
                                 [this, target, queue] { on_retransmit(target, queue); });
  out.timer_armed = true;
}

void QueueManager::on_retransmit(const NodeId& target, const std::string& queue) {
  auto it = outgoing_.find({target, queue});
  if (it == outgoing_.end()) return;
  Outgoing& out = it->second;
  out.timer_armed = false;
  if (out.pending.empty()) return;
  if (!env_->link_online(self_, target)) return;  // link-up will reflush
  for (const Message& m : out.pending) {
    env_->send_frame(self_, target, encode_frame(m));
  }
  out.backoff_ms = std::min(out.backoff_ms * 2, kRetransmitMaxMs);
  arm_timer(out);
}

void QueueManager::on_link_up(const NodeId& peer) {
  for (auto& [key, out] : outgoing_) {
    if (key.first == peer) out.backoff_ms = kRetransmitInitialMs;
  }
  flush_outgoing(peer);
}

void QueueManager::notify_receivable(const std::string& queue) {
  if (on_receivable_) on_receivable_(queue);
}

// --- Participant ---

bool QueueManager::prepare(uint64_t txn_id, std::string& redo_out) {
  ByteWriter w;
  auto it = bufs_.find(txn_id);
  if (it == bufs_.end()) {
    w.u32(0);
    redo_out = w.take();
    return true;
  }
  const TxnBuf& buf = it->second;
  w.u32(static_cast<uint32_t>(buf.order.size()));
  for (auto [kind, idx] : buf.order) {
    w.u8(kind);
    if (kind == kOpSend) {
      message_encode(w, buf.sends[idx].msg);
    } else {
      const OpConsume& c = buf.consumes[idx];
      w.str(c.queue);
      w.str(c.id.origin);
      w.u64(c.id.seq);
      w.u64(c.ts);
    }
  }
  redo_out = w.take();
  return true;
}

void QueueManager::apply(uint64_t txn_id, const std::string& redo, ApplyMode mode) {
  ByteReader r(redo);
  uint32_t n = r.u32();
  std::set<NodeId> flush_targets;
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t kind = r.u8();
    if (kind == kOpSend) {
      Message m = message_decode(r);
      apply_send(m, mode, &flush_targets);
    } else if (kind == kOpConsume) {
      std::string queue = r.str();
      MessageId id{r.str(), 0};
      id.seq = r.u64();
      uint64_t ts = r.u64();
      apply_consume(queue, id, ts);
    } else {
      throw Error(Err::CorruptLog, "bad queue redo op");
    }
  }
  bufs_.erase(txn_id);
  for (const NodeId& target : flush_targets) flush_outgoing(target);
}

void QueueManager::rollback(uint64_t txn_id) {
  auto it = bufs_.find(txn_id);
  if (it == bufs_.end()) return;
  TxnBuf& buf = it->second;
  for (const auto& [queue, id] : buf.locks) {
    auto q = local_.find(queue);
    if (q != local_.end()) q->second.locked.erase(id);
  }
  for (const auto& [dest, count] : buf.seqs_taken) {
    next_seq_[dest] -= count;
  }
  bufs_.erase(it);
}

// --- recovery ---

void QueueManager::replay_direct(WalType type, const std::string& payload) {
  ByteReader r(payload);
  switch (type) {
    case WalType::QueueCreate: {
      std::string name = r.str();
      bool txnal = r.u8() != 0;
      ensure_queue(name, txnal);
      break;
    }
    case WalType::Accept: {
      Message m = message_decode(r);
      OriginState& o = origins_[m.id.origin];
      o.hwm = std::max(o.hwm, m.id.seq);
      LocalQueue& q = ensure_queue(m.dest_queue.name, m.dest_queue.transactional);
      q.msgs.push_back(m);
      break;
    }
    case WalType::NontxnSend: {
      apply_send(message_decode(r), ApplyMode::Replay);
      break;
    }
    case WalType::NontxnConsume: {
      std::string queue = r.str();
      MessageId id{r.str(), 0};
      id.seq = r.u64();
      uint64_t ts = r.u64();
      apply_consume(queue, id, ts);
      break;
    }
    case WalType::OutAcked: {
      NodeId node = r.str();
      std::string queue = r.str();
      uint64_t seq = r.u64();
      auto it = outgoing_.find({node, queue});
      if (it == outgoing_.end()) break;
      auto& pending = it->second.pending;
      auto pos = std::find_if(pending.begin(), pending.end(),
                              [&](const Message& m) { return m.id.seq == seq; });
      if (pos != pending.end()) pending.erase(pos);
      break;
    }
    default:
      throw Error(Err::CorruptLog, "unexpected record in queue replay");
  }
}

// --- introspection ---

std::vector<QueueStat> QueueManager::queue_stats() const {
  std::vector<QueueStat> out;
  for (const auto& [name, q] : local_) {
    out.push_back(QueueStat{name, q.ref.transactional, q.msgs.size(), q.locked.size()});
  }
  return out;
}

std::vector<OutgoingStat> QueueManager::outgoing_stats() const {
  std::vector<OutgoingStat> out;
  for (const auto& [key, o] : outgoing_) {
    bool online = env_ && env_->link_online(self_, key.first);
    out.push_back(OutgoingStat{o.target, o.pending.size(), online, o.backoff_ms});
  }
  return out;
}

size_t QueueManager::receivable(const std::string& queue) const {
  auto it = local_.find(queue);
  if (it == local_.end()) return 0;
  return it->second.msgs.size() - it->second.locked.size();
}

size_t QueueManager::total_outgoing_pending() const {
  size_t n = 0;
  for (const auto& [key, o] : outgoing_) n += o.pending.size();
  return n;
}

size_t QueueManager::held_count() const {
  size_t n = 0;
  for (const auto& [origin, o] : origins_) n += o.held.size();
  return n;
}

}  // namespace qsync

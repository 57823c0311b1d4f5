// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qsync/dtx.hpp"
#include "qsync/queue.hpp"
#include "qsync/store.hpp"

namespace qsync {

constexpr const char* kMailQueue = "mail_in";
constexpr size_t kMaxSubjectBytes = 256;
constexpr size_t kMaxMailBytes = kMaxBodyBytes;  // whole serialized envelope

struct Attachment {
  std::string name;
  std::string bytes;
  friend bool operator==(const Attachment&, const Attachment&) = default;
};

struct MailEnvelope {
  MessageId mail_id;  // (origin, per-origin mail counter)
  NodeId from;
  NodeId to;
  std::string subject;
  std::string body;
  std::vector<Attachment> attachments;
  bool encrypted = false;
};

struct InboxEntry {
  MailEnvelope envelope;
  std::vector<NodeId> hops;  // route the mail actually took, sender first
  uint64_t received_at = 0;
};

// Authenticated encryption for mail payloads (XSalsa20-Poly1305 secretbox).
// The wrapper is JSON {alg, nonce_b64, ct_b64}; decrypt rejects any
// modification. Keys are 32 bytes (see TopologyConfig::mail_key).
std::string encrypt_body(const std::string& key, const std::string& plaintext);
std::string decrypt_body(const std::string& key, const std::string& wrapper);

// Store-and-forward mail over the queue layer. Inter-branch mail always
// relays through central's dispatching hub; the relay hop is a queue-only
// internal transaction (consume + forward). Delivered mail lands in a
// durable per-node mailbox.
class MailSystem : public Participant {
 public:
  MailSystem(const TopologyConfig& topo, NodeId self, Coordinator& coord, QueueManager& queues,
             StatementStore& store);

  void set_env(NetworkEnv* env) { env_ = env; }

  MessageId send_mail(MailEnvelope env);

  // Decrypted inbox in arrival order. Throws Err::DecryptFailure on a
  // tampered payload. Read-only and idempotent.
  std::vector<InboxEntry> fetch_inbox() const;
  size_t inbox_size() const { return inbox_.size(); }

  // Drain receivable mail messages: deliver local mail, relay transit mail.
  void on_arrived();
  void notify_arrived();
  bool receive_pending() const { return receive_scheduled_; }

  // --- Participant ---
  std::string participant_name() const override { return "mail"; }
  bool prepare(uint64_t txn_id, std::string& redo_out) override;
  void apply(uint64_t txn_id, const std::string& redo, ApplyMode mode) override;
  void rollback(uint64_t txn_id) override;

 private:
  struct StoredMail {
    MessageId mail_id;
    std::string wire;  // full wire JSON as delivered
    uint64_t received_at = 0;
  };
  struct TxnBuf {
    ByteWriter ops;
    uint32_t op_count = 0;
    uint64_t seqs_taken = 0;
  };

  TxnBuf& buf_for(TxnContext& txn);
  void alloc_seq(TxnContext& txn, uint64_t seq);
  void add_inbox(TxnContext& txn, const MessageId& mail_id, const std::string& wire,
                 uint64_t ts);
  void run_receive();

  const TopologyConfig& topo_;
  NodeId self_;
  Coordinator& coord_;
  QueueManager& queues_;
  StatementStore& store_;
  NetworkEnv* env_ = nullptr;

  std::vector<StoredMail> inbox_;
  uint64_t next_mail_seq_ = 1;
  std::map<uint64_t, TxnBuf> bufs_;
  bool receive_scheduled_ = false;
};

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/mail.hpp"

#include <sodium.h>

#include <json.hpp>

#include <set>

#include "qsync/errors.hpp"

namespace qsync {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr uint8_t kOpAllocSeq = 1;
constexpr uint8_t kOpInboxAdd = 2;

constexpr const char* kMailAlg = "xsalsa20poly1305";

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(Err::Io, "libsodium initialization failed");
}

// Envelope <-> JSON {from,to,subject,body,attachments:[{name,b64}]}.
ordered_json envelope_to_json(const MailEnvelope& env) {
  ordered_json j;
  j["from"] = env.from;
  j["to"] = env.to;
  j["subject"] = env.subject;
  j["body"] = env.body;
  ordered_json atts = ordered_json::array();
  for (const auto& a : env.attachments) {
    ordered_json att;
    att["name"] = a.name;
    att["b64"] = b64_encode(a.bytes);
    atts.push_back(std::move(att));
  }
  j["attachments"] = std::move(atts);
  return j;
}

MailEnvelope envelope_from_json(const ordered_json& j) {
  if (!j.is_object() || !j.contains("from") || !j.contains("to") || !j.contains("subject") ||
      !j.contains("body") || !j.contains("attachments")) {
    throw Error(Err::Parse, "bad mail envelope");
  }
  MailEnvelope env;
  env.from = j["from"].get<std::string>();
  env.to = j["to"].get<std::string>();
  env.subject = j["subject"].get<std::string>();
  env.body = j["body"].get<std::string>();
  for (const auto& att : j["attachments"]) {
    env.attachments.push_back(
        Attachment{att["name"].get<std::string>(), b64_decode(att["b64"].get<std::string>())});
  }
  return env;
}

}  // namespace

std::string encrypt_body(const std::string& key, const std::string& plaintext) {
  ensure_sodium();
  if (key.size() != crypto_secretbox_KEYBYTES) {
    throw Error(Err::DecryptFailure, "mail key must be 32 bytes");
  }
  std::string nonce(crypto_secretbox_NONCEBYTES, '\0');
  randombytes_buf(nonce.data(), nonce.size());
  std::string ct(plaintext.size() + crypto_secretbox_MACBYTES, '\0');
  crypto_secretbox_easy(reinterpret_cast<unsigned char*>(ct.data()),
                        reinterpret_cast<const unsigned char*>(plaintext.data()),
                        plaintext.size(), reinterpret_cast<const unsigned char*>(nonce.data()),
                        reinterpret_cast<const unsigned char*>(key.data()));
  ordered_json j;
  j["alg"] = kMailAlg;
  j["nonce_b64"] = b64_encode(nonce);
  j["ct_b64"] = b64_encode(ct);
  return j.dump();
}

std::string decrypt_body(const std::string& key, const std::string& wrapper) {
  ensure_sodium();
  if (key.size() != crypto_secretbox_KEYBYTES) {
    throw Error(Err::DecryptFailure, "mail key must be 32 bytes");
  }
  ordered_json j = ordered_json::parse(wrapper, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("alg") || !j.contains("nonce_b64") ||
      !j.contains("ct_b64")) {
    throw Error(Err::DecryptFailure, "bad encryption wrapper");
  }
  if (j["alg"].get<std::string>() != kMailAlg) {
    throw Error(Err::DecryptFailure, "unknown algorithm " + j["alg"].get<std::string>());
  }
  std::string nonce, ct;
  try {
    nonce = b64_decode(j["nonce_b64"].get<std::string>());
    ct = b64_decode(j["ct_b64"].get<std::string>());
  } catch (const Error&) {
    throw Error(Err::DecryptFailure, "bad base64 in wrapper");
  }
  if (nonce.size() != crypto_secretbox_NONCEBYTES || ct.size() < crypto_secretbox_MACBYTES) {
    throw Error(Err::DecryptFailure, "bad nonce or ciphertext length");
  }
  std::string pt(ct.size() - crypto_secretbox_MACBYTES, '\0');
  if (crypto_secretbox_open_easy(reinterpret_cast<unsigned char*>(pt.data()),
                                 reinterpret_cast<const unsigned char*>(ct.data()), ct.size(),
                                 reinterpret_cast<const unsigned char*>(nonce.data()),
                                 reinterpret_cast<const unsigned char*>(key.data())) != 0) {
    throw Error(Err::DecryptFailure, "ciphertext rejected");
  }
  return pt;
}

MailSystem::MailSystem(const TopologyConfig& topo, NodeId self, Coordinator& coord,
                       QueueManager& queues, StatementStore& store)
    : topo_(topo), self_(std::move(self)), coord_(coord), queues_(queues), store_(store) {}

MessageId MailSystem::send_mail(MailEnvelope env) {
  if (!topo_.has_node(env.to)) throw Error(Err::UnknownRecipient, "'" + env.to + "'");
  if (env.subject.size() > kMaxSubjectBytes) {
    throw Error(Err::TooLarge, "subject exceeds " + std::to_string(kMaxSubjectBytes) + " bytes");
  }
  {
    std::set<std::string> names;
    for (const auto& a : env.attachments) {
      if (!names.insert(a.name).second) {
        throw Error(Err::Validation, "duplicate attachment name '" + a.name + "'");
      }
    }
  }
  env.from = self_;

  TxnContext& txn = coord_.begin(TxnMode::External);
  MessageId mail_id{self_, next_mail_seq_};
  env.mail_id = mail_id;
  alloc_seq(txn, mail_id.seq);

  std::string payload = envelope_to_json(env).dump();
  if (env.encrypted) payload = encrypt_body(topo_.mail_key(), payload);

  ordered_json wire;
  wire["v"] = 1;
  wire["mail_origin"] = mail_id.origin;
  wire["mail_seq"] = mail_id.seq;
  wire["to"] = env.to;
  wire["enc"] = env.encrypted;
  wire["hops"] = ordered_json::array({self_});
  wire["payload"] = env.encrypted ? ordered_json(payload) : ordered_json::parse(payload);
  std::string wire_bytes = wire.dump();
  if (wire_bytes.size() > kMaxMailBytes) {
    coord_.abort(txn);
    throw Error(Err::TooLarge, "serialized mail is " + std::to_string(wire_bytes.size()) +
                                   " bytes (cap " + std::to_string(kMaxMailBytes) + ")");
  }

  // All mail to or from central goes direct; everything else relays through
  // the dispatching hub.
  NodeId first_hop;
  if (env.to == self_) {
    first_hop = self_;
  } else if (self_ == topo_.central() || env.to == topo_.central()) {
    first_hop = env.to;
  } else {
    first_hop = topo_.central();
  }

  try {
    queues_.send(&txn, QueueRef{first_hop, kMailQueue, true}, MsgKind::Mail, wire_bytes);
  } catch (const Error&) {
    coord_.abort(txn);
    throw;
  }
  if (coord_.commit(txn) != CommitOutcome::Committed) {
    throw Error(Err::TxnAborted, "mail send transaction aborted");
  }
  return mail_id;
}

void MailSystem::on_arrived() {
  if (!queues_.has_queue(kMailQueue)) return;
  QueueRef q = queues_.queue_ref(kMailQueue);
  while (true) {
    auto head = queues_.receive(nullptr, q, RecvMode::Peek);
    if (!head) break;

    ordered_json wire = ordered_json::parse(head->body, nullptr, false);
    if (wire.is_discarded() || !wire.is_object() || !wire.contains("to") ||
        !wire.contains("mail_origin") || !wire.contains("mail_seq")) {
      TxnContext& txn = coord_.begin(TxnMode::External);
      auto msg = queues_.receive(&txn, q, RecvMode::Remove);
      store_.record_dead_letter(
          txn, DeadLetterEntry{msg->id, DeadLetterReason::ParseFail, msg->body});
      if (coord_.commit(txn) != CommitOutcome::Committed) break;
      continue;
    }

    NodeId to = wire["to"].get<std::string>();
    if (to == self_) {
      MessageId mail_id{wire["mail_origin"].get<std::string>(),
                        wire["mail_seq"].get<uint64_t>()};
      wire["hops"].push_back(self_);
      TxnContext& txn = coord_.begin(TxnMode::External);
      queues_.receive(&txn, q, RecvMode::Remove);
      add_inbox(txn, mail_id, wire.dump(), env_ ? env_->now_ms() : 0);
      if (coord_.commit(txn) != CommitOutcome::Committed) break;
      continue;
    }

    // Transit mail: forward toward the destination inside one queue-only
    // internal transaction (consume + re-send).
    NodeId next = topo_.has_node(to) ? topo_.route_next_hop(self_, to) : topo_.central();
    wire["hops"].push_back(self_);
    TxnContext& txn = coord_.begin(TxnMode::Internal);
    queues_.receive(&txn, q, RecvMode::Remove);
    try {
      queues_.send(&txn, QueueRef{next, kMailQueue, true}, MsgKind::Mail, wire.dump());
    } catch (const Error&) {
      coord_.abort(txn);
      break;
    }
    if (coord_.commit(txn) != CommitOutcome::Committed) break;
  }
}

std::vector<InboxEntry> MailSystem::fetch_inbox() const {
  std::vector<InboxEntry> out;
  for (const StoredMail& m : inbox_) {
    ordered_json wire = ordered_json::parse(m.wire);
    InboxEntry entry;
    entry.received_at = m.received_at;
    for (const auto& hop : wire["hops"]) entry.hops.push_back(hop.get<std::string>());
    bool enc = wire["enc"].get<bool>();
    std::string env_json =
        enc ? decrypt_body(topo_.mail_key(), wire["payload"].get<std::string>())
            : wire["payload"].dump();
    ordered_json env = ordered_json::parse(env_json, nullptr, false);
    if (env.is_discarded()) throw Error(Err::DecryptFailure, "envelope is not JSON");
    entry.envelope = envelope_from_json(env);
    entry.envelope.mail_id = m.mail_id;
    entry.envelope.encrypted = enc;
    out.push_back(std::move(entry));
  }
  return out;
}

void MailSystem::notify_arrived() {
  if (receive_scheduled_ || !env_) return;
  receive_scheduled_ = true;
  env_->post(self_, [this] { run_receive(); });
}

void MailSystem::run_receive() {
  receive_scheduled_ = false;
  on_arrived();
}

// --- Participant ---

MailSystem::TxnBuf& MailSystem::buf_for(TxnContext& txn) {
  coord_.enlist(txn, this);
  return bufs_[txn.id];
}

void MailSystem::alloc_seq(TxnContext& txn, uint64_t seq) {
  TxnBuf& buf = buf_for(txn);
  ++next_mail_seq_;
  ++buf.seqs_taken;
  buf.ops.u8(kOpAllocSeq);
  buf.ops.u64(seq);
  ++buf.op_count;
}

void MailSystem::add_inbox(TxnContext& txn, const MessageId& mail_id, const std::string& wire,
                           uint64_t ts) {
  TxnBuf& buf = buf_for(txn);
  buf.ops.u8(kOpInboxAdd);
  buf.ops.str(mail_id.origin);
  buf.ops.u64(mail_id.seq);
  buf.ops.blob(wire);
  buf.ops.u64(ts);
  ++buf.op_count;
}

bool MailSystem::prepare(uint64_t txn_id, std::string& redo_out) {
  ByteWriter w;
  auto it = bufs_.find(txn_id);
  if (it == bufs_.end()) {
    w.u32(0);
  } else {
    w.u32(it->second.op_count);
    w.raw(it->second.ops.bytes().data(), it->second.ops.bytes().size());
  }
  redo_out = w.take();
  return true;
}

void MailSystem::apply(uint64_t txn_id, const std::string& redo, ApplyMode) {
  ByteReader r(redo);
  uint32_t n = r.u32();
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t op = r.u8();
    if (op == kOpAllocSeq) {
      uint64_t seq = r.u64();
      next_mail_seq_ = std::max(next_mail_seq_, seq + 1);
    } else if (op == kOpInboxAdd) {
      StoredMail m;
      m.mail_id.origin = r.str();
      m.mail_id.seq = r.u64();
      m.wire = r.blob();
      m.received_at = r.u64();
      bool dup = false;
      for (const StoredMail& existing : inbox_) {
        if (existing.mail_id == m.mail_id) dup = true;
      }
      if (!dup) inbox_.push_back(std::move(m));
    } else {
      throw Error(Err::CorruptLog, "bad mail redo op");
    }
  }
  bufs_.erase(txn_id);
}

void MailSystem::rollback(uint64_t txn_id) {
  auto it = bufs_.find(txn_id);
  if (it == bufs_.end()) return;
  next_mail_seq_ -= it->second.seqs_taken;
  bufs_.erase(it);
}

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>

#include "qsync/topology.hpp"

namespace qsync {

// 4 MiB cap on message bodies; SyncBody batching keeps well under it.
constexpr size_t kMaxBodyBytes = 4 * 1024 * 1024;

enum class MsgKind : uint8_t {
  Sync = 0x01,
  Mail = 0x02,
  Ack = 0x03,
  // 0x80..0xFF reserved for control-socket commands (see net.hpp).
};

// (origin, seq) is the exactly-once dedup key. Seq streams are contiguous per
// (origin, destination node): each receiver sees 1,2,3,... from every origin,
// which is what lets the gap-hold dedup release frames in order.
struct MessageId {
  NodeId origin;
  uint64_t seq = 0;

  friend bool operator==(const MessageId&, const MessageId&) = default;
  friend auto operator<=>(const MessageId&, const MessageId&) = default;

  std::string str() const { return origin + "/" + std::to_string(seq); }
};

struct QueueRef {
  NodeId node;
  std::string name;
  bool transactional = false;

  friend bool operator==(const QueueRef&, const QueueRef&) = default;
  friend auto operator<=>(const QueueRef&, const QueueRef&) = default;

  std::string str() const { return node + "/" + name; }
};

struct Message {
  MessageId id;
  MsgKind kind = MsgKind::Sync;
  std::string body;
  bool transactional = false;
  uint64_t sent_at = 0;  // logical (simulated or wall) ms
  QueueRef dest_queue;
};

enum class Direction : uint8_t { Sent = 1, Received = 2 };
enum class JournalOutcome : uint8_t { Committed = 1, Aborted = 2 };

struct JournalEntry {
  Direction direction;
  MessageId id;
  std::string queue;  // "<node>/<name>" of the peer-side or local queue
  uint64_t timestamp = 0;
  JournalOutcome outcome = JournalOutcome::Committed;
};

}  // namespace qsync

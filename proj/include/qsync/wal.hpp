// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace qsync {

// One append-only log file per node (<state>/<node>/queue.wal). Every durable
// effect on a node goes through here: queue metadata, transaction records with
// their redo payloads, and non-transactional queue effects. Records are
// 4-byte big-endian length (covering type byte + payload), then the type
// byte, then the payload.
enum class WalType : uint8_t {
  QueueCreate = 0x01,
  Prepared = 0x02,     // txn_id, participant, redo blob
  Commit = 0x03,       // txn_id
  Abort = 0x04,        // txn_id
  InternalCommit = 0x05,  // txn_id, participant, redo blob
  Accept = 0x06,       // incoming message accepted (dedup HWM advance + enqueue)
  NontxnSend = 0x07,
  NontxnConsume = 0x08,
  OutAcked = 0x09,     // message left an outgoing queue after remote ack
};

class Wal {
 public:
  explicit Wal(std::filesystem::path path);
  ~Wal();

  Wal(const Wal&) = delete;
  Wal& operator=(const Wal&) = delete;

  // Replays every complete record in on-disk order and truncates a torn tail
  // (a crash mid-append). Mid-file garbage raises Err::CorruptLog. Call before
  // the first append.
  void replay(const std::function<void(WalType, const std::string&)>& visit);

  void append(WalType type, const std::string& payload);

  // Durable writes performed by this handle (one per append). The internal-
  // vs-external commit cost assertion counts these.
  uint64_t append_count() const { return appends_; }

  const std::filesystem::path& path() const { return path_; }

  // Read-only scan of an arbitrary WAL file; used by tests and the admin CLI
  // as an implementation-independent view of durable state.
  static void scan(const std::filesystem::path& path,
                   const std::function<void(WalType, const std::string&)>& visit);

 private:
  std::filesystem::path path_;
  int fd_ = -1;
  uint64_t appends_ = 0;
};

}  // namespace qsync

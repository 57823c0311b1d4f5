// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/frame.hpp"

#include "qsync/bytes.hpp"
#include "qsync/errors.hpp"

namespace qsync {

std::string encode_frame(const Message& msg) {
  ByteWriter w;
  w.u32(kFrameMagic);
  w.u8(kFrameVersion);
  w.u8(static_cast<uint8_t>(msg.kind));
  uint8_t flags = 0;
  if (msg.transactional) flags |= 0x01;
  if (msg.dest_queue.transactional) flags |= 0x02;
  w.u8(flags);
  w.str(msg.id.origin);
  w.u64(msg.id.seq);
  w.str(msg.dest_queue.node);
  w.str(msg.dest_queue.name);
  w.u64(msg.sent_at);
  w.blob(msg.body);
  std::string digest = sha256(msg.body);
  w.raw(digest.data(), digest.size());
  return w.take();
}

Message decode_frame(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.remaining() < 4) throw Error(Err::Truncated, "frame shorter than magic");
  if (r.u32() != kFrameMagic) throw Error(Err::BadMagic, "not a qsync frame");
  uint8_t version = r.u8();
  if (version != kFrameVersion) {
    throw Error(Err::BadVersion, "frame version " + std::to_string(version));
  }
  Message m;
  m.kind = static_cast<MsgKind>(r.u8());
  uint8_t flags = r.u8();
  m.transactional = flags & 0x01;
  m.id.origin = r.str();
  m.id.seq = r.u64();
  m.dest_queue.node = r.str();
  m.dest_queue.name = r.str();
  m.dest_queue.transactional = flags & 0x02;
  m.sent_at = r.u64();
  m.body = r.blob();
  std::string digest = r.raw(32);
  if (!r.done()) throw Error(Err::Truncated, "trailing bytes after frame");
  if (digest != sha256(m.body)) throw Error(Err::BodyHashMismatch, "frame body corrupted");
  return m;
}

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>

#include "qsync/message.hpp"

namespace qsync {

// Wire format, big-endian throughout:
//   u32 magic 0x514D5351 ("QMSQ")
//   u8  version (1)
//   u8  kind
//   u8  flags (bit0: message transactional, bit1: dest queue transactional)
//   str origin, u64 seq
//   str dest node, str dest queue name
//   u64 sent_at
//   u32 body length + body bytes
//   32-byte SHA-256 of the body
// Strings are u16-length-prefixed. The same frame bytes travel over the
// simulator, the stream transport, and the control socket.
constexpr uint32_t kFrameMagic = 0x514D5351;
constexpr uint8_t kFrameVersion = 1;

std::string encode_frame(const Message& msg);

// Throws Err::BadMagic, Err::BadVersion, Err::Truncated, Err::BodyHashMismatch.
Message decode_frame(const std::string& bytes);

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qsync {

// Big-endian binary writer used by the WAL record payloads and the frame
// codec. Strings are u16-length-prefixed, blobs u32-length-prefixed.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(uint16_t v);
  void u32(uint32_t v);
  void u64(uint64_t v);
  void i64(int64_t v) { u64(static_cast<uint64_t>(v)); }
  void str(std::string_view s);   // u16 length + bytes
  void blob(std::string_view s);  // u32 length + bytes
  void raw(const void* data, size_t n);

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

// Matching reader. Underflow throws Error(Err::Truncated).
class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  uint8_t u8();
  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  int64_t i64() { return static_cast<int64_t>(u64()); }
  std::string str();
  std::string blob();
  std::string raw(size_t n);

  size_t remaining() const { return in_.size() - pos_; }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  size_t pos_ = 0;
};

std::string to_hex(std::string_view bytes);
std::string from_hex(std::string_view hex);  // throws Err::Parse on bad input

std::string b64_encode(std::string_view bytes);
std::string b64_decode(std::string_view text);  // throws Err::Parse on bad input

std::string sha256(std::string_view bytes);  // 32 raw bytes
std::string sha256_hex(std::string_view bytes);

// Stable 64-bit string hash (used to derive per-link PRNG streams; must not
// depend on std::hash, whose value is implementation-defined).
uint64_t fnv1a64(std::string_view s);

// Splittable deterministic PRNG: splitmix64. One stream per label.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  static SplitMix64 stream(uint64_t seed, std::string_view label) {
    return SplitMix64(seed ^ fnv1a64(label));
  }

  uint64_t next();
  // Uniform in [0, 1).
  double next_unit();
  // Uniform in [0, n); n > 0.
  uint64_t below(uint64_t n);

 private:
  uint64_t state_;
};

// Shell-style glob with * and ? (table-name patterns and filters).
bool glob_match(std::string_view pattern, std::string_view text);

}  // namespace qsync

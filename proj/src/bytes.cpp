// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/bytes.hpp"

#include <sodium.h>

#include <cstring>

#include "qsync/errors.hpp"

namespace qsync {

void ByteWriter::u16(uint16_t v) {
  u8(static_cast<uint8_t>(v >> 8));
  u8(static_cast<uint8_t>(v));
}

void ByteWriter::u32(uint32_t v) {
  u16(static_cast<uint16_t>(v >> 16));
  u16(static_cast<uint16_t>(v));
}

void ByteWriter::u64(uint64_t v) {
  u32(static_cast<uint32_t>(v >> 32));
  u32(static_cast<uint32_t>(v));
}

void ByteWriter::str(std::string_view s) {
  if (s.size() > UINT16_MAX) throw Error(Err::Io, "string field too long");
  u16(static_cast<uint16_t>(s.size()));
  raw(s.data(), s.size());
}

void ByteWriter::blob(std::string_view s) {
  if (s.size() > UINT32_MAX) throw Error(Err::Io, "blob field too long");
  u32(static_cast<uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void ByteWriter::raw(const void* data, size_t n) {
  buf_.append(static_cast<const char*>(data), n);
}

uint8_t ByteReader::u8() {
  if (pos_ + 1 > in_.size()) throw Error(Err::Truncated, "u8");
  return static_cast<uint8_t>(in_[pos_++]);
}

uint16_t ByteReader::u16() {
  uint16_t hi = u8();
  return static_cast<uint16_t>(hi << 8 | u8());
}

uint32_t ByteReader::u32() {
  uint32_t hi = u16();
  return hi << 16 | u16();
}

uint64_t ByteReader::u64() {
  uint64_t hi = u32();
  return hi << 32 | u32();
}

std::string ByteReader::str() { return raw(u16()); }

std::string ByteReader::blob() { return raw(u32()); }

std::string ByteReader::raw(size_t n) {
  if (pos_ + n > in_.size()) throw Error(Err::Truncated, "raw(" + std::to_string(n) + ")");
  std::string out(in_.substr(pos_, n));
  pos_ += n;
  return out;
}

std::string to_hex(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char c : bytes) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 0xF]);
  }
  return out;
}

static int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(Err::Parse, "odd-length hex string");
  std::string out;
  out.reserve(hex.size() / 2);
  for (size_t i = 0; i < hex.size(); i += 2) {
    int hi = hex_nibble(hex[i]), lo = hex_nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw Error(Err::Parse, "bad hex digit");
    out.push_back(static_cast<char>(hi << 4 | lo));
  }
  return out;
}

std::string b64_encode(std::string_view bytes) {
  std::string out(sodium_base64_encoded_len(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(bytes.data()),
                    bytes.size(), sodium_base64_VARIANT_ORIGINAL);
  auto nul = out.find('\0');
  if (nul != std::string::npos) out.resize(nul);
  return out;
}

std::string b64_decode(std::string_view text) {
  std::string out(text.size(), '\0');
  size_t out_len = 0;
  if (sodium_base642bin(reinterpret_cast<unsigned char*>(out.data()), out.size(), text.data(),
                        text.size(), nullptr, &out_len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error(Err::Parse, "bad base64");
  }
  out.resize(out_len);
  return out;
}

std::string sha256(std::string_view bytes) {
  unsigned char out[crypto_hash_sha256_BYTES];
  crypto_hash_sha256(out, reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
  return std::string(reinterpret_cast<char*>(out), sizeof out);
}

std::string sha256_hex(std::string_view bytes) { return to_hex(sha256(bytes)); }

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t SplitMix64::next() {
  uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double SplitMix64::next_unit() {
  return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
}

uint64_t SplitMix64::below(uint64_t n) { return n == 0 ? 0 : next() % n; }

bool glob_match(std::string_view pattern, std::string_view text) {
  size_t p = 0, t = 0, star = std::string_view::npos, mark = 0;
  while (t < text.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
      ++p;
      ++t;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = t;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      t = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

const char* err_name(Err e) {
  switch (e) {
    case Err::Parse: return "ParseError";
    case Err::Validation: return "ValidationError";
    case Err::UnknownNode: return "UnknownNode";
    case Err::AlreadyExists: return "AlreadyExists";
    case Err::QueueMissing: return "QueueMissing";
    case Err::NonTransactionalQueue: return "NonTransactionalQueue";
    case Err::TransactionRequired: return "TransactionRequired";
    case Err::BodyTooLarge: return "BodyTooLarge";
    case Err::TxnAborted: return "TxnAborted";
    case Err::TxnNotActive: return "TxnNotActive";
    case Err::TxnFinished: return "TxnFinished";
    case Err::TooManyParticipants: return "TooManyParticipants";
    case Err::CorruptLog: return "CorruptLog";
    case Err::SqlSyntax: return "SyntaxError";
    case Err::UnsupportedConstruct: return "UnsupportedConstruct";
    case Err::NoSuchTable: return "NoSuchTable";
    case Err::TableExists: return "TableExists";
    case Err::DuplicateKey: return "DuplicateKey";
    case Err::TypeMismatch: return "TypeMismatch";
    case Err::NotPending: return "NotPending";
    case Err::NoSuchRecord: return "NoSuchRecord";
    case Err::NotQuiescent: return "NotQuiescent";
    case Err::MaxTimeExceeded: return "MaxTimeExceeded";
    case Err::TooLarge: return "TooLarge";
    case Err::UnknownRecipient: return "UnknownRecipient";
    case Err::DecryptFailure: return "DecryptFailure";
    case Err::BadMagic: return "BadMagic";
    case Err::BadVersion: return "BadVersion";
    case Err::Truncated: return "Truncated";
    case Err::BodyHashMismatch: return "BodyHashMismatch";
    case Err::Io: return "IoError";
    case Err::Refused: return "Refused";
  }
  return "Error";
}

}  // namespace qsync

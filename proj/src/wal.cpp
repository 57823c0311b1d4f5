// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/wal.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <vector>

#include "qsync/bytes.hpp"
#include "qsync/errors.hpp"

namespace qsync {

namespace {

bool valid_type(uint8_t t) {
  return t >= static_cast<uint8_t>(WalType::QueueCreate) &&
         t <= static_cast<uint8_t>(WalType::OutAcked);
}

// Reads the whole file and splits it into records. Returns the byte offset of
// the first torn (incomplete) record, or npos if the file ends cleanly.
size_t split_records(const std::string& data,
                     const std::function<void(WalType, const std::string&)>& visit) {
  size_t pos = 0;
  while (pos < data.size()) {
    if (data.size() - pos < 4) return pos;  // torn length prefix
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = len << 8 | static_cast<uint8_t>(data[pos + i]);
    if (len < 1) throw Error(Err::CorruptLog, "zero-length record");
    if (data.size() - pos - 4 < len) return pos;  // torn body
    uint8_t type = static_cast<uint8_t>(data[pos + 4]);
    if (!valid_type(type)) throw Error(Err::CorruptLog, "unknown record type");
    visit(static_cast<WalType>(type), data.substr(pos + 5, len - 1));
    pos += 4 + len;
  }
  return std::string::npos;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  return std::string{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

Wal::Wal(std::filesystem::path path) : path_(std::move(path)) {
  std::filesystem::create_directories(path_.parent_path());
}

Wal::~Wal() {
  if (fd_ >= 0) ::close(fd_);
}

void Wal::replay(const std::function<void(WalType, const std::string&)>& visit) {
  std::string data = read_file(path_);
  size_t torn_at = split_records(data, visit);
  int flags = O_WRONLY | O_CREAT | O_APPEND;
  if (torn_at != std::string::npos) {
    // Drop the torn tail, then append from there.
    std::filesystem::resize_file(path_, torn_at);
  }
  fd_ = ::open(path_.c_str(), flags, 0644);
  if (fd_ < 0) throw Error(Err::Io, "open " + path_.string() + ": " + std::strerror(errno));
}

void Wal::append(WalType type, const std::string& payload) {
  if (fd_ < 0) {
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd_ < 0) throw Error(Err::Io, "open " + path_.string() + ": " + std::strerror(errno));
  }
  ByteWriter w;
  w.u32(static_cast<uint32_t>(payload.size() + 1));
  w.u8(static_cast<uint8_t>(type));
  w.raw(payload.data(), payload.size());
  const std::string& rec = w.bytes();
  size_t off = 0;
  while (off < rec.size()) {
    ssize_t n = ::write(fd_, rec.data() + off, rec.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Err::Io, "write " + path_.string() + ": " + std::strerror(errno));
    }
    off += static_cast<size_t>(n);
  }
  ++appends_;
}

void Wal::scan(const std::filesystem::path& path,
               const std::function<void(WalType, const std::string&)>& visit) {
  split_records(read_file(path), visit);
}

}  // namespace qsync

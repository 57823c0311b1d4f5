// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsync {

enum class Err {
  // config / topology
  Parse,
  Validation,
  UnknownNode,
  // queues
  AlreadyExists,
  QueueMissing,
  NonTransactionalQueue,
  TransactionRequired,
  BodyTooLarge,
  // transactions
  TxnAborted,
  TxnNotActive,
  TxnFinished,
  TooManyParticipants,
  CorruptLog,
  // statement store
  SqlSyntax,
  UnsupportedConstruct,
  NoSuchTable,
  TableExists,
  DuplicateKey,
  TypeMismatch,
  NotPending,
  NoSuchRecord,
  // sync / simulator
  NotQuiescent,
  MaxTimeExceeded,
  // mail
  TooLarge,
  UnknownRecipient,
  DecryptFailure,
  // frame codec
  BadMagic,
  BadVersion,
  Truncated,
  BodyHashMismatch,
  // misc
  Io,
  Refused,
};

const char* err_name(Err e);

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const { return code_; }

 private:
  Err code_;
};

// Parse diagnostics carry the byte offset and what the parser wanted there.
class SqlError : public Error {
 public:
  SqlError(Err code, size_t position, const std::string& expected)
      : Error(code, "at offset " + std::to_string(position) + ", expected " + expected),
        position_(position),
        expected_(expected) {}

  size_t position() const { return position_; }
  const std::string& expected() const { return expected_; }

 private:
  size_t position_;
  std::string expected_;
};

// Thrown by armed crash points. Deliberately not an Error subclass so that
// engine-level catch(Error&) handlers cannot swallow a simulated crash.
struct CrashInjected {
  std::string point;
};

}  // namespace qsync

// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

namespace qsync::crashpoint {

// Named crash points sit at every durable-write boundary in the engine.
// In normal operation hit() is a no-op. The crash-sweep harness either
// records the sequence of hits, or arms one (name, occurrence) pair; the
// armed hit throws CrashInjected, which unwinds to the simulator and is
// treated as the process dying at that instant.

void hit(const std::string& node, const char* point);

void reset();                 // disarm + clear the recorded trace
void record_trace(bool on);   // start/stop recording hits
std::vector<std::string> trace();  // "node:point" in hit order

// Crash on the nth (1-based) occurrence of "node:point". One-shot.
void arm(const std::string& node_point, int nth);

}  // namespace qsync::crashpoint

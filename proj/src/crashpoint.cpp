// Copyright (c) 2026 The qsync Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "qsync/crashpoint.hpp"

#include <map>
#include <mutex>

#include "qsync/errors.hpp"

namespace qsync::crashpoint {

namespace {
std::mutex g_mu;
bool g_recording = false;
std::vector<std::string> g_trace;
std::string g_armed;
int g_armed_nth = 0;
std::map<std::string, int> g_counts;
}  // namespace

void hit(const std::string& node, const char* point) {
  std::lock_guard<std::mutex> lk(g_mu);
  if (!g_recording && g_armed.empty()) return;
  std::string key = node + ":" + point;
  if (g_recording) g_trace.push_back(key);
  if (!g_armed.empty() && key == g_armed) {
    if (++g_counts[key] == g_armed_nth) {
      g_armed.clear();  // one-shot
      throw CrashInjected{key};
    }
  }
}

void reset() {
  std::lock_guard<std::mutex> lk(g_mu);
  g_recording = false;
  g_trace.clear();
  g_armed.clear();
  g_armed_nth = 0;
  g_counts.clear();
}

void record_trace(bool on) {
  std::lock_guard<std::mutex> lk(g_mu);
  g_recording = on;
  if (on) g_trace.clear();
}

std::vector<std::string> trace() {
  std::lock_guard<std::mutex> lk(g_mu);
  return g_trace;
}

void arm(const std::string& node_point, int nth) {
  std::lock_guard<std::mutex> lk(g_mu);
  g_armed = node_point;
  g_armed_nth = nth;
  g_counts.clear();
}

}  // namespace qsync::crashpoint

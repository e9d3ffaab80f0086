// Copyright 2026 The torf-grid Authors
// SPDX-License-Identifier: Apache-2.0

#include "torf/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace torf {

namespace {

int env_thread_count() {
  if (const char* env = std::getenv("TORF_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> value{env_thread_count()};
  return value;
}

}  // namespace

int thread_count() { return thread_setting().load(); }

void set_thread_count(int n) { thread_setting().store(n < 1 ? 1 : n); }

}  // namespace torf

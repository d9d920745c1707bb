#include "cloth/threads.hpp"

namespace cloth {

namespace {

int default_thread_count() {
  if (const char* env = std::getenv("CLOTHSIM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<int>(n);
  }
  return 1;
}

int g_threads = default_thread_count();

}  // namespace

int thread_count() { return g_threads; }

void set_thread_count(int n) { g_threads = n >= 1 ? n : 1; }

}  // namespace cloth

#include "polband/parallel.hpp"

#include <cstdlib>
#include <string>

#include <omp.h>

#include "polband/model.hpp"

namespace polband {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) {
  if (n < 1) throw Error("thread count must be at least 1");
  omp_set_num_threads(n);
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("POLBAND_THREADS"); env && *env) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) {
      throw Error("POLBAND_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    set_thread_count(static_cast<int>(v));
  }
  return thread_count();
}

}  // namespace polband

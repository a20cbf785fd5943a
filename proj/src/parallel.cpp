#include "lobliq/parallel.hpp"

namespace lobliq {

namespace {
std::atomic<unsigned> g_workers{1};
}

void set_worker_threads(unsigned n) { g_workers = n == 0 ? 1u : n; }

unsigned worker_threads() { return g_workers; }

}  // namespace lobliq

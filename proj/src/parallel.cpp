#include "mconv/parallel.hpp"

namespace mconv::par {

namespace {
int g_threads = 1;
}

int threads() { return g_threads; }

void set_threads(int n) { g_threads = n < 1 ? 1 : n; }

}  // namespace mconv::par

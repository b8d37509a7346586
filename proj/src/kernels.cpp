#include "kgp/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace kgp::kernels {

#if defined(KGP_HAVE_AVX2_TU)
const KernelTable& avx2_table();
#endif

const KernelTable* avx2() {
#if defined(KGP_HAVE_AVX2_TU)
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("KGP_SIMD")) {
    if (std::string_view(env) == "scalar") return &scalar();
  }
  if (const KernelTable* t = avx2()) return t;
  return &scalar();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_relaxed); }

}  // namespace kgp::kernels

// Copyright 2026 The xfer Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <string>

#include "xfer/error.hpp"
#include "xfer/simd.hpp"

namespace xfer::simd {
namespace {

using DotFn = double (*)(const double*, const double*, std::size_t);
using AxpyFn = void (*)(double, const double*, double*, std::size_t);

struct Table {
  Isa isa;
  DotFn dot;
  AxpyFn axpy;
};

Table table_for(Isa isa) {
  switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2:
      return {Isa::avx2, &avx2::dot, &avx2::axpy};
#endif
#if defined(__aarch64__)
    case Isa::neon:
      return {Isa::neon, &neon::dot, &neon::axpy};
#endif
    default:
      return {Isa::scalar, &scalar::dot, &scalar::axpy};
  }
}

Isa detect() {
  if (const char* env = std::getenv("XFER_SIMD")) {
    const std::string want(env);
    if (want == "scalar") return Isa::scalar;
    if (want == "avx2" && isa_supported(Isa::avx2)) return Isa::avx2;
    if (want == "neon" && isa_supported(Isa::neon)) return Isa::neon;
  }
  if (isa_supported(Isa::avx2)) return Isa::avx2;
  if (isa_supported(Isa::neon)) return Isa::neon;
  return Isa::scalar;
}

Table& active() {
  static Table t = table_for(detect());
  return t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
    default:
      return "scalar";
  }
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return active().isa; }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ValidationError("SIMD variant '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
  }
  active() = table_for(isa);
}

double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }

void axpy(double alpha, const double* x, double* y, std::size_t n) { active().axpy(alpha, x, y, n); }

}  // namespace xfer::simd

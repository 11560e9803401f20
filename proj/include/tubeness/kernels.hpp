#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops used by the filtering pipeline. Each kernel has a
// scalar reference implementation and, where the hardware supports it, an
// AVX2/FMA or NEON variant. The active variant is chosen once at startup from
// CPU capabilities; tests exercise every compiled-in variant against the
// scalar reference.
namespace tubeness::kern {

// dst[i] = sum_k taps[k] * src[i + k], i in [0, n). The caller supplies src
// with at least n + taps_len - 1 valid samples (padding is the caller's job).
using CorrelateFn = void (*)(const double* src, std::size_t n,
                             const double* taps, std::size_t taps_len,
                             double* dst);

// dst[i] = max(dst[i], src[i])
using MaxInplaceFn = void (*)(double* dst, const double* src, std::size_t n);

// dst[i] *= a
using ScaleInplaceFn = void (*)(double* dst, std::size_t n, double a);

enum class Isa { scalar, avx2, neon };

std::string isa_name(Isa isa);

// Best ISA the running CPU supports.
Isa detect();

// Currently active ISA (set at startup to detect()).
Isa active();

// Force a specific ISA. Throws std::runtime_error if the variant was not
// compiled in or the CPU lacks support.
void select(Isa isa);

// Active entry points (function pointers swapped by select()).
extern CorrelateFn correlate;
extern MaxInplaceFn max_inplace;
extern ScaleInplaceFn scale_inplace;

// Scalar reference kernels, always available; equivalence tests compare the
// vector variants against these.
void correlate_scalar(const double* src, std::size_t n, const double* taps,
                      std::size_t taps_len, double* dst);
void max_inplace_scalar(double* dst, const double* src, std::size_t n);
void scale_inplace_scalar(double* dst, std::size_t n, double a);

}  // namespace tubeness::kern

#include "tubeness/kernels.hpp"

#include <stdexcept>

#if defined(__x86_64__) || defined(_M_X64)
#define TUBENESS_X86 1
#include <immintrin.h>
#else
#define TUBENESS_X86 0
#endif

#if defined(__aarch64__) || defined(__ARM_NEON)
#define TUBENESS_NEON 1
#include <arm_neon.h>
#else
#define TUBENESS_NEON 0
#endif

namespace tubeness::kern {

// ---------------------------------------------------------------- scalar

void correlate_scalar(const double* src, std::size_t n, const double* taps,
                      std::size_t taps_len, double* dst) {
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < taps_len; ++k) acc += taps[k] * src[i + k];
    dst[i] = acc;
  }
}

void max_inplace_scalar(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (src[i] > dst[i]) dst[i] = src[i];
}

void scale_inplace_scalar(double* dst, std::size_t n, double a) {
  for (std::size_t i = 0; i < n; ++i) dst[i] *= a;
}

// ---------------------------------------------------------------- AVX2/FMA

#if TUBENESS_X86

__attribute__((target("avx2,fma"))) static void correlate_avx2(
    const double* src, std::size_t n, const double* taps,
    std::size_t taps_len, double* dst) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t k = 0; k < taps_len; ++k) {
      __m256d t = _mm256_set1_pd(taps[k]);
      __m256d v = _mm256_loadu_pd(src + i + k);
      acc = _mm256_fmadd_pd(t, v, acc);
    }
    _mm256_storeu_pd(dst + i, acc);
  }
  if (i < n) correlate_scalar(src + i, n - i, taps, taps_len, dst + i);
}

__attribute__((target("avx2"))) static void max_inplace_avx2(
    double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d a = _mm256_loadu_pd(dst + i);
    __m256d b = _mm256_loadu_pd(src + i);
    _mm256_storeu_pd(dst + i, _mm256_max_pd(a, b));
  }
  for (; i < n; ++i)
    if (src[i] > dst[i]) dst[i] = src[i];
}

__attribute__((target("avx2"))) static void scale_inplace_avx2(double* dst,
                                                               std::size_t n,
                                                               double a) {
  __m256d f = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(dst + i), f));
  for (; i < n; ++i) dst[i] *= a;
}

static bool cpu_has_avx2_fma() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

#endif  // TUBENESS_X86

// ---------------------------------------------------------------- NEON

#if TUBENESS_NEON

static void correlate_neon(const double* src, std::size_t n,
                           const double* taps, std::size_t taps_len,
                           double* dst) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t k = 0; k < taps_len; ++k) {
      float64x2_t v = vld1q_f64(src + i + k);
      acc = vfmaq_n_f64(acc, v, taps[k]);
    }
    vst1q_f64(dst + i, acc);
  }
  if (i < n) correlate_scalar(src + i, n - i, taps, taps_len, dst + i);
}

static void max_inplace_neon(double* dst, const double* src, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmaxq_f64(vld1q_f64(dst + i), vld1q_f64(src + i)));
  for (; i < n; ++i)
    if (src[i] > dst[i]) dst[i] = src[i];
}

static void scale_inplace_neon(double* dst, std::size_t n, double a) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(dst + i, vmulq_n_f64(vld1q_f64(dst + i), a));
  for (; i < n; ++i) dst[i] *= a;
}

#endif  // TUBENESS_NEON

// ---------------------------------------------------------------- dispatch

std::string isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "?";
}

Isa detect() {
#if TUBENESS_X86
  if (cpu_has_avx2_fma()) return Isa::avx2;
#endif
#if TUBENESS_NEON
  return Isa::neon;
#endif
  return Isa::scalar;
}

CorrelateFn correlate = correlate_scalar;
MaxInplaceFn max_inplace = max_inplace_scalar;
ScaleInplaceFn scale_inplace = scale_inplace_scalar;

static Isa g_active = Isa::scalar;

void select(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      correlate = correlate_scalar;
      max_inplace = max_inplace_scalar;
      scale_inplace = scale_inplace_scalar;
      break;
    case Isa::avx2:
#if TUBENESS_X86
      if (!cpu_has_avx2_fma())
        throw std::runtime_error("kern: CPU lacks AVX2/FMA");
      correlate = correlate_avx2;
      max_inplace = max_inplace_avx2;
      scale_inplace = scale_inplace_avx2;
      break;
#else
      throw std::runtime_error("kern: AVX2 variant not compiled in");
#endif
    case Isa::neon:
#if TUBENESS_NEON
      correlate = correlate_neon;
      max_inplace = max_inplace_neon;
      scale_inplace = scale_inplace_neon;
      break;
#else
      throw std::runtime_error("kern: NEON variant not compiled in");
#endif
  }
  g_active = isa;
}

Isa active() { return g_active; }

namespace {
struct InitDispatch {
  InitDispatch() { select(detect()); }
};
InitDispatch init_dispatch;
}  // namespace

}  // namespace tubeness::kern

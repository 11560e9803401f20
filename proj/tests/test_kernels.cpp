#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tubeness/kernels.hpp"

using namespace tubeness;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

std::vector<kern::Isa> available_isas() {
  std::vector<kern::Isa> isas{kern::Isa::scalar};
  if (kern::detect() != kern::Isa::scalar) isas.push_back(kern::detect());
  return isas;
}

struct IsaGuard {
  kern::Isa saved = kern::active();
  ~IsaGuard() { kern::select(saved); }
};

}  // namespace

TEST_CASE("correlate scalar matches brute-force definition") {
  auto src = random_vector(67, 11);
  auto taps = random_vector(9, 12);
  std::size_t n = src.size() - taps.size() + 1;
  std::vector<double> out(n);
  kern::correlate_scalar(src.data(), n, taps.data(), taps.size(), out.data());
  for (std::size_t i = 0; i < n; ++i) {
    double expect = 0.0;
    for (std::size_t k = 0; k < taps.size(); ++k) expect += taps[k] * src[i + k];
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-14));
  }
}

TEST_CASE("vector variants agree with the scalar reference") {
  IsaGuard guard;
  for (kern::Isa isa : available_isas()) {
    kern::select(isa);
    CAPTURE(kern::isa_name(isa));

    // odd lengths exercise the remainder path
    for (std::size_t n : {1u, 5u, 64u, 129u}) {
      for (std::size_t taps_len : {1u, 3u, 17u, 33u}) {
        auto src = random_vector(n + taps_len - 1, 100 * n + taps_len);
        auto taps = random_vector(taps_len, 7 * taps_len + 1);
        std::vector<double> got(n), want(n);
        kern::correlate(src.data(), n, taps.data(), taps_len, got.data());
        kern::correlate_scalar(src.data(), n, taps.data(), taps_len,
                               want.data());
        for (std::size_t i = 0; i < n; ++i)
          CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-13));
      }
    }

    auto a = random_vector(257, 21);
    auto b = random_vector(257, 22);
    auto a2 = a;
    kern::max_inplace(a.data(), b.data(), a.size());
    kern::max_inplace_scalar(a2.data(), b.data(), a2.size());
    CHECK(a == a2);  // max is exact in every variant

    auto c = random_vector(255, 23);
    auto c2 = c;
    kern::scale_inplace(c.data(), c.size(), 3.25);
    kern::scale_inplace_scalar(c2.data(), c2.size(), 3.25);
    CHECK(c == c2);  // multiply by the same factor is exact per lane
  }
}

TEST_CASE("dispatch selects a runtime-supported ISA") {
  IsaGuard guard;
  kern::Isa best = kern::detect();
  kern::select(best);
  CHECK(kern::active() == best);
  kern::select(kern::Isa::scalar);
  CHECK(kern::active() == kern::Isa::scalar);
}

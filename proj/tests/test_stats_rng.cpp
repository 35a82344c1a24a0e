#include <catch2/catch.hpp>

#include "nmjump/rng.hpp"
#include "nmjump/stats.hpp"

using namespace nmjump;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  // reference vectors from the Random123 test suite
  auto out = PhiloxStream::round10({0u, 0u, 0u, 0u}, {0u, 0u});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  out = PhiloxStream::round10({0xffffffffu, 0xffffffffu, 0xffffffffu,
                               0xffffffffu},
                              {0xffffffffu, 0xffffffffu});
  CHECK(out[0] == 0x408f276du);
  CHECK(out[1] == 0x41c83b0eu);
  CHECK(out[2] == 0xa20bc7c6u);
  CHECK(out[3] == 0x6d5451fdu);

  out = PhiloxStream::round10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu,
                               0x03707344u},
                              {0xa4093822u, 0x299f31d0u});
  CHECK(out[0] == 0xd16cfe09u);
  CHECK(out[1] == 0x94fdccebu);
  CHECK(out[2] == 0x5001e420u);
  CHECK(out[3] == 0x24126ea1u);
}

TEST_CASE("PhiloxStream is deterministic and stream-separated") {
  PhiloxStream a(12345, 7);
  PhiloxStream b(12345, 7);
  PhiloxStream c(12345, 8);
  PhiloxStream d(54321, 7);
  bool all_equal = true, stream_differs = false, seed_differs = false;
  for (int i = 0; i < 256; ++i) {
    const auto va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    stream_differs = stream_differs || va != c.next_u64();
    seed_differs = seed_differs || va != d.next_u64();
  }
  CHECK(all_equal);
  CHECK(stream_differs);
  CHECK(seed_differs);
}

TEST_CASE("PhiloxStream uniforms live strictly inside (0,1) and look uniform") {
  PhiloxStream rng(987654321, 0);
  std::vector<double> u(20000);
  for (double& x : u) {
    x = rng.uniform();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
  }
  const KsResult ks = ks_test_uniform(u);
  CHECK(ks.p_value > 1e-4);
  double mean = 0.0;
  for (double x : u) mean += x;
  mean /= static_cast<double>(u.size());
  CHECK(mean == Approx(0.5).margin(0.01));
}

TEST_CASE("kolmogorov_sf matches reference values") {
  // frozen from the standard Kolmogorov limiting distribution
  CHECK(kolmogorov_sf(0.5) == Approx(0.9639452437).margin(1e-9));
  CHECK(kolmogorov_sf(1.0) == Approx(0.2699996717).margin(1e-9));
  CHECK(kolmogorov_sf(1.3581) == Approx(0.0499996304).margin(1e-9));
  CHECK(kolmogorov_sf(1.6276) == Approx(0.0100015373).margin(1e-9));
  // continuity across the series switch at x = 1
  CHECK(kolmogorov_sf(0.999999) == Approx(kolmogorov_sf(1.000001)).margin(1e-9));
}

TEST_CASE("ks_test rejects a clearly shifted distribution") {
  PhiloxStream rng(13, 0);
  std::vector<double> samples(4000);
  for (double& x : samples) x = 0.5 * rng.uniform();  // actually U(0, 0.5)
  const KsResult ks =
      ks_test(samples, [](double s) { return std::clamp(s, 0.0, 1.0); });
  CHECK(ks.p_value < 1e-10);
  CHECK(ks.statistic > 0.4);
}

TEST_CASE("binomial_stderr") {
  CHECK(binomial_stderr(0.5, 10000) == Approx(0.005).margin(1e-12));
  CHECK(binomial_stderr(0.0, 100) == 0.0);
}

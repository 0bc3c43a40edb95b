#include <doctest.h>

#include "simloop/numfmt.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace simloop;

TEST_CASE("roundtrip formatting is exact and short") {
  CHECK(format_roundtrip(0.1) == "0.1");
  CHECK(format_roundtrip(20.0) == "20");
  CHECK(format_roundtrip(-3.5) == "-3.5");
  CHECK(format_roundtrip(100.0 / 3.6) == "27.77777777777778");

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-1e6, 1e6);
  for (int i = 0; i < 2000; ++i) {
    const double v = d(rng);
    CHECK(parse_double(format_roundtrip(v)) == v);
  }
}

TEST_CASE("fixed formatting rounds half away from zero on the decimal text") {
  CHECK(format_fixed(33.333333, 2) == "33.33");
  CHECK(format_fixed(5.05, 1) == "5.1");
  CHECK(format_fixed(-5.05, 1) == "-5.1");
  CHECK(format_fixed(8.45, 1) == "8.5");
  CHECK(format_fixed(2.0, 2) == "2.00");
  CHECK(format_fixed(0.0049, 2) == "0.00");
  CHECK(format_fixed(9.995, 2) == "10.00");
  CHECK(format_fixed(7.0, 0) == "7");
}

TEST_CASE("strict parsing") {
  CHECK(parse_double("1.5") == 1.5);
  CHECK(parse_double("-2e3") == -2000.0);
  CHECK_THROWS_AS(parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_double(""), std::invalid_argument);
  CHECK_THROWS_AS(parse_double("abc"), std::invalid_argument);
  CHECK(parse_int("42") == 42);
  CHECK(parse_int("-7") == -7);
  CHECK_THROWS_AS(parse_int("4.2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_int("12 "), std::invalid_argument);
}

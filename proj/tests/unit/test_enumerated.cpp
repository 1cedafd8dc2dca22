#include <vector>

#include "doctest.h"
#include "sedd/enumerated.hpp"
#include "sedd/errors.hpp"
#include "sedd/matrix.hpp"

using namespace sedd;

TEST_CASE("pow_checked computes and gates") {
  CHECK(pow_checked(2, 10, kMaxEnumStates) == 1024);
  CHECK(pow_checked(5, 1, kMaxEnumStates) == 5);
  CHECK_THROWS_AS(pow_checked(2, 21, size_t{1} << 20), CapacityError);
  CHECK_THROWS_AS(pow_checked(10, 50, kMaxEnumStates), CapacityError);
}

TEST_CASE("sequence encoding is mixed radix, position 0 most significant") {
  std::vector<int> seq{1, 0, 2};
  CHECK(encode_sequence(seq, 3) == 1 * 9 + 0 * 3 + 2);

  std::vector<int> out(3);
  decode_sequence(11, 3, out);
  CHECK(out == std::vector<int>{1, 0, 2});
}

TEST_CASE("encode/decode roundtrip over a whole space") {
  const int S = 4, d = 3;
  std::vector<int> seq(static_cast<size_t>(d));
  for (size_t i = 0; i < pow_checked(S, d, kMaxEnumStates); ++i) {
    decode_sequence(i, S, seq);
    CHECK(encode_sequence(seq, S) == i);
  }
}

TEST_CASE("encode validates token range") {
  std::vector<int> bad{0, 3};
  CHECK_THROWS_AS(encode_sequence(bad, 3), ArgumentError);
  std::vector<int> neg{-1, 0};
  CHECK_THROWS_AS(encode_sequence(neg, 3), ArgumentError);
}

TEST_CASE("EnumeratedDist validate and normalize") {
  EnumeratedDist p(2, 2);
  p.p = {0.2, 0.3, 0.1, 0.4};
  p.validate();

  p.p = {0.2, 0.3, 0.1, 0.3};
  CHECK_THROWS_AS(p.validate(), ArgumentError);
  p.normalize();
  p.validate();

  p.p = {1.0, -0.5, 0.3, 0.2};
  CHECK_THROWS_AS(p.validate(), ArgumentError);

  EnumeratedDist z(1, 2);
  z.p = {0.0, 0.0};
  CHECK_THROWS_AS(z.normalize(), ArgumentError);
}

TEST_CASE("matmul and one_norm") {
  Matrix a(2, 3), b(3, 2);
  // a = [1 2 0; 0 1 -1], b = [1 0; 2 1; 3 2]
  a(0, 0) = 1; a(0, 1) = 2; a(1, 1) = 1; a(1, 2) = -1;
  b(0, 0) = 1; b(1, 0) = 2; b(1, 1) = 1; b(2, 0) = 3; b(2, 1) = 2;
  Matrix c = matmul(a, b);
  CHECK(c(0, 0) == doctest::Approx(5));
  CHECK(c(0, 1) == doctest::Approx(2));
  CHECK(c(1, 0) == doctest::Approx(-1));
  CHECK(c(1, 1) == doctest::Approx(-1));

  CHECK(one_norm(b) == doctest::Approx(6.0));
  Matrix bad(2, 2);
  CHECK_THROWS_AS(matmul(a, bad), ArgumentError);
}

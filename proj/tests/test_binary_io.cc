#include <bolt/binary_io.h>
#include <bolt/error.h>

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace bolt;

TEST_CASE("integers are little-endian") {
  std::ostringstream out;
  io::writeU32(out, 0x01020304u);
  io::writeU64(out, 0x0102030405060708ull);
  const std::string b = out.str();
  REQUIRE(b.size() == 12);
  CHECK(static_cast<unsigned char>(b[0]) == 0x04);
  CHECK(static_cast<unsigned char>(b[3]) == 0x01);
  CHECK(static_cast<unsigned char>(b[4]) == 0x08);
  CHECK(static_cast<unsigned char>(b[11]) == 0x01);
}

TEST_CASE("doubles round-trip bit-exactly") {
  const double vals[] = {0.0, -0.0, 1.0 / 3.0, -1e-300, std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::denorm_min()};
  std::stringstream s;
  for (double v : vals) io::writeF64(s, v);
  for (double v : vals) {
    const double r = io::readF64(s);
    CHECK(std::signbit(r) == std::signbit(v));
    CHECK((r == v));
  }
}

TEST_CASE("truncated input and wrong magic raise FormatError") {
  std::stringstream s("ab");
  CHECK_THROWS_AS(io::readU32(s), FormatError);
  std::stringstream m("BLTX");
  CHECK_THROWS_AS(io::expectMagic(m, "BLTI"), FormatError);
}

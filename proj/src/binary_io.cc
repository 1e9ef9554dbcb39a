#include <bolt/binary_io.h>

#include <bolt/error.h>

#include <array>
#include <bit>
#include <string>

namespace bolt::io {

namespace {

template <typename T>
void writeLe(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes;
  for (std::size_t i = 0; i < sizeof(T); i++) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T readLe(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) {
    throw FormatError("unexpected end of binary stream");
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); i++) {
    v |= static_cast<T>(bytes[i]) << (8 * i);
  }
  return v;
}

}  // namespace

void writeU8(std::ostream& out, uint8_t v) { writeLe(out, v); }
void writeU32(std::ostream& out, uint32_t v) { writeLe(out, v); }
void writeU64(std::ostream& out, uint64_t v) { writeLe(out, v); }
void writeF64(std::ostream& out, double v) {
  writeLe(out, std::bit_cast<uint64_t>(v));
}

void writeU32s(std::ostream& out, std::span<const uint32_t> vs) {
  for (uint32_t v : vs) {
    writeU32(out, v);
  }
}

void writeF64s(std::ostream& out, std::span<const double> vs) {
  for (double v : vs) {
    writeF64(out, v);
  }
}

void writeMagic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

uint8_t readU8(std::istream& in) { return readLe<uint8_t>(in); }
uint32_t readU32(std::istream& in) { return readLe<uint32_t>(in); }
uint64_t readU64(std::istream& in) { return readLe<uint64_t>(in); }
double readF64(std::istream& in) {
  return std::bit_cast<double>(readLe<uint64_t>(in));
}

void readU32s(std::istream& in, std::span<uint32_t> out) {
  for (auto& v : out) {
    v = readU32(in);
  }
}

void readF64s(std::istream& in, std::span<double> out) {
  for (auto& v : out) {
    v = readF64(in);
  }
}

void expectMagic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) {
    throw FormatError("bad magic: expected \"" + std::string(magic) + "\"");
  }
}

}  // namespace bolt::io

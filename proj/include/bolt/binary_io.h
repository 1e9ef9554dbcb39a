#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string_view>

namespace bolt::io {

// Fixed-width little-endian encoding, independent of host byte order.
// Readers throw FormatError on truncated input.

void writeU8(std::ostream& out, uint8_t v);
void writeU32(std::ostream& out, uint32_t v);
void writeU64(std::ostream& out, uint64_t v);
void writeF64(std::ostream& out, double v);
void writeU32s(std::ostream& out, std::span<const uint32_t> vs);
void writeF64s(std::ostream& out, std::span<const double> vs);
void writeMagic(std::ostream& out, std::string_view magic);

uint8_t readU8(std::istream& in);
uint32_t readU32(std::istream& in);
uint64_t readU64(std::istream& in);
double readF64(std::istream& in);
void readU32s(std::istream& in, std::span<uint32_t> out);
void readF64s(std::istream& in, std::span<double> out);
// Throws FormatError unless the next bytes equal `magic`.
void expectMagic(std::istream& in, std::string_view magic);

}  // namespace bolt::io

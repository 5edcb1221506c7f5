#include "mpignite/byte_io.hpp"

#include <limits>

namespace mpignite {

void ByteWriter::blob(std::span<const std::uint8_t> data) {
  if (data.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kEncodeUnsupported, "byte sequence longer than 2^32-1");
  }
  u32(static_cast<std::uint32_t>(data.size()));
  raw(data);
}

void ByteWriter::str(std::string_view s) {
  blob({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > remaining()) {
    throw Error(code_, "truncated input: need " + std::to_string(n) +
                           " bytes, have " + std::to_string(remaining()));
  }
  auto out = data_.subspan(pos_, n);
  pos_ += n;
  return out;
}

Bytes ByteReader::blob() {
  const auto n = u32();
  const auto b = take(n);
  return {b.begin(), b.end()};
}

std::string ByteReader::str() {
  const auto n = u32();
  const auto b = take(n);
  return {reinterpret_cast<const char*>(b.data()), b.size()};
}

void ByteReader::expect_end(std::string_view what) const {
  if (!at_end()) {
    throw Error(code_, std::string(what) + ": " + std::to_string(remaining()) +
                           " trailing bytes");
  }
}

}  // namespace mpignite

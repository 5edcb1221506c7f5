#pragma once

// Canonical payload encoding. Every payload is one kind byte followed by a
// kind-specific little-endian body; see PROTOCOL.md for the byte layout.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mpignite/byte_io.hpp"

namespace mpignite {

enum class Kind : std::uint8_t {
  kUnit = 0x00,
  kI32 = 0x01,
  kI64 = 0x02,
  kF64 = 0x03,
  kBool = 0x04,
  kString = 0x05,
  kBytes = 0x06,
  kI32Array = 0x81,
  kI64Array = 0x82,
  kF64Array = 0x83,
  kBoolArray = 0x84,
  kStringArray = 0x85,
  kBytesArray = 0x86,
};

inline constexpr std::uint8_t kArrayFlag = 0x80;

std::optional<Kind> kind_from_byte(std::uint8_t b);
std::string_view to_string(Kind kind);
bool is_array(Kind kind);
// Element kind of an array kind, or the array kind of a scalar kind.
Kind element_kind(Kind array_kind);
std::optional<Kind> array_kind_of(Kind element);

struct Unit {
  bool operator==(const Unit&) const = default;
};

using Value = std::variant<Unit, std::int32_t, std::int64_t, double, bool,
                           std::string, Bytes, std::vector<std::int32_t>,
                           std::vector<std::int64_t>, std::vector<double>,
                           std::vector<bool>, std::vector<std::string>,
                           std::vector<Bytes>>;

Kind kind_of(const Value& v);

// Encoded payload: byte 0 is the kind tag.
struct Payload {
  Bytes bytes;

  Kind kind() const;
  bool operator==(const Payload&) const = default;
};

Payload encode(const Value& v);
Value decode(const Payload& p, Kind expected);

// Validating variant of `Payload{bytes}` for bytes that arrived off the wire.
Payload payload_from_bytes(Bytes bytes);

// Human-readable rendering used by the CLI and logs.
std::string to_display(const Value& v);

template <class T>
struct KindOf;
template <> struct KindOf<Unit> { static constexpr Kind value = Kind::kUnit; };
template <> struct KindOf<std::int32_t> { static constexpr Kind value = Kind::kI32; };
template <> struct KindOf<std::int64_t> { static constexpr Kind value = Kind::kI64; };
template <> struct KindOf<double> { static constexpr Kind value = Kind::kF64; };
template <> struct KindOf<bool> { static constexpr Kind value = Kind::kBool; };
template <> struct KindOf<std::string> { static constexpr Kind value = Kind::kString; };
template <> struct KindOf<Bytes> { static constexpr Kind value = Kind::kBytes; };
template <> struct KindOf<std::vector<std::int32_t>> { static constexpr Kind value = Kind::kI32Array; };
template <> struct KindOf<std::vector<std::int64_t>> { static constexpr Kind value = Kind::kI64Array; };
template <> struct KindOf<std::vector<double>> { static constexpr Kind value = Kind::kF64Array; };
template <> struct KindOf<std::vector<bool>> { static constexpr Kind value = Kind::kBoolArray; };
template <> struct KindOf<std::vector<std::string>> { static constexpr Kind value = Kind::kStringArray; };
template <> struct KindOf<std::vector<Bytes>> { static constexpr Kind value = Kind::kBytesArray; };

template <class T>
concept Encodable = requires { KindOf<T>::value; };

template <Encodable T>
Payload encode_as(const T& v) {
  return encode(Value{std::in_place_type<T>, v});
}

template <Encodable T>
T decode_as(const Payload& p) {
  return std::get<T>(decode(p, KindOf<T>::value));
}

}  // namespace mpignite

#include "mpignite/codec.hpp"

#include <limits>
#include <sstream>

namespace mpignite {

namespace {

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) ||
        (len == 4 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

void check_count(std::size_t n) {
  if (n > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kEncodeUnsupported, "sequence longer than 2^32-1 elements");
  }
}

void put_string(ByteWriter& w, const std::string& s) {
  if (!valid_utf8(s)) {
    throw Error(ErrorCode::kEncodeUnsupported, "string is not valid UTF-8");
  }
  w.str(s);
}

std::string get_string(ByteReader& r) {
  auto s = r.str();
  if (!valid_utf8(s)) {
    throw Error(ErrorCode::kMalformedPayload, "string payload is not valid UTF-8");
  }
  return s;
}

bool get_bool(ByteReader& r) {
  const auto b = r.u8();
  if (b > 1) {
    throw Error(ErrorCode::kMalformedPayload,
                "bool byte must be 0 or 1, got " + std::to_string(b));
  }
  return b == 1;
}

template <class T, class Put>
void put_array(ByteWriter& w, const std::vector<T>& xs, Put put) {
  check_count(xs.size());
  w.u32(static_cast<std::uint32_t>(xs.size()));
  for (const auto& x : xs) put(w, x);
}

template <class T, class Get>
std::vector<T> get_array(ByteReader& r, std::size_t min_elem_size, Get get) {
  const auto n = r.u32();
  // Reject impossible counts before reserving.
  if (static_cast<std::uint64_t>(n) * min_elem_size > r.remaining()) {
    throw Error(ErrorCode::kMalformedPayload,
                "array count " + std::to_string(n) + " exceeds payload size");
  }
  std::vector<T> out;
  out.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(get(r));
  return out;
}

}  // namespace

std::optional<Kind> kind_from_byte(std::uint8_t b) {
  switch (b) {
    case 0x00: case 0x01: case 0x02: case 0x03: case 0x04: case 0x05: case 0x06:
    case 0x81: case 0x82: case 0x83: case 0x84: case 0x85: case 0x86:
      return static_cast<Kind>(b);
    default:
      return std::nullopt;
  }
}

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kUnit: return "unit";
    case Kind::kI32: return "i32";
    case Kind::kI64: return "i64";
    case Kind::kF64: return "f64";
    case Kind::kBool: return "bool";
    case Kind::kString: return "string";
    case Kind::kBytes: return "bytes";
    case Kind::kI32Array: return "array<i32>";
    case Kind::kI64Array: return "array<i64>";
    case Kind::kF64Array: return "array<f64>";
    case Kind::kBoolArray: return "array<bool>";
    case Kind::kStringArray: return "array<string>";
    case Kind::kBytesArray: return "array<bytes>";
  }
  return "?";
}

bool is_array(Kind kind) {
  return (static_cast<std::uint8_t>(kind) & kArrayFlag) != 0;
}

Kind element_kind(Kind array_kind) {
  return static_cast<Kind>(static_cast<std::uint8_t>(array_kind) & ~kArrayFlag);
}

std::optional<Kind> array_kind_of(Kind element) {
  if (element == Kind::kUnit || is_array(element)) return std::nullopt;
  return static_cast<Kind>(static_cast<std::uint8_t>(element) | kArrayFlag);
}

Kind kind_of(const Value& v) {
  return std::visit(
      [](const auto& x) { return KindOf<std::decay_t<decltype(x)>>::value; }, v);
}

Kind Payload::kind() const {
  if (bytes.empty()) {
    throw Error(ErrorCode::kMalformedPayload, "empty payload has no kind byte");
  }
  const auto k = kind_from_byte(bytes[0]);
  if (!k) {
    throw Error(ErrorCode::kMalformedPayload,
                "unknown kind byte " + std::to_string(bytes[0]));
  }
  return *k;
}

Payload payload_from_bytes(Bytes bytes) {
  Payload p{std::move(bytes)};
  (void)p.kind();
  return p;
}

Payload encode(const Value& v) {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(kind_of(v)));
  std::visit(
      [&w](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Unit>) {
        } else if constexpr (std::is_same_v<T, std::int32_t>) {
          w.i32(x);
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          w.i64(x);
        } else if constexpr (std::is_same_v<T, double>) {
          w.f64(x);
        } else if constexpr (std::is_same_v<T, bool>) {
          w.u8(x ? 1 : 0);
        } else if constexpr (std::is_same_v<T, std::string>) {
          put_string(w, x);
        } else if constexpr (std::is_same_v<T, Bytes>) {
          w.blob(x);
        } else if constexpr (std::is_same_v<T, std::vector<std::int32_t>>) {
          put_array(w, x, [](ByteWriter& o, std::int32_t e) { o.i32(e); });
        } else if constexpr (std::is_same_v<T, std::vector<std::int64_t>>) {
          put_array(w, x, [](ByteWriter& o, std::int64_t e) { o.i64(e); });
        } else if constexpr (std::is_same_v<T, std::vector<double>>) {
          put_array(w, x, [](ByteWriter& o, double e) { o.f64(e); });
        } else if constexpr (std::is_same_v<T, std::vector<bool>>) {
          put_array(w, x, [](ByteWriter& o, bool e) { o.u8(e ? 1 : 0); });
        } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
          put_array(w, x, [](ByteWriter& o, const std::string& e) { put_string(o, e); });
        } else {
          static_assert(std::is_same_v<T, std::vector<Bytes>>);
          put_array(w, x, [](ByteWriter& o, const Bytes& e) { o.blob(e); });
        }
      },
      v);
  return Payload{std::move(w).take()};
}

Value decode(const Payload& p, Kind expected) {
  const Kind actual = p.kind();
  if (actual != expected) {
    throw Error(ErrorCode::kTypeMismatch,
                "payload holds " + std::string(to_string(actual)) + ", expected " +
                    std::string(to_string(expected)));
  }
  ByteReader r(std::span(p.bytes).subspan(1), ErrorCode::kMalformedPayload);
  Value out;
  switch (actual) {
    case Kind::kUnit: out = Unit{}; break;
    case Kind::kI32: out = r.i32(); break;
    case Kind::kI64: out = r.i64(); break;
    case Kind::kF64: out = r.f64(); break;
    case Kind::kBool: out = get_bool(r); break;
    case Kind::kString: out = get_string(r); break;
    case Kind::kBytes: out = r.blob(); break;
    case Kind::kI32Array:
      out = get_array<std::int32_t>(r, 4, [](ByteReader& in) { return in.i32(); });
      break;
    case Kind::kI64Array:
      out = get_array<std::int64_t>(r, 8, [](ByteReader& in) { return in.i64(); });
      break;
    case Kind::kF64Array:
      out = get_array<double>(r, 8, [](ByteReader& in) { return in.f64(); });
      break;
    case Kind::kBoolArray: {
      std::vector<bool> xs;
      for (bool b : get_array<char>(r, 1, [](ByteReader& in) -> char { return get_bool(in); })) {
        xs.push_back(b);
      }
      out = std::move(xs);
      break;
    }
    case Kind::kStringArray:
      out = get_array<std::string>(r, 4, [](ByteReader& in) { return get_string(in); });
      break;
    case Kind::kBytesArray:
      out = get_array<Bytes>(r, 4, [](ByteReader& in) { return in.blob(); });
      break;
  }
  r.expect_end("payload");
  return out;
}

namespace {

void display_scalar(std::ostream& os, const auto& x) {
  using T = std::decay_t<decltype(x)>;
  if constexpr (std::is_same_v<T, bool>) {
    os << (x ? "true" : "false");
  } else if constexpr (std::is_same_v<T, std::string>) {
    os << '"' << x << '"';
  } else if constexpr (std::is_same_v<T, Bytes>) {
    os << "<" << x.size() << " bytes>";
  } else {
    os << x;
  }
}

}  // namespace

std::string to_display(const Value& v) {
  std::ostringstream os;
  std::visit(
      [&os](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Unit>) {
          os << "()";
        } else if constexpr (requires { x.begin(); } && !std::is_same_v<T, std::string> &&
                             !std::is_same_v<T, Bytes>) {
          os << '[';
          bool first = true;
          for (const auto& e : x) {
            if (!first) os << ", ";
            first = false;
            if constexpr (std::is_same_v<T, std::vector<bool>>) {
              display_scalar(os, static_cast<bool>(e));
            } else {
              display_scalar(os, e);
            }
          }
          os << ']';
        } else {
          display_scalar(os, x);
        }
      },
      v);
  return os.str();
}

}  // namespace mpignite

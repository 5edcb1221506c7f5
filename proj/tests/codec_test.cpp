#include <gtest/gtest.h>

#include "generators.hpp"
#include "mpignite/codec.hpp"
#include "oracles.hpp"

using namespace mpignite;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an mpignite::Error";
  return ErrorCode::kUserError;
}

}  // namespace

TEST(Codec, ZeroInt32IsKindByteAndFourZeroBytes) {
  EXPECT_EQ(encode(std::int32_t{0}).bytes, (Bytes{0x01, 0, 0, 0, 0}));
}

TEST(Codec, Int32IsLittleEndian) {
  EXPECT_EQ(encode(std::int32_t{42}).bytes, (Bytes{0x01, 0x2A, 0x00, 0x00, 0x00}));
  EXPECT_EQ(encode(std::int32_t{-2}).bytes, (Bytes{0x01, 0xFE, 0xFF, 0xFF, 0xFF}));
}

TEST(Codec, Int32ArrayHasCountPrefix) {
  const Value v = std::vector<std::int32_t>{14, 32, 50};
  const auto p = encode(v);
  EXPECT_EQ(p.bytes, (Bytes{0x81, 3, 0, 0, 0, 14, 0, 0, 0, 32, 0, 0, 0, 50, 0, 0, 0}));
  EXPECT_EQ(decode(p, Kind::kI32Array), v);
}

TEST(Codec, StringHasByteLengthPrefix) {
  const auto p = encode(std::string("\xC3\xA9t\xC3\xA9"));
  EXPECT_EQ(p.bytes, (Bytes{0x05, 5, 0, 0, 0, 0xC3, 0xA9, 't', 0xC3, 0xA9}));
}

TEST(Codec, F64IsIeeeLittleEndian) {
  EXPECT_EQ(encode(1.0).bytes, (Bytes{0x03, 0, 0, 0, 0, 0, 0, 0xF0, 0x3F}));
}

TEST(Codec, RoundTripsExamples) {
  EXPECT_EQ(decode(encode(true), Kind::kBool), Value(true));
  EXPECT_EQ(decode(encode(std::string("ring")), Kind::kString), Value(std::string("ring")));
  EXPECT_EQ(decode(encode(Unit{}), Kind::kUnit), Value(Unit{}));
  EXPECT_EQ(decode_as<std::int64_t>(encode_as<std::int64_t>(-7)), -7);
}

TEST(Codec, MismatchedKindIsTypeMismatch) {
  EXPECT_EQ(code_of([] { decode(encode(std::int32_t{7}), Kind::kI64); }), ErrorCode::kTypeMismatch);
  EXPECT_EQ(code_of([] { decode(encode(std::vector<std::int32_t>{1}), Kind::kI32); }),
            ErrorCode::kTypeMismatch);
}

TEST(Codec, TruncatedBytesAreMalformed) {
  const auto full = encode(std::vector<std::int64_t>{1, 2, 3}).bytes;
  for (std::size_t len = 1; len < full.size(); ++len) {
    Payload cut{Bytes(full.begin(), full.begin() + static_cast<long>(len))};
    EXPECT_EQ(code_of([&] { decode(cut, Kind::kI64Array); }), ErrorCode::kMalformedPayload)
        << "length " << len;
  }
}

TEST(Codec, TrailingBytesAreMalformed) {
  auto p = encode(std::int32_t{1});
  p.bytes.push_back(0);
  EXPECT_EQ(code_of([&] { decode(p, Kind::kI32); }), ErrorCode::kMalformedPayload);
}

TEST(Codec, RejectsInvalidEncodings) {
  EXPECT_EQ(code_of([] { decode(Payload{{0x04, 2}}, Kind::kBool); }), ErrorCode::kMalformedPayload);
  EXPECT_EQ(code_of([] { decode(Payload{{0x05, 1, 0, 0, 0, 0xFF}}, Kind::kString); }),
            ErrorCode::kMalformedPayload);
  EXPECT_EQ(code_of([] { payload_from_bytes({0x07}); }), ErrorCode::kMalformedPayload);
  EXPECT_EQ(code_of([] { payload_from_bytes({}); }), ErrorCode::kMalformedPayload);
  // Nested arrays are outside the kind set.
  EXPECT_EQ(code_of([] { payload_from_bytes({0x80}); }), ErrorCode::kMalformedPayload);
}

TEST(Codec, HugeCountDoesNotAllocate) {
  EXPECT_EQ(code_of([] { decode(Payload{{0x82, 0xFF, 0xFF, 0xFF, 0xFF}}, Kind::kI64Array); }),
            ErrorCode::kMalformedPayload);
}

TEST(Codec, InvalidUtf8CannotBeEncoded) {
  EXPECT_EQ(code_of([] { encode(std::string("\xC3")); }), ErrorCode::kEncodeUnsupported);
  EXPECT_EQ(code_of([] { encode(std::vector<std::string>{"ok", "\xED\xA0\x80"}); }),
            ErrorCode::kEncodeUnsupported);
}

TEST(Codec, KindTableIsClosed) {
  int known = 0;
  for (int b = 0; b < 256; ++b) {
    if (kind_from_byte(static_cast<std::uint8_t>(b))) ++known;
  }
  EXPECT_EQ(known, 13);
  EXPECT_EQ(element_kind(Kind::kBoolArray), Kind::kBool);
  EXPECT_EQ(array_kind_of(Kind::kString), Kind::kStringArray);
  EXPECT_FALSE(array_kind_of(Kind::kUnit).has_value());
}

TEST(CodecProperty, MatchesReferenceLayoutAndRoundTrips) {
  gen::Rng rng(20240611);
  for (int i = 0; i < 3000; ++i) {
    const Value v = gen::value(rng);
    const auto p = encode(v);
    ASSERT_EQ(p.bytes, oracle::encode(v)) << to_display(v);
    ASSERT_EQ(p.kind(), kind_of(v));
    ASSERT_EQ(decode(p, kind_of(v)), v) << to_display(v);
    ASSERT_EQ(encode(v).bytes, p.bytes) << "encoding must be deterministic";
  }
}

TEST(CodecProperty, EveryWrongKindIsRejected) {
  gen::Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const Value v = gen::value(rng);
    const auto p = encode(v);
    for (int b = 0; b < 256; ++b) {
      const auto k = kind_from_byte(static_cast<std::uint8_t>(b));
      if (!k || *k == kind_of(v)) continue;
      ASSERT_EQ(code_of([&] { decode(p, *k); }), ErrorCode::kTypeMismatch);
    }
  }
}

TEST(CodecProperty, EveryTruncationIsDetected) {
  gen::Rng rng(99);
  for (int i = 0; i < 500; ++i) {
    const auto full = encode(gen::value(rng)).bytes;
    const Kind k = Payload{full}.kind();
    for (std::size_t len = 1; len < full.size(); ++len) {
      Payload cut{Bytes(full.begin(), full.begin() + static_cast<long>(len))};
      ASSERT_THROW(decode(cut, k), Error);
    }
  }
}

TEST(Codec, DisplayIsReadable) {
  EXPECT_EQ(to_display(Value(std::vector<std::int32_t>{14, 32, 50})), "[14, 32, 50]");
  EXPECT_EQ(to_display(Value(true)), "true");
  EXPECT_EQ(to_display(Value(std::int32_t{-3})), "-3");
}

/* Copyright 2026 The roadseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <filesystem>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "roadseg/weights.hpp"

namespace roadseg {
namespace {

std::vector<std::uint8_t> header_with(std::uint32_t version, std::uint32_t count) {
  std::vector<std::uint8_t> b{'L', 'F', 'D', 'W'};
  for (std::uint32_t v : {version, count}) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  return b;
}

void append_crc(std::vector<std::uint8_t>& b) {
  const std::uint32_t crc = crc32(b);
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
}

FormatErrorKind decode_error(std::span<const std::uint8_t> bytes) {
  try {
    decode(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode accepted invalid bytes";
  return FormatErrorKind::kIo;
}

WeightStore random_store(std::mt19937_64& rng) {
  WeightStore s;
  const int count = std::uniform_int_distribution<int>(0, 6)(rng);
  std::normal_distribution<float> value;
  for (int i = 0; i < count; ++i) {
    const int ndim = std::uniform_int_distribution<int>(0, 4)(rng);
    std::vector<std::uint32_t> dims;
    std::size_t n = 1;
    for (int d = 0; d < ndim; ++d) {
      dims.push_back(std::uniform_int_distribution<std::uint32_t>(1, 5)(rng));
      n *= dims.back();
    }
    std::vector<float> data(n);
    for (auto& v : data) v = value(rng);
    s.add("entry." + std::to_string(i) + ".w", dims, data);
  }
  return s;
}

TEST(Codec, EmptyStoreIsSixteenBytes) {
  const auto bytes = encode(WeightStore{});
  ASSERT_EQ(bytes.size(), 16u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "LFDW");
  EXPECT_EQ(decode(bytes).size(), 0u);
}

TEST(Codec, SingleEntryLayout) {
  WeightStore s;
  s.add("w", {2}, {1.0f, 2.0f});
  const auto bytes = encode(s);
  // header 12, name length 2, name 1, dtype 1, ndim 1, dims 4, data 8; then the CRC
  ASSERT_EQ(bytes.size(), 29u + 4u);
  EXPECT_EQ(bytes[12], 1);   // name length, low byte
  EXPECT_EQ(bytes[14], 'w');
  EXPECT_EQ(bytes[15], 0);   // dtype f32
  EXPECT_EQ(bytes[16], 1);   // ndim
  EXPECT_EQ(bytes[17], 2);   // dims[0]
  // 1.0f little-endian = 00 00 80 3f
  EXPECT_EQ(bytes[21], 0x00);
  EXPECT_EQ(bytes[23], 0x80);
  EXPECT_EQ(bytes[24], 0x3f);
}

TEST(Codec, Crc32KnownValue) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST(Codec, RoundTripRandomStores) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 50; ++i) {
    const WeightStore s = random_store(rng);
    const auto bytes = encode(s);
    const WeightStore back = decode(bytes);
    EXPECT_EQ(back, s);
    EXPECT_EQ(encode(back), bytes);

    std::stringstream stream;
    write(s, stream);
    EXPECT_EQ(read(stream), s);
  }
}

TEST(Codec, FileRoundTrip) {
  std::mt19937_64 rng(22);
  const WeightStore s = random_store(rng);
  const auto path = std::filesystem::temp_directory_path() / "roadseg_weights_test.lfdw";
  write_file(s, path);
  EXPECT_EQ(read_file(path), s);
  std::filesystem::remove(path);
  try {
    read_file(path);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatErrorKind::kIo);
  }
}

TEST(Codec, DistinctErrorKinds) {
  WeightStore s;
  s.add("a.weight", {2, 3}, {1, 2, 3, 4, 5, 6});
  const auto good = encode(s);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(decode_error(magic), FormatErrorKind::kBadMagic);

  auto version = header_with(2, 0);
  append_crc(version);
  EXPECT_EQ(decode_error(version), FormatErrorKind::kBadVersion);

  auto crc = good;
  crc.back() ^= 0xff;
  EXPECT_EQ(decode_error(crc), FormatErrorKind::kChecksum);

  auto payload = good;
  payload[good.size() - 8] ^= 0x01;
  EXPECT_EQ(decode_error(payload), FormatErrorKind::kChecksum);

  auto dtype = good;
  dtype[12 + 2 + 8] = 7;
  EXPECT_EQ(decode_error(dtype), FormatErrorKind::kUnsupportedDtype);

  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, std::size_t{20}, good.size() - 5}) {
    EXPECT_EQ(decode_error(std::span(good).first(cut)), FormatErrorKind::kTruncated) << cut;
  }
}

TEST(Store, RejectsInvalidEntries) {
  WeightStore s;
  s.add("x", {2}, {1, 2});
  EXPECT_THROW(s.add("x", {1}, {1}), FormatError);
  EXPECT_THROW(s.add("y", {3}, {1, 2}), FormatError);
  EXPECT_THROW(s.add("z", {0}, {}), FormatError);
  EXPECT_THROW(s.at("missing"), BindError);
  EXPECT_EQ(s.tensor("x").shape(), (Shape{1, 1, 1, 2}));
}

TEST(Bind, SynthesizedWeightsBindCleanly) {
  for (const auto& name : all_variant_names()) {
    VariantConfig cfg = parse_variant(name);
    cfg.input_hw = {64, 128};
    const ModelGraph g = build(cfg);
    const WeightStore store = synthesize_weights(g, 5);
    const BindReport r = check_binding(g, store);
    EXPECT_TRUE(r.ok()) << name;
    EXPECT_TRUE(r.unused.empty()) << name;
    EXPECT_NO_THROW(bind(g, store)) << name;
  }
}

TEST(Bind, ReportsUnboundMismatchedAndUnused) {
  VariantConfig cfg = parse_variant("sdb");
  cfg.input_hw = {64, 128};
  const ModelGraph g = build(cfg);
  const WeightStore full = synthesize_weights(g, 1);
  WeightStore partial;
  for (const auto& e : full.entries()) {
    if (e.name == "head.cls.bias") continue;
    if (e.name == "head.cls.weight") {
      partial.add(e.name, {2, 128}, std::vector<float>(256));
      continue;
    }
    partial.add(e.name, e.dims, e.data);
  }
  partial.add("extra.weight", {1}, {0.0f});
  const BindReport r = check_binding(g, partial);
  EXPECT_EQ(r.unbound, std::vector<std::string>{"head.cls.bias"});
  ASSERT_EQ(r.mismatched.size(), 1u);
  EXPECT_EQ(r.mismatched[0].rfind("head.cls.weight", 0), 0u) << r.mismatched[0];
  EXPECT_EQ(r.unused, std::vector<std::string>{"extra.weight"});
  try {
    bind(g, partial);
    FAIL();
  } catch (const BindError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("head.cls.bias"), std::string::npos) << msg;
    EXPECT_NE(msg.find("head.cls.weight"), std::string::npos) << msg;
  }
}

TEST(Bind, SynthesisIsSeeded) {
  VariantConfig cfg = parse_variant("stage1");
  cfg.input_hw = {64, 64};
  const ModelGraph g = build(cfg);
  EXPECT_EQ(encode(synthesize_weights(g, 3)), encode(synthesize_weights(g, 3)));
  EXPECT_NE(encode(synthesize_weights(g, 3)), encode(synthesize_weights(g, 4)));
}

}  // namespace
}  // namespace roadseg

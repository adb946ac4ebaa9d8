#include <gtest/gtest.h>

#include <cstring>

#include "solgen/shard.hpp"

using namespace solgen;

namespace {

std::vector<ShardRecord> sample_records() {
    ShardRecord a;
    a.seed = 0x0102030405060708ull;
    a.real_len = 2;
    a.tokens = {4, 5, 0};
    a.mask = {1, 1, 0};
    a.extra = {9, 8};
    ShardRecord b;
    b.seed = 7;
    b.real_len = 1;
    b.tokens = {16};
    b.mask = {1};
    return {a, b};
}

const std::string kConfig = R"({"generator":"utm","seed":1})";

std::uint64_t le(std::span<const std::uint8_t> bytes, std::size_t at, int n) {
    std::uint64_t v = 0;
    for (int i = n; i-- > 0;) v = (v << 8) | bytes[at + static_cast<std::size_t>(i)];
    return v;
}

}  // namespace

TEST(Checksums, KnownVectors) {
    const std::string s = "123456789";
    EXPECT_EQ(crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())), 0xCBF43926u);
    EXPECT_EQ(crc32_of({}), 0u);
    EXPECT_EQ(config_digest(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(config_digest("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Shard, RoundTrip) {
    const auto records = sample_records();
    const auto bytes = encode_shard(GeneratorId::Voms, kConfig, records);
    const auto s = decode_shard(bytes);
    EXPECT_EQ(s.header.generator, GeneratorId::Voms);
    EXPECT_EQ(s.header.config_json, kConfig);
    EXPECT_EQ(s.header.record_count, 2u);
    EXPECT_EQ(s.records, records);
    EXPECT_TRUE(verify_shard_bytes(bytes).ok());
}

TEST(Shard, ByteLayoutIsLittleEndianAndDocumented) {
    const auto records = sample_records();
    const auto bytes = encode_shard(GeneratorId::Chomsky, kConfig, records);
    std::size_t at = 0;
    EXPECT_EQ(std::memcmp(bytes.data(), "SLFG", 4), 0);
    at += 4;
    EXPECT_EQ(le(bytes, at, 4), 1u);
    at += 4;
    EXPECT_EQ(le(bytes, at, 4), 3u);
    at += 4;
    ASSERT_EQ(le(bytes, at, 4), kConfig.size());
    at += 4;
    EXPECT_EQ(std::string(bytes.begin() + static_cast<long>(at), bytes.begin() + static_cast<long>(at + kConfig.size())), kConfig);
    at += kConfig.size();
    EXPECT_EQ(le(bytes, at, 8), config_digest(kConfig));
    at += 8;
    EXPECT_EQ(le(bytes, at, 8), 2u);
    at += 8;
    const auto payload_len = le(bytes, at, 8);
    at += 8;
    const auto crc = le(bytes, at, 4);
    at += 4;
    ASSERT_EQ(bytes.size() - at, payload_len);
    const std::span<const std::uint8_t> payload(bytes.data() + at, payload_len);
    EXPECT_EQ(crc, crc32_of(payload));
    // Record 0: seed, seq_len, real_len, tokens, mask, extra_len, extra.
    EXPECT_EQ(le(payload, 0, 8), 0x0102030405060708ull);
    EXPECT_EQ(payload[0], 0x08);
    EXPECT_EQ(le(payload, 8, 4), 3u);
    EXPECT_EQ(le(payload, 12, 4), 2u);
    EXPECT_EQ((std::vector<std::uint8_t>(payload.begin() + 16, payload.begin() + 22)),
              (std::vector<std::uint8_t>{4, 5, 0, 1, 1, 0}));
    EXPECT_EQ(le(payload, 22, 4), 2u);
    EXPECT_EQ(payload[26], 9);
    EXPECT_EQ(payload[27], 8);
    EXPECT_EQ(le(payload, 28, 8), 7u);
    EXPECT_EQ(payload_len, 28u + 8 + 4 + 4 + 1 + 1 + 4);
}

TEST(Shard, FlippedPayloadByteFailsChecksum) {
    auto bytes = encode_shard(GeneratorId::Utm, kConfig, sample_records());
    bytes[bytes.size() - 6] ^= 0x40;  // a token byte of the last record
    const auto rep = verify_shard_bytes(bytes);
    EXPECT_FALSE(rep.ok());
    EXPECT_TRUE(rep.failed("checksum"));
    EXPECT_FALSE(rep.failed("record-count"));
    try {
        decode_shard(bytes);
        FAIL();
    } catch (const ShardError& e) {
        EXPECT_EQ(e.check, "checksum");
    }
}

TEST(Shard, TruncatedFileFailsRecordCount) {
    auto bytes = encode_shard(GeneratorId::Utm, kConfig, sample_records());
    bytes.resize(bytes.size() - 5);
    const auto rep = verify_shard_bytes(bytes);
    EXPECT_TRUE(rep.failed("record-count"));
    EXPECT_THROW(decode_shard(bytes), ShardError);
}

TEST(Shard, BadMagicAndVersion) {
    auto bytes = encode_shard(GeneratorId::Utm, kConfig, sample_records());
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_TRUE(verify_shard_bytes(bad_magic).failed("magic"));
    auto bad_version = bytes;
    bad_version[4] = 2;
    const auto rep = verify_shard_bytes(bad_version);
    EXPECT_TRUE(rep.failed("version"));
    EXPECT_FALSE(rep.failed("magic"));
    try {
        decode_shard(bad_version);
        FAIL();
    } catch (const ShardError& e) {
        EXPECT_EQ(e.check, "version");
    }
}

TEST(Shard, EditedConfigFailsDigest) {
    auto bytes = encode_shard(GeneratorId::Utm, kConfig, sample_records());
    bytes[16 + 5] = 'X';  // inside the JSON text
    EXPECT_TRUE(verify_shard_bytes(bytes).failed("config-digest"));
}

TEST(Shard, MaskLengthChecked) {
    auto records = sample_records();
    records[1].real_len = 5;
    const auto bytes = encode_shard(GeneratorId::Utm, kConfig, records);
    EXPECT_TRUE(verify_shard_bytes(bytes).failed("mask-length"));
    records[1].mask.push_back(0);
    EXPECT_THROW(encode_shard(GeneratorId::Utm, kConfig, records), std::invalid_argument);
}

TEST(Shard, ReplayFailureIsReported) {
    const auto bytes = encode_shard(GeneratorId::Utm, kConfig, sample_records());
    const ReplayFn ok = [](const ShardHeader&, std::uint64_t, const ShardRecord&) { return std::optional<std::string>{}; };
    const ReplayFn bad = [](const ShardHeader&, std::uint64_t i, const ShardRecord&) {
        return i == 1 ? std::optional<std::string>("tokens differ") : std::nullopt;
    };
    EXPECT_TRUE(verify_shard_bytes(bytes, ok).ok());
    const auto rep = verify_shard_bytes(bytes, bad);
    EXPECT_TRUE(rep.failed("provenance-replay"));
    EXPECT_NE(rep.find("provenance-replay")->detail.find("record 1"), std::string::npos);
}

TEST(Shard, EmptyShard) {
    const auto bytes = encode_shard(GeneratorId::Voms, "{}", {});
    const auto s = decode_shard(bytes);
    EXPECT_TRUE(s.records.empty());
    EXPECT_EQ(s.header.payload_len, 0u);
    EXPECT_TRUE(verify_shard_bytes(bytes).ok());
}

TEST(ByteIo, FloatsAndStrings) {
    ByteWriter w;
    w.f64(0.1);
    w.str("hi");
    const auto data = w.take();
    ByteReader r(data, "header");
    EXPECT_EQ(r.f64(), 0.1);
    EXPECT_EQ(r.str(), "hi");
    EXPECT_THROW(r.u8(), ShardError);
}

TEST(Generators, NamesRoundTrip) {
    for (auto g : {GeneratorId::Utm, GeneratorId::Voms, GeneratorId::Chomsky}) {
        EXPECT_EQ(generator_from_name(generator_name(g)), g);
    }
    EXPECT_THROW(generator_from_name("ffn"), std::invalid_argument);
}

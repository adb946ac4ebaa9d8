#pragma once

// Binary shard container. Layout (all integers little-endian):
//
//   magic "SLFG" | u32 version | u32 generator | u32 config_len | config JSON
//   | u64 config digest (FNV-1a 64 of the JSON bytes) | u64 record count
//   | u64 payload length | u32 CRC-32 of the payload | payload
//
// payload = records back to back, each
//   u64 seed | u32 seq_len | u32 real_len | seq_len token bytes
//   | seq_len mask bytes | u32 extra_len | extra bytes
//
// docs/shard_format.md has the generator-specific extra layouts.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "solgen/rng.hpp"

namespace solgen {

inline constexpr std::array<char, 4> kShardMagic = {'S', 'L', 'F', 'G'};
inline constexpr std::uint32_t kShardVersion = 1;

enum class GeneratorId : std::uint32_t { Utm = 1, Voms = 2, Chomsky = 3 };

inline std::string_view generator_name(GeneratorId g) {
    switch (g) {
        case GeneratorId::Utm: return "utm";
        case GeneratorId::Voms: return "voms";
        case GeneratorId::Chomsky: return "chomsky";
    }
    return "unknown";
}

inline GeneratorId generator_from_name(std::string_view s) {
    if (s == "utm") return GeneratorId::Utm;
    if (s == "voms") return GeneratorId::Voms;
    if (s == "chomsky") return GeneratorId::Chomsky;
    throw std::invalid_argument("unknown generator '" + std::string(s) + "'");
}

struct ShardError : std::runtime_error {
    ShardError(std::string check, const std::string& what)
        : std::runtime_error(check + ": " + what), check(std::move(check)) {}
    std::string check;  // name of the failed check
};

// --- little-endian byte streams ------------------------------------------

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        put(bits, 8);
    }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    std::vector<std::uint8_t>& data() noexcept { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string check) : data_(data), check_(std::move(check)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() {
        const std::uint64_t bits = get(8);
        double v;
        std::memcpy(&v, &bits, sizeof v);
        return v;
    }
    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::string str() {
        const auto n = u32();
        auto b = bytes(n);
        return std::string(b.begin(), b.end());
    }

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw ShardError(check_, "unexpected end of data at byte " + std::to_string(pos_) + " (needed " +
                                         std::to_string(n) + ", have " + std::to_string(remaining()) + ")");
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string check_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        crc = crc32(crc, bytes.data() + off, n);
        off += n;
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::uint64_t config_digest(std::string_view json) {
    return fnv1a64(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(json.data()), json.size()));
}

// --- records and shards --------------------------------------------------

struct ShardRecord {
    std::uint64_t seed = 0;
    std::uint32_t real_len = 0;
    std::vector<std::uint8_t> tokens;
    std::vector<std::uint8_t> mask;
    std::vector<std::uint8_t> extra;  // generator-specific ground truth

    friend bool operator==(const ShardRecord&, const ShardRecord&) = default;
};

struct ShardHeader {
    std::uint32_t version = kShardVersion;
    GeneratorId generator = GeneratorId::Utm;
    std::string config_json;
    std::uint64_t config_digest = 0;
    std::uint64_t record_count = 0;
    std::uint64_t payload_len = 0;
    std::uint32_t crc32 = 0;
};

struct Shard {
    ShardHeader header;
    std::vector<ShardRecord> records;
};

inline void encode_record(ByteWriter& w, const ShardRecord& r) {
    if (r.mask.size() != r.tokens.size()) throw std::invalid_argument("encode_record: mask and tokens differ in length");
    w.u64(r.seed);
    w.u32(static_cast<std::uint32_t>(r.tokens.size()));
    w.u32(r.real_len);
    w.bytes(r.tokens);
    w.bytes(r.mask);
    w.u32(static_cast<std::uint32_t>(r.extra.size()));
    w.bytes(r.extra);
}

inline ShardRecord decode_record(ByteReader& rd) {
    ShardRecord r;
    r.seed = rd.u64();
    const std::uint32_t n = rd.u32();
    r.real_len = rd.u32();
    auto t = rd.bytes(n);
    r.tokens.assign(t.begin(), t.end());
    auto m = rd.bytes(n);
    r.mask.assign(m.begin(), m.end());
    auto e = rd.bytes(rd.u32());
    r.extra.assign(e.begin(), e.end());
    return r;
}

inline std::vector<std::uint8_t> encode_shard(GeneratorId generator, std::string_view config_json,
                                              std::span<const ShardRecord> records) {
    ByteWriter payload;
    for (const auto& r : records) encode_record(payload, r);
    const auto& body = payload.data();

    ByteWriter w;
    for (char c : kShardMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kShardVersion);
    w.u32(static_cast<std::uint32_t>(generator));
    w.str(config_json);
    w.u64(config_digest(config_json));
    w.u64(records.size());
    w.u64(body.size());
    w.u32(crc32_of(body));
    w.bytes(body);
    return w.take();
}

struct HeaderView {
    ShardHeader header;
    std::size_t payload_offset = 0;
};

// Parses and checks magic/version; everything else is left to the caller.
inline HeaderView decode_header(std::span<const std::uint8_t> file) {
    ByteReader rd(file, "header");
    auto magic = rd.bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kShardMagic.begin())) throw ShardError("magic", "not an SLFG shard");
    HeaderView v;
    v.header.version = rd.u32();
    if (v.header.version != kShardVersion) {
        throw ShardError("version", "unsupported format version " + std::to_string(v.header.version));
    }
    const std::uint32_t g = rd.u32();
    if (g < 1 || g > 3) throw ShardError("header", "unknown generator id " + std::to_string(g));
    v.header.generator = static_cast<GeneratorId>(g);
    v.header.config_json = rd.str();
    v.header.config_digest = rd.u64();
    v.header.record_count = rd.u64();
    v.header.payload_len = rd.u64();
    v.header.crc32 = rd.u32();
    v.payload_offset = rd.pos();
    return v;
}

// Strict decode: every check must pass.
inline Shard decode_shard(std::span<const std::uint8_t> file) {
    const HeaderView hv = decode_header(file);
    Shard s;
    s.header = hv.header;
    if (config_digest(s.header.config_json) != s.header.config_digest) throw ShardError("config-digest", "mismatch");
    const auto payload = file.subspan(hv.payload_offset);
    if (payload.size() != s.header.payload_len) {
        throw ShardError("record-count", "payload is " + std::to_string(payload.size()) + " bytes, header says " +
                                             std::to_string(s.header.payload_len));
    }
    if (crc32_of(payload) != s.header.crc32) throw ShardError("checksum", "CRC-32 mismatch");
    ByteReader rd(payload, "record-count");
    for (std::uint64_t i = 0; i < s.header.record_count; ++i) s.records.push_back(decode_record(rd));
    if (rd.remaining() != 0) throw ShardError("record-count", "trailing bytes after the last record");
    return s;
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

inline Shard read_shard(const std::filesystem::path& path) { return decode_shard(read_file(path)); }

// --- verification --------------------------------------------------------

struct CheckResult {
    std::string name;
    bool ok = true;
    std::string detail;
};

struct VerifyReport {
    std::filesystem::path path;
    std::vector<CheckResult> checks;

    bool ok() const {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.ok; });
    }

    const CheckResult* find(std::string_view name) const {
        for (const auto& c : checks) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }

    bool failed(std::string_view name) const {
        const auto* c = find(name);
        return c && !c->ok;
    }
};

// Returns an error message for a record whose provenance does not replay.
using ReplayFn = std::function<std::optional<std::string>(const ShardHeader&, std::uint64_t index, const ShardRecord&)>;

// Runs every check it can; a failed check does not stop the later ones
// unless they have nothing left to read.
inline VerifyReport verify_shard_bytes(std::span<const std::uint8_t> file, const ReplayFn& replay = {},
                                       std::size_t replay_samples = 16) {
    VerifyReport rep;
    auto add = [&](std::string name, bool ok, std::string detail = {}) {
        rep.checks.push_back({std::move(name), ok, std::move(detail)});
    };
    HeaderView hv;
    try {
        hv = decode_header(file);
    } catch (const ShardError& e) {
        for (const char* name : {"magic", "version", "header"}) {
            if (e.check == name) {
                add(name, false, e.what());
                return rep;
            }
            add(name, true);
        }
        return rep;
    }
    add("magic", true);
    add("version", true);
    add("header", true);

    const ShardHeader& h = hv.header;
    add("config-digest", config_digest(h.config_json) == h.config_digest);

    const auto payload = file.subspan(hv.payload_offset);
    const bool length_ok = payload.size() == h.payload_len;
    add("checksum", length_ok && crc32_of(payload) == h.crc32,
        length_ok ? "" : "payload length " + std::to_string(payload.size()) + " != " + std::to_string(h.payload_len));

    std::vector<ShardRecord> records;
    std::string parse_error;
    ByteReader rd(payload, "record-count");
    try {
        while (records.size() < h.record_count) records.push_back(decode_record(rd));
    } catch (const ShardError& e) {
        parse_error = e.what();
    }
    const bool count_ok = records.size() == h.record_count && rd.remaining() == 0 && length_ok;
    add("record-count", count_ok,
        count_ok ? "" : "decoded " + std::to_string(records.size()) + " of " + std::to_string(h.record_count) +
                            " records" + (parse_error.empty() ? "" : " (" + parse_error + ")"));

    bool lengths_ok = true;
    std::string lengths_detail;
    for (std::size_t i = 0; i < records.size() && lengths_ok; ++i) {
        const auto& r = records[i];
        if (r.tokens.size() != r.mask.size() || r.real_len > r.tokens.size()) {
            lengths_ok = false;
            lengths_detail = "record " + std::to_string(i);
        }
    }
    add("mask-length", lengths_ok, lengths_detail);

    if (replay && !records.empty()) {
        std::string bad;
        const std::size_t stride = std::max<std::size_t>(1, records.size() / std::max<std::size_t>(replay_samples, 1));
        for (std::size_t i = 0; i < records.size() && bad.empty(); i += stride) {
            try {
                if (auto err = replay(h, i, records[i])) bad = "record " + std::to_string(i) + ": " + *err;
            } catch (const std::exception& e) {
                bad = "record " + std::to_string(i) + ": " + e.what();
            }
        }
        add("provenance-replay", bad.empty(), bad);
    }
    return rep;
}

}  // namespace solgen

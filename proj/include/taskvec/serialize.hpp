// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary container shared by all checkpoint files:
//   magic (4 bytes) | version (u32 LE) | payload | fnv1a64(payload)
// Writers stage to a temp file and rename so readers never see partial files.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "taskvec/common.hpp"
#include "taskvec/tensor.hpp"

namespace taskvec {

constexpr std::uint32_t kContainerVersion = 1;

struct ByteWriter {
    std::vector<std::uint8_t> buf;

    void put_bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf.insert(buf.end(), b, b + n);
    }
    void put_u8(std::uint8_t v) { buf.push_back(v); }
    void put_u16(std::uint16_t v) { put_le(v); }
    void put_u32(std::uint32_t v) { put_le(v); }
    void put_u64(std::uint64_t v) { put_le(v); }
    void put_f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_le(bits);
    }
    void put_tokens(const std::vector<Token>& t) {
        if (t.size() > 0xffff) throw LengthError("token list too long for u16 prefix");
        put_u16(static_cast<std::uint16_t>(t.size()));
        for (Token x : t) put_u16(x);
    }
    template <class S>
    void put_mat_f32(const Mat<S>& m) {
        for (const auto& x : m.a) put_f32(static_cast<float>(x));
    }

private:
    template <class T>
    void put_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
};

struct ByteReader {
    const std::uint8_t* p;
    std::size_t n;
    std::size_t off = 0;

    ByteReader(const void* data, std::size_t size)
        : p(static_cast<const std::uint8_t*>(data)), n(size) {}

    void need(std::size_t k) const {
        if (off + k > n) throw CorruptionError("unexpected end of file");
    }
    std::uint8_t get_u8() {
        need(1);
        return p[off++];
    }
    std::uint16_t get_u16() { return get_le<std::uint16_t>(); }
    std::uint32_t get_u32() { return get_le<std::uint32_t>(); }
    std::uint64_t get_u64() { return get_le<std::uint64_t>(); }
    float get_f32() {
        const std::uint32_t bits = get_u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::vector<Token> get_tokens() {
        const std::size_t k = get_u16();
        std::vector<Token> t(k);
        for (auto& x : t) x = get_u16();
        return t;
    }
    template <class S>
    void get_mat_f32(Mat<S>& m) {
        for (auto& x : m.a) x = static_cast<S>(get_f32());
    }
    bool exhausted() const { return off == n; }

private:
    template <class T>
    T get_le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<T>(p[off + i]) << (8 * i);
        }
        off += sizeof(T);
        return v;
    }
};

inline void write_file_atomic(const std::filesystem::path& path,
                              const void* data, std::size_t n) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp.string());
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& s) {
    write_file_atomic(path, s.data(), s.size());
}

/// Frames the payload, appends its checksum, writes atomically.
/// Returns the payload checksum (used as a fingerprint by callers).
inline std::uint64_t save_container(const std::filesystem::path& path,
                                    const std::array<char, 4>& magic,
                                    const std::vector<std::uint8_t>& payload) {
    ByteWriter w;
    w.put_bytes(magic.data(), 4);
    w.put_u32(kContainerVersion);
    w.put_bytes(payload.data(), payload.size());
    const std::uint64_t sum = fnv1a64(payload.data(), payload.size());
    w.put_u64(sum);
    write_file_atomic(path, w.buf.data(), w.buf.size());
    return sum;
}

struct Container {
    std::vector<std::uint8_t> payload;
    std::uint64_t checksum = 0;
};

inline Container load_container(const std::filesystem::path& path,
                                const std::array<char, 4>& magic) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
    if (raw.size() < 16) throw CorruptionError("file too short: " + path.string());
    if (std::memcmp(raw.data(), magic.data(), 4) != 0) {
        throw CorruptionError("bad magic in " + path.string());
    }
    ByteReader r(raw.data() + 4, raw.size() - 4);
    const std::uint32_t version = r.get_u32();
    if (version != kContainerVersion) {
        throw CorruptionError("unsupported format version in " + path.string());
    }
    Container c;
    const std::size_t payload_len = raw.size() - 4 - 4 - 8;
    c.payload.assign(raw.begin() + 8, raw.begin() + 8 + static_cast<std::ptrdiff_t>(payload_len));
    ByteReader tail(raw.data() + 8 + payload_len, 8);
    const std::uint64_t stored = tail.get_u64();
    c.checksum = fnv1a64(c.payload.data(), c.payload.size());
    if (stored != c.checksum) {
        throw CorruptionError("checksum mismatch in " + path.string());
    }
    return c;
}

}  // namespace taskvec

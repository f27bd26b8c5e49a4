// SPDX-License-Identifier: Apache-2.0
//
// Shared plumbing: failure classes, little-endian binary file IO, content
// hashing, and thread-count control.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfx {

// Failure classes. The CLI maps each class to a distinct exit code.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Buffered binary file writer, little-endian scalar encoding. All methods
// throw IoError on failure so callers never have to check return codes.
class FileWriter {
  public:
    explicit FileWriter(const std::string &path) : path_(path) {
        f_ = std::fopen(path.c_str(), "wb");
        if (f_ == nullptr)
            throw IoError("cannot open for writing: " + path);
    }
    ~FileWriter() {
        if (f_ != nullptr)
            std::fclose(f_);
    }
    FileWriter(const FileWriter &) = delete;
    FileWriter &operator=(const FileWriter &) = delete;

    void bytes(const void *p, size_t n) {
        if (std::fwrite(p, 1, n, f_) != n)
            throw IoError("short write: " + path_);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u16(uint16_t v) { put_le(v); }
    void u32(uint32_t v) { put_le(v); }
    void u64(uint64_t v) { put_le(v); }
    void f32(float v) {
        uint32_t b;
        std::memcpy(&b, &v, 4);
        put_le(b);
    }
    void f64(double v) {
        uint64_t b;
        std::memcpy(&b, &v, 8);
        put_le(b);
    }
    void f32_array(const float *p, size_t n) {
        for (size_t i = 0; i < n; i++)
            f32(p[i]);
    }
    void close() {
        if (f_ != nullptr && std::fclose(f_) != 0) {
            f_ = nullptr;
            throw IoError("close failed: " + path_);
        }
        f_ = nullptr;
    }

  private:
    template <typename U> void put_le(U v) {
        uint8_t b[sizeof(U)];
        for (size_t i = 0; i < sizeof(U); i++)
            b[i] = uint8_t(v >> (8 * i));
        bytes(b, sizeof(U));
    }
    std::string path_;
    std::FILE *f_ = nullptr;
};

// Binary file reader matching FileWriter. Reads past end of file throw
// IoError, so truncated inputs surface as malformed-payload errors.
class FileReader {
  public:
    explicit FileReader(const std::string &path) : path_(path) {
        f_ = std::fopen(path.c_str(), "rb");
        if (f_ == nullptr)
            throw IoError("cannot open for reading: " + path);
    }
    ~FileReader() {
        if (f_ != nullptr)
            std::fclose(f_);
    }
    FileReader(const FileReader &) = delete;
    FileReader &operator=(const FileReader &) = delete;

    void bytes(void *p, size_t n) {
        if (std::fread(p, 1, n, f_) != n)
            throw IoError("truncated file: " + path_);
    }
    uint8_t u8() {
        uint8_t v;
        bytes(&v, 1);
        return v;
    }
    uint16_t u16() { return get_le<uint16_t>(); }
    uint32_t u32() { return get_le<uint32_t>(); }
    uint64_t u64() { return get_le<uint64_t>(); }
    float f32() {
        uint32_t b = get_le<uint32_t>();
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    double f64() {
        uint64_t b = get_le<uint64_t>();
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    void f32_array(float *p, size_t n) {
        for (size_t i = 0; i < n; i++)
            p[i] = f32();
    }
    bool at_eof() {
        int ch = std::fgetc(f_);
        if (ch == EOF)
            return true;
        std::ungetc(ch, f_);
        return false;
    }

  private:
    template <typename U> U get_le() {
        uint8_t b[sizeof(U)];
        bytes(b, sizeof(U));
        U v = 0;
        for (size_t i = 0; i < sizeof(U); i++)
            v |= U(b[i]) << (8 * i);
        return v;
    }
    std::string path_;
    std::FILE *f_ = nullptr;
};

// FNV-1a 64-bit. Used for dataset/checkpoint manifests; stable across runs
// and platforms, which is all the determinism checks need.
inline uint64_t fnv1a64(const void *data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const uint8_t *p = static_cast<const uint8_t *>(data);
    for (size_t i = 0; i < n; i++) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// Streaming hash of a whole file.
uint64_t hash_file(const std::string &path);

std::string to_hex(uint64_t v);

// Caps OpenMP (and Eigen, which follows OpenMP) to n threads; n = 1 gives the
// bitwise-reproducible single-threaded mode.
void set_max_threads(int n);
int max_threads();

} // namespace cfx

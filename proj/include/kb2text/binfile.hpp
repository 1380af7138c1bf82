#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "kb2text/error.hpp"
#include "kb2text/io_util.hpp"
#include "kb2text/matrix.hpp"

namespace kb2text {

static_assert(std::endian::native == std::endian::little,
              "binary artifact blobs are little-endian; big-endian hosts are unsupported");

// Shared on-disk framing for model artifacts: an 8-byte magic, a u32 format
// version, a u64 header length, a JSON header, then raw little-endian f64
// blobs described by the header.

inline void append_doubles(std::string& out, const real* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(data[i]);
        char buf[sizeof(double)];
        std::memcpy(buf, &d, sizeof(double));
        out.append(buf, sizeof(double));
    }
}

inline void append_u32(std::string& out, uint32_t v) {
    char buf[4];
    std::memcpy(buf, &v, 4);
    out.append(buf, 4);
}

inline void append_u64(std::string& out, uint64_t v) {
    char buf[8];
    std::memcpy(buf, &v, 8);
    out.append(buf, 8);
}

inline void append_matrix(std::string& out, const Matrix& m) {
    append_doubles(out, m.data(), m.size());
}

inline void append_vector(std::string& out, const Vector& v) {
    append_doubles(out, v.data(), v.size());
}

class BlobReader {
public:
    BlobReader(const std::string& data, size_t offset) : data_(data), pos_(offset) {}

    void read_into(real* dst, size_t n) {
        if (pos_ + n * sizeof(double) > data_.size())
            throw FormatError("binary artifact: truncated value block");
        for (size_t i = 0; i < n; ++i) {
            double d;
            std::memcpy(&d, data_.data() + pos_, sizeof(double));
            pos_ += sizeof(double);
            dst[i] = static_cast<real>(d);
        }
    }

    void read_matrix(Matrix& m) { read_into(m.data(), m.size()); }
    void read_vector(Vector& v) { read_into(v.data(), v.size()); }

    void read_bytes(char* dst, size_t n) {
        if (pos_ + n > data_.size())
            throw FormatError("binary artifact: truncated value block");
        std::memcpy(dst, data_.data() + pos_, n);
        pos_ += n;
    }

    uint32_t read_u32() {
        uint32_t v;
        read_bytes(reinterpret_cast<char*>(&v), 4);
        return v;
    }

    uint64_t read_u64() {
        uint64_t v;
        read_bytes(reinterpret_cast<char*>(&v), 8);
        return v;
    }

    size_t pos() const { return pos_; }

private:
    const std::string& data_;
    size_t pos_;
};

inline void write_framed_file(const std::filesystem::path& path, const char (&magic)[8],
                              uint32_t version, const std::string& header_json,
                              const std::string& blobs) {
    std::string out;
    out.append(magic, 8);
    char buf4[4];
    std::memcpy(buf4, &version, 4);
    out.append(buf4, 4);
    const uint64_t hlen = header_json.size();
    char buf8[8];
    std::memcpy(buf8, &hlen, 8);
    out.append(buf8, 8);
    out += header_json;
    out += blobs;
    atomic_write_file(path, out);
}

struct FramedFile {
    std::string data;        // whole file
    std::string header_json; // JSON text between frame and blobs
    size_t blob_offset = 0;  // first byte after the header
};

inline FramedFile read_framed_file(const std::filesystem::path& path, const char (&magic)[8],
                                   uint32_t version, const std::string& what) {
    if (!std::filesystem::exists(path))
        throw MissingArtifactError(what + " not found: " + path.string());
    FramedFile out;
    out.data = read_file(path);
    if (out.data.size() < 20 || std::memcmp(out.data.data(), magic, 8) != 0)
        throw FormatError(what + ": bad magic in " + path.string());
    uint32_t file_version;
    std::memcpy(&file_version, out.data.data() + 8, 4);
    if (file_version != version)
        throw FormatError(what + ": unsupported version " + std::to_string(file_version));
    uint64_t hlen;
    std::memcpy(&hlen, out.data.data() + 12, 8);
    if (20 + hlen > out.data.size()) throw FormatError(what + ": truncated header");
    out.header_json = out.data.substr(20, hlen);
    out.blob_offset = 20 + static_cast<size_t>(hlen);
    return out;
}

}  // namespace kb2text

#pragma once

// Little-endian primitives shared by the AFS1 / AHD1 / AGT1 containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace armo::io {

class ByteWriter {
public:
    void put_bytes(std::string_view bytes);
    void put_u8(std::uint8_t v) { buf_.push_back(v); }
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_f64s(std::span<const double> v);
    /// u32 byte length followed by the raw UTF-8 bytes.
    void put_string(std::string_view s);

    const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked cursor over an in-memory byte buffer. Every read past the
/// end throws FormatError naming `what`.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string what)
        : data_(data), what_(std::move(what)) {}

    std::string get_bytes(std::size_t n);
    std::uint8_t get_u8();
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    double get_f64() { return std::bit_cast<double>(get_u64()); }
    void get_f64s(std::span<double> out);
    std::string get_string();

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void require(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::string what_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace armo::io

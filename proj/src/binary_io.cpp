#include "armo/binary_io.hpp"

#include <fstream>

#include "armo/errors.hpp"

namespace armo::io {

void ByteWriter::put_bytes(std::string_view bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::put_f64s(std::span<const double> v) {
    buf_.reserve(buf_.size() + 8 * v.size());
    for (double x : v) put_f64(x);
}

void ByteWriter::put_string(std::string_view s) {
    if (s.size() > UINT32_MAX) throw ValidationError("string too long for u32 length prefix");
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
}

void ByteReader::require(std::size_t n) const {
    if (n > remaining()) {
        throw FormatError(what_ + ": truncated, need " + std::to_string(pos_ + n) +
                          " bytes but only " + std::to_string(data_.size()) + " available");
    }
}

std::string ByteReader::get_bytes(std::size_t n) {
    require(n);
    std::string out(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return out;
}

std::uint8_t ByteReader::get_u8() {
    require(1);
    return data_[pos_++];
}

std::uint32_t ByteReader::get_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::get_u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

void ByteReader::get_f64s(std::span<double> out) {
    require(8 * out.size());
    for (double& x : out) x = get_f64();
}

std::string ByteReader::get_string() {
    const std::uint32_t n = get_u32();
    return get_bytes(n);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failure on " + path.string());
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace armo::io

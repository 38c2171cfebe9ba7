#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gvk/tensor/optim.hpp"
#include "gvk/tensor/tensor.hpp"

namespace gvk {

/// Raised when a binary file does not match its declared layout.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// One named array inside a checkpoint file.
struct CheckpointEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

// Layout: "GVKCKPT1", u32 count, then per entry: u32 name length, UTF-8
// name, u32 rank, u32 dims..., f32 data. All little-endian.
std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries);
std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

/// Parameters followed by optimizer moments as "<name>/m" and "<name>/v".
std::vector<CheckpointEntry> snapshot(const ParameterStore& store, const AdamW* optimizer);

/// Copies entries back into `store` (and `optimizer` when given). Every store
/// parameter must be present with a matching shape; otherwise throws listing
/// each offending name.
void restore(const std::vector<CheckpointEntry>& entries, ParameterStore& store, AdamW* optimizer);

namespace io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Little-endian byte writer.
class ByteWriter {
public:
    void u32(std::uint32_t v);
    void f32(float v);
    void bytes(const void* data, std::size_t n);
    void str(const std::string& s) { bytes(s.data(), s.size()); }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

/// Little-endian byte reader; throws FormatError with the failing offset.
class ByteReader {
public:
    explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}
    std::uint32_t u32();
    float f32();
    std::string str(std::size_t n);
    void f32_array(float* dst, std::size_t n);
    void expect_magic(const std::string& magic);
    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what);
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace io
}  // namespace gvk

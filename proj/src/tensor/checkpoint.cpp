#include "gvk/tensor/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

namespace gvk {

namespace io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + path.string());
}

void ByteWriter::u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::bytes(const void* data, std::size_t n) {
    auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
}

void ByteReader::need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
        throw FormatError(std::string("truncated file while reading ") + what, pos_);
    }
}

std::uint32_t ByteReader::u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::str(std::size_t n) {
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
}

void ByteReader::f32_array(float* dst, std::size_t n) {
    if (n > remaining() / 4) throw FormatError("truncated file while reading f32 data", pos_);
    for (std::size_t i = 0; i < n; ++i) dst[i] = f32();
}

void ByteReader::expect_magic(const std::string& magic) {
    const auto start = pos_;
    if (remaining() < magic.size() || str(magic.size()) != magic) {
        throw FormatError("bad magic, expected \"" + magic + "\"", start);
    }
}

}  // namespace io

std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
    io::ByteWriter w;
    w.str("GVKCKPT1");
    w.u32(static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (numel(e.shape) != e.data.size()) throw ShapeError("checkpoint entry " + e.name + " has inconsistent shape");
        w.u32(static_cast<std::uint32_t>(e.name.size()));
        w.str(e.name);
        w.u32(static_cast<std::uint32_t>(e.shape.size()));
        for (auto d : e.shape) w.u32(static_cast<std::uint32_t>(d));
        for (float v : e.data) w.f32(v);
    }
    return std::move(w.buffer());
}

std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes);
    r.expect_magic("GVKCKPT1");
    const auto count = r.u32();
    std::vector<CheckpointEntry> entries;
    for (std::uint32_t i = 0; i < count; ++i) {
        CheckpointEntry e;
        const auto name_len = r.u32();
        e.name = r.str(name_len);
        const auto rank = r.u32();
        if (rank > 8) throw FormatError("implausible rank " + std::to_string(rank) + " for " + e.name, r.offset() - 4);
        for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.u32());
        e.data.resize(numel(e.shape));
        r.f32_array(e.data.data(), e.data.size());
        entries.push_back(std::move(e));
    }
    if (!r.at_end()) throw FormatError("trailing bytes after last entry", r.offset());
    return entries;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointEntry>& entries) {
    io::write_file(path, encode_checkpoint(entries));
}

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(io::read_file(path));
}

std::vector<CheckpointEntry> snapshot(const ParameterStore& store, const AdamW* optimizer) {
    std::vector<CheckpointEntry> out;
    for (const auto& p : store.all()) {
        out.push_back({p.name, p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()}});
    }
    if (optimizer) {
        for (const auto& [name, st] : optimizer->state()) {
            const Shape shape = store.get(name).tensor.shape();
            out.push_back({name + "/m", shape, st.m});
            out.push_back({name + "/v", shape, st.v});
            out.push_back({name + "/steps", {1}, {static_cast<float>(st.steps)}});
        }
    }
    return out;
}

void restore(const std::vector<CheckpointEntry>& entries, ParameterStore& store, AdamW* optimizer) {
    std::map<std::string, const CheckpointEntry*> by_name;
    for (const auto& e : entries) by_name[e.name] = &e;

    std::vector<std::string> problems;
    for (const auto& p : store.all()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) {
            problems.push_back(p.name + " (missing)");
        } else if (it->second->shape != p.tensor.shape()) {
            problems.push_back(p.name + " (checkpoint " + shape_str(it->second->shape) + " vs model " +
                               shape_str(p.tensor.shape()) + ")");
        }
    }
    if (!problems.empty()) {
        std::string msg = "checkpoint does not match model:";
        for (const auto& s : problems) msg += " " + s + ";";
        throw Error(msg);
    }
    for (auto& p : store.all()) {
        const auto& src = by_name.at(p.name)->data;
        std::copy(src.begin(), src.end(), p.tensor.mutable_data().begin());
    }
    if (!optimizer) return;
    optimizer->reset();
    for (const auto& p : store.all()) {
        auto m = by_name.find(p.name + "/m");
        auto v = by_name.find(p.name + "/v");
        auto s = by_name.find(p.name + "/steps");
        if (m == by_name.end() || v == by_name.end() || s == by_name.end()) continue;
        if (m->second->data.size() != p.tensor.size() || v->second->data.size() != p.tensor.size()) {
            throw Error("checkpoint optimizer state shape mismatch for " + p.name);
        }
        auto& st = optimizer->state()[p.name];
        st.m = m->second->data;
        st.v = v->second->data;
        st.steps = static_cast<std::size_t>(s->second->data.at(0));
    }
}

}  // namespace gvk

#include "tstcc/checkpoint.hpp"

#include "tstcc/errors.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace tstcc {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& b, size_t& pos, const std::string& path) {
    if (pos + 4 > b.size()) throw DataError(path + ": truncated checkpoint");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

uint64_t get_u64(const std::string& b, size_t& pos, const std::string& path) {
    if (pos + 8 > b.size()) throw DataError(path + ": truncated checkpoint");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u64(buf, ckpt.config_snapshot.size());
    buf.append(ckpt.config_snapshot);
    put_u64(buf, ckpt.tensors.size());
    for (const auto& [name, t] : ckpt.tensors) {
        put_u64(buf, name.size());
        buf.append(name);
        put_u32(buf, static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u64(buf, static_cast<uint64_t>(t.dim(i)));
        for (int64_t i = 0; i < t.numel(); ++i) {
            uint32_t bits;
            std::memcpy(&bits, &t[i], 4);
            put_u32(buf, bits);
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw DataError(path + ": write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string bytes = ss.str();

    size_t pos = 0;
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw DataError(path + ": magic mismatch, not a TSCK checkpoint");
    pos = 4;
    const uint32_t version = get_u32(bytes, pos, path);
    if (version != kVersion)
        throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));

    Checkpoint ckpt;
    const uint64_t cfg_len = get_u64(bytes, pos, path);
    if (pos + cfg_len > bytes.size()) throw DataError(path + ": truncated checkpoint");
    ckpt.config_snapshot = bytes.substr(pos, cfg_len);
    pos += cfg_len;

    const uint64_t count = get_u64(bytes, pos, path);
    for (uint64_t i = 0; i < count; ++i) {
        const uint64_t name_len = get_u64(bytes, pos, path);
        if (pos + name_len > bytes.size()) throw DataError(path + ": truncated checkpoint");
        std::string name = bytes.substr(pos, name_len);
        pos += name_len;
        const uint32_t rank = get_u32(bytes, pos, path);
        if (rank > 8) throw DataError(path + ": implausible tensor rank");
        std::vector<int64_t> dims(rank);
        for (uint32_t r = 0; r < rank; ++r) dims[r] = static_cast<int64_t>(get_u64(bytes, pos, path));
        Tensor<float> t(dims);
        for (int64_t j = 0; j < t.numel(); ++j) {
            const uint32_t bits = get_u32(bytes, pos, path);
            std::memcpy(&t[j], &bits, 4);
        }
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    if (pos != bytes.size()) throw DataError(path + ": trailing bytes after payload");
    return ckpt;
}

}  // namespace tstcc

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "crossgo/binary_io.hpp"
#include "crossgo/features.hpp"

namespace crossgo {

/// One supervised example: an encoded position and the row-major index of
/// the move played from it.
struct StateMovePair {
    FeatureTensor features;
    int label = 0;

    bool operator==(const StateMovePair&) const = default;
};

// Layout (little-endian):
//   header: "CGSH" | u8 version | u8 board size | u8 plane count | u64 record count
//   record: per plane, size*size bits row-major, least significant bit first,
//           padded to a whole byte (46 bytes at 19x19) | u16 label
namespace shard {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 4 + 1 + 1 + 1 + 8;

constexpr std::size_t plane_bytes(int size)
{
    return (static_cast<std::size_t>(size * size) + 7) / 8;
}

constexpr std::size_t record_bytes(int size, int planes = planes::kCount)
{
    return static_cast<std::size_t>(planes) * plane_bytes(size) + 2;
}

inline std::vector<std::uint8_t> encode_record(const StateMovePair& pair)
{
    const int n = pair.features.size();
    const int area = n * n;
    if (pair.label < 0 || pair.label >= area) throw std::invalid_argument("label outside the board");
    std::vector<std::uint8_t> out(record_bytes(n), 0);
    for (int p = 0; p < FeatureTensor::kPlanes; ++p) {
        auto bits = pair.features.plane(p);
        std::uint8_t* dst = out.data() + static_cast<std::size_t>(p) * plane_bytes(n);
        for (int i = 0; i < area; ++i)
            if (bits[static_cast<std::size_t>(i)]) dst[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    }
    out[out.size() - 2] = static_cast<std::uint8_t>(pair.label & 0xff);
    out[out.size() - 1] = static_cast<std::uint8_t>((pair.label >> 8) & 0xff);
    return out;
}

inline StateMovePair decode_record(const std::uint8_t* bytes, int size)
{
    StateMovePair pair{FeatureTensor(size), 0};
    const int area = size * size;
    auto data = pair.features.data();
    for (int p = 0; p < FeatureTensor::kPlanes; ++p) {
        const std::uint8_t* src = bytes + static_cast<std::size_t>(p) * plane_bytes(size);
        for (int i = 0; i < area; ++i)
            data[static_cast<std::size_t>(p * area + i)] = (src[i / 8] >> (i % 8)) & 1u;
    }
    const std::size_t tail = record_bytes(size) - 2;
    pair.label = bytes[tail] | (bytes[tail + 1] << 8);
    if (pair.label >= area) throw io::FormatError("record label outside the board");
    // Perspective is implied by the encoding ("ours" = side to move) and not stored.
    return pair;
}

}  // namespace shard

/// Appends records to a shard file; the header count is patched on close.
class ShardWriter {
public:
    ShardWriter(const std::filesystem::path& path, int board_size = kNetworkBoardSize)
        : out_(path, std::ios::binary | std::ios::trunc), size_(board_size), path_(path)
    {
        if (!out_) throw std::runtime_error("cannot write shard " + path.string());
        out_.write("CGSH", 4);
        io::put_le<std::uint8_t>(out_, shard::kVersion);
        io::put_le<std::uint8_t>(out_, static_cast<std::uint8_t>(board_size));
        io::put_le<std::uint8_t>(out_, static_cast<std::uint8_t>(planes::kCount));
        io::put_le<std::uint64_t>(out_, 0);
    }

    ShardWriter(const ShardWriter&) = delete;
    ShardWriter& operator=(const ShardWriter&) = delete;
    ~ShardWriter()
    {
        try {
            close();
        } catch (...) {
        }
    }

    void append(const StateMovePair& pair)
    {
        if (pair.features.size() != size_) throw std::invalid_argument("record board size differs from shard");
        const auto bytes = shard::encode_record(pair);
        out_.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        ++count_;
    }

    std::uint64_t count() const { return count_; }

    void close()
    {
        if (!out_.is_open()) return;
        out_.seekp(7);
        io::put_le<std::uint64_t>(out_, count_);
        out_.close();
        if (out_.fail()) throw std::runtime_error("failed writing shard " + path_.string());
    }

private:
    std::ofstream out_;
    int size_;
    std::uint64_t count_ = 0;
    std::filesystem::path path_;
};

/// A whole shard held in memory, with O(1) access to any record.
class Shard {
public:
    static Shard load(const std::filesystem::path& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open shard " + path.string());
        io::expect_magic(in, "CGSH");
        Shard s;
        const auto version = io::get_le<std::uint8_t>(in);
        if (version != shard::kVersion) throw io::FormatError("unsupported shard version " + std::to_string(version));
        s.size_ = io::get_le<std::uint8_t>(in);
        const int planes = io::get_le<std::uint8_t>(in);
        if (planes != planes::kCount) throw io::FormatError("shard has " + std::to_string(planes) + " planes");
        if (s.size_ < kMinBoardSize || s.size_ > kMaxBoardSize) throw io::FormatError("bad shard board size");
        const auto count = io::get_le<std::uint64_t>(in);
        const auto expected = count * shard::record_bytes(s.size_);
        const auto actual = std::filesystem::file_size(path) - shard::kHeaderBytes;
        if (actual != expected)
            throw io::FormatError("shard " + path.string() + " holds " + std::to_string(actual) + " record bytes, header says " +
                                  std::to_string(expected));
        s.bytes_.resize(expected);
        in.read(reinterpret_cast<char*>(s.bytes_.data()), static_cast<std::streamsize>(expected));
        if (!in) throw io::FormatError("short read in shard " + path.string());
        s.count_ = static_cast<std::size_t>(count);
        return s;
    }

    int board_size() const { return size_; }
    std::size_t size() const { return count_; }

    StateMovePair record(std::size_t i) const
    {
        if (i >= count_) throw std::out_of_range("shard record index");
        return shard::decode_record(bytes_.data() + i * shard::record_bytes(size_), size_);
    }

    int label(std::size_t i) const
    {
        if (i >= count_) throw std::out_of_range("shard record index");
        const std::uint8_t* tail = bytes_.data() + (i + 1) * shard::record_bytes(size_) - 2;
        return tail[0] | (tail[1] << 8);
    }

private:
    int size_ = kNetworkBoardSize;
    std::size_t count_ = 0;
    std::vector<std::uint8_t> bytes_;
};

/// Shards named `<prefix>-NNNNN.cgsh` in a directory, sorted by name.
inline std::vector<std::filesystem::path> list_shards(const std::filesystem::path& dir, const std::string& prefix)
{
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(dir)) return out;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind(prefix + "-", 0) == 0 && e.path().extension() == ".cgsh")
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace crossgo

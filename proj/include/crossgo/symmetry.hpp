#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>

namespace crossgo {

/// One of the eight elements of the dihedral group of the square.
///
/// Id layout: bits 0-1 count clockwise quarter turns, bit 2 requests a
/// left-right mirror applied before the rotation. Id 0 is the identity.
class Symmetry {
public:
    static constexpr int kCount = 8;

    constexpr Symmetry() = default;
    constexpr explicit Symmetry(int id) : id_(static_cast<std::uint8_t>(id))
    {
        if (id < 0 || id >= kCount) throw std::out_of_range("symmetry id must be in 0..7");
    }

    static constexpr Symmetry identity() { return Symmetry(0); }
    static constexpr Symmetry rotate90() { return Symmetry(1); }

    constexpr int id() const { return id_; }
    constexpr int quarter_turns() const { return id_ & 3; }
    constexpr bool mirrored() const { return (id_ & 4) != 0; }

    /// Maps (row, col) on an n x n board.
    constexpr std::array<int, 2> apply(int row, int col, int n) const
    {
        if (mirrored()) col = n - 1 - col;
        for (int k = 0; k < quarter_turns(); ++k) {
            int r = col;
            int c = n - 1 - row;
            row = r;
            col = c;
        }
        return {row, col};
    }

    /// `then(b)` is the symmetry that applies *this first and b second.
    Symmetry then(Symmetry b) const { return Symmetry(table().compose[id_][b.id_]); }
    Symmetry inverse() const { return Symmetry(table().inverse[id_]); }

    constexpr bool operator==(const Symmetry&) const = default;

private:
    struct Table {
        std::array<std::array<std::uint8_t, kCount>, kCount> compose{};
        std::array<std::uint8_t, kCount> inverse{};
    };

    // Composition found by matching images of every point of a 3x3 probe.
    static constexpr Table build_table()
    {
        Table t{};
        for (int a = 0; a < kCount; ++a) {
            for (int b = 0; b < kCount; ++b) {
                for (int r = 0; r < kCount; ++r) {
                    bool same = true;
                    for (int p = 0; p < 9 && same; ++p) {
                        auto ab = Symmetry(a).apply(p / 3, p % 3, 3);
                        ab = Symmetry(b).apply(ab[0], ab[1], 3);
                        same = ab == Symmetry(r).apply(p / 3, p % 3, 3);
                    }
                    if (same) {
                        t.compose[a][b] = static_cast<std::uint8_t>(r);
                        break;
                    }
                }
            }
        }
        for (int a = 0; a < kCount; ++a)
            for (int b = 0; b < kCount; ++b)
                if (t.compose[a][b] == 0) t.inverse[a] = static_cast<std::uint8_t>(b);
        return t;
    }

    static const Table& table()
    {
        static constexpr Table t = build_table();
        return t;
    }

    std::uint8_t id_ = 0;
};

inline constexpr std::array<Symmetry, Symmetry::kCount> all_symmetries()
{
    std::array<Symmetry, Symmetry::kCount> out{};
    for (int i = 0; i < Symmetry::kCount; ++i) out[i] = Symmetry(i);
    return out;
}

}  // namespace crossgo

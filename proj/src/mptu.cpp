#include "speedsim/mptu.hpp"

#include <algorithm>

namespace speedsim {

uint64_t pack_word(Precision p, const int32_t* vals, int n) {
    int w = width_bits(p);
    int slots = pp(p);
    if (n > slots) throw ConfigError("pack of " + std::to_string(n) + " values exceeds word");
    uint64_t mask = (w == 64) ? ~0ull : ((1ull << w) - 1);
    uint64_t word = 0;
    for (int i = 0; i < n; ++i)
        word |= (static_cast<uint64_t>(static_cast<uint32_t>(vals[i])) & mask) <<
                (static_cast<unsigned>(i) * static_cast<unsigned>(w));
    return word;
}

void unpack_word(Precision p, uint64_t word, int32_t* out) {
    int w = width_bits(p);
    int slots = pp(p);
    uint64_t mask = (1ull << w) - 1;
    uint64_t sign = 1ull << (w - 1);
    for (int i = 0; i < slots; ++i) {
        uint64_t v = (word >> (static_cast<unsigned>(i) * static_cast<unsigned>(w))) & mask;
        out[i] = static_cast<int32_t>(static_cast<int64_t>((v ^ sign)) - static_cast<int64_t>(sign));
    }
}

uint32_t pe_mac(uint32_t acc, uint64_t a, uint64_t b, Precision p) {
    int32_t av[16], bv[16];
    unpack_word(p, a, av);
    unpack_word(p, b, bv);
    int slots = pp(p);
    for (int i = 0; i < slots; ++i)
        acc += static_cast<uint32_t>(static_cast<int64_t>(av[i]) * bv[i]);
    return acc;
}

MptuArray::MptuArray(int tile_r, int tile_c) : tile_r_(tile_r), tile_c_(tile_c) {
    if (tile_r < 1 || tile_c < 1) throw ConfigError("tile dimensions must be >= 1");
    acc_.assign(static_cast<size_t>(tile_r) * tile_c, 0);
}

size_t MptuArray::at(int r, int c) const {
    if (r < 0 || r >= tile_r_ || c < 0 || c >= tile_c_)
        throw ExecutionError("PE (" + std::to_string(r) + ", " + std::to_string(c) +
                             ") outside tile");
    return static_cast<size_t>(r) * tile_c_ + c;
}

void MptuArray::core_cycle(const uint64_t* rows, int r_cnt, const uint64_t* cols, int c_cnt) {
    if (r_cnt < 0 || r_cnt > tile_r_ || c_cnt < 0 || c_cnt > tile_c_)
        throw ExecutionError("valid rectangle exceeds tile");
    for (int r = 0; r < r_cnt; ++r)
        for (int c = 0; c < c_cnt; ++c) {
            size_t i = static_cast<size_t>(r) * tile_c_ + c;
            acc_[i] = pe_mac(acc_[i], rows[r], cols[c], precision_);
        }
}

uint32_t MptuArray::acc(int r, int c) const { return acc_[at(r, c)]; }

void MptuArray::load_acc(int r, int c, uint32_t value) { acc_[at(r, c)] = value; }

std::vector<uint32_t> MptuArray::drain() {
    std::vector<uint32_t> out = acc_;
    clear();
    return out;
}

void MptuArray::clear() { std::fill(acc_.begin(), acc_.end(), 0); }

}  // namespace speedsim

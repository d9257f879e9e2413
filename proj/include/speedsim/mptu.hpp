#pragma once

#include <cstdint>
#include <vector>

#include "speedsim/isa.hpp"

namespace speedsim {

// Pack n signed values (truncated to the precision's width) into one 64-bit
// datapath word, lowest sub-word first. Unused sub-words are zero.
uint64_t pack_word(Precision p, const int32_t* vals, int n);

// Sign-extend all pp(p) sub-words of a datapath word.
void unpack_word(Precision p, uint64_t word, int32_t* out);

// One processing element step: accumulate the pp(p) sub-word products of a
// and b into a 32-bit accumulator. Accumulation wraps modulo 2^32; signed
// results are the two's-complement reading of the returned bits.
uint32_t pe_mac(uint32_t acc, uint64_t a, uint64_t b, Precision p);

// tile_r x tile_c grid of processing elements. Each core cycle performs the
// outer product of a column of row operands against a row of column operands:
// every PE (r, c) MACs rows[r] with cols[c]. Smaller valid rectangles leave
// the remaining accumulators untouched.
class MptuArray {
public:
    MptuArray(int tile_r, int tile_c);

    int tile_r() const { return tile_r_; }
    int tile_c() const { return tile_c_; }

    void set_precision(Precision p) { precision_ = p; }
    Precision precision() const { return precision_; }

    void core_cycle(const uint64_t* rows, int r_cnt, const uint64_t* cols, int c_cnt);

    uint32_t acc(int r, int c) const;
    void load_acc(int r, int c, uint32_t value);

    // Row-major accumulator contents; clears the grid (the drain that ends a
    // convolutional-fold tile).
    std::vector<uint32_t> drain();
    void clear();

private:
    size_t at(int r, int c) const;

    int tile_r_;
    int tile_c_;
    Precision precision_ = Precision::Int16;
    std::vector<uint32_t> acc_;
};

}  // namespace speedsim

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "speedsim/mptu.hpp"

using namespace speedsim;

namespace {

uint64_t pack1(Precision p, int32_t v) { return pack_word(p, &v, 1); }

}  // namespace

TEST_CASE("packing is position-exact and sign-extends") {
    SUBCASE("int16 lanes") {
        int32_t vals[4] = {3, -1, 0x7fff, -0x8000};
        uint64_t w = pack_word(Precision::Int16, vals, 4);
        CHECK(w == 0x8000'7fff'ffff'0003ull);
        int32_t back[4];
        unpack_word(Precision::Int16, w, back);
        for (int i = 0; i < 4; ++i) CHECK(back[i] == vals[i]);
    }
    SUBCASE("int8 lanes") {
        int32_t vals[8] = {1, 2, 3, 4, -1, -2, 127, -128};
        uint64_t w = pack_word(Precision::Int8, vals, 8);
        int32_t back[8];
        unpack_word(Precision::Int8, w, back);
        for (int i = 0; i < 8; ++i) CHECK(back[i] == vals[i]);
    }
    SUBCASE("int4 lanes") {
        int32_t vals[16];
        for (int i = 0; i < 16; ++i) vals[i] = i - 8;  // full signed range -8..7
        uint64_t w = pack_word(Precision::Int4, vals, 16);
        int32_t back[16];
        unpack_word(Precision::Int4, w, back);
        for (int i = 0; i < 16; ++i) CHECK(back[i] == vals[i]);
    }
    SUBCASE("values truncate to width") {
        CHECK(pack1(Precision::Int4, 0x13) == pack1(Precision::Int4, 3));
        CHECK_THROWS_AS(pack_word(Precision::Int16, nullptr, 5), ConfigError);
    }
}

TEST_CASE("pe_mac worked examples") {
    // int16: 3 * 5 on top of acc 7 -> 22
    CHECK(pe_mac(7, pack1(Precision::Int16, 3), pack1(Precision::Int16, 5),
                 Precision::Int16) == 22);

    // int8: [1,2,3,4] . [5,6,7,8] = 5 + 12 + 21 + 32 = 70
    int32_t a8[4] = {1, 2, 3, 4}, b8[4] = {5, 6, 7, 8};
    CHECK(pe_mac(0, pack_word(Precision::Int8, a8, 4), pack_word(Precision::Int8, b8, 4),
                 Precision::Int8) == 70);

    // int4, signed: (-3)*5 + 7*(-2) = -29, read back as two's complement
    int32_t a4[2] = {-3, 7}, b4[2] = {5, -2};
    uint32_t r = pe_mac(0, pack_word(Precision::Int4, a4, 2), pack_word(Precision::Int4, b4, 2),
                        Precision::Int4);
    CHECK(static_cast<int32_t>(r) == -29);

    // accumulator wraps modulo 2^32
    CHECK(pe_mac(0xFFFFFFFFu, pack1(Precision::Int16, 1), pack1(Precision::Int16, 2),
                 Precision::Int16) == 1);
}

TEST_CASE("packed mac equals the scalar reference on random words") {
    std::mt19937_64 rng(0xACCu);
    for (Precision p : {Precision::Int4, Precision::Int8, Precision::Int16}) {
        for (int trial = 0; trial < 1000; ++trial) {
            uint64_t a = rng(), b = rng();
            uint32_t acc0 = static_cast<uint32_t>(rng());
            int32_t av[16], bv[16];
            unpack_word(p, a, av);
            unpack_word(p, b, bv);
            uint32_t want = acc0;
            for (int i = 0; i < pp(p); ++i)
                want += static_cast<uint32_t>(static_cast<int64_t>(av[i]) * bv[i]);
            CHECK(pe_mac(acc0, a, b, p) == want);
        }
    }
}

TEST_CASE("core cycle is an outer product with k-depth packing") {
    MptuArray mptu(2, 3);
    mptu.set_precision(Precision::Int16);

    // rows[r] and cols[c] each carry 4 k-slices; acc[r][c] must equal the
    // dot product over k.
    int32_t rvals[2][4] = {{1, 2, 3, 4}, {-1, 0, 2, -3}};
    int32_t cvals[3][4] = {{5, 6, 7, 8}, {1, 1, 1, 1}, {0, -2, 0, 9}};
    uint64_t rows[2], cols[3];
    for (int r = 0; r < 2; ++r) rows[r] = pack_word(Precision::Int16, rvals[r], 4);
    for (int c = 0; c < 3; ++c) cols[c] = pack_word(Precision::Int16, cvals[c], 4);

    mptu.core_cycle(rows, 2, cols, 3);
    mptu.core_cycle(rows, 2, cols, 3);  // second pass accumulates on top

    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 3; ++c) {
            int64_t dot = 0;
            for (int k = 0; k < 4; ++k) dot += rvals[r][k] * cvals[c][k];
            CHECK(static_cast<int32_t>(mptu.acc(r, c)) == 2 * dot);
        }
}

TEST_CASE("valid rectangle leaves idle PEs untouched") {
    MptuArray mptu(3, 3);
    mptu.set_precision(Precision::Int8);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) mptu.load_acc(r, c, 100 + 10 * r + c);

    uint64_t one = pack1(Precision::Int8, 1);
    uint64_t rows[2] = {one, one}, cols[1] = {pack1(Precision::Int8, 5)};
    mptu.core_cycle(rows, 2, cols, 1);

    CHECK(mptu.acc(0, 0) == 105);
    CHECK(mptu.acc(1, 0) == 115);
    CHECK(mptu.acc(2, 0) == 120);  // outside r_cnt
    CHECK(mptu.acc(0, 1) == 101);  // outside c_cnt
    CHECK(mptu.acc(2, 2) == 122);

    CHECK_THROWS_AS(mptu.core_cycle(rows, 4, cols, 1), ExecutionError);
    CHECK_THROWS_AS(mptu.acc(3, 0), ExecutionError);
}

TEST_CASE("drain is row-major and clears") {
    MptuArray mptu(2, 2);
    mptu.load_acc(0, 0, 1);
    mptu.load_acc(0, 1, 2);
    mptu.load_acc(1, 0, 3);
    mptu.load_acc(1, 1, 4);
    CHECK(mptu.drain() == std::vector<uint32_t>{1, 2, 3, 4});
    CHECK(mptu.drain() == std::vector<uint32_t>{0, 0, 0, 0});
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <random>

#include "doctest.h"
#include "speedsim/isa.hpp"

using namespace speedsim;

TEST_CASE("precision helpers") {
    for (Precision p : {Precision::Int4, Precision::Int8, Precision::Int16}) {
        CHECK(pp(p) * width_bits(p) == 64);
        CHECK(precision_from_bits(width_bits(p)) == p);
    }
    CHECK(pp(Precision::Int16) == 4);
    CHECK(pp(Precision::Int8) == 8);
    CHECK(pp(Precision::Int4) == 16);
    CHECK(std::string(to_string(Precision::Int4)) == "int4");
    CHECK_THROWS_AS(precision_from_bits(32), ConfigError);
    CHECK(strategy_from_string("ffcs") == Strategy::FFCS);
    CHECK(strategy_from_string(to_string(Strategy::CF)) == Strategy::CF);
    CHECK_THROWS_AS(strategy_from_string("WS"), ConfigError);
}

// Encodings of the baseline subset pinned against the RVV v1.0 spec tables,
// worked out by hand from the bit layouts (not produced by this codec).
TEST_CASE("baseline encodings match the architected words") {
    struct Fix {
        const char* text;
        uint32_t word;
    };
    const Fix fixtures[] = {
        {"vmacc.vv v8, v4, v0", 0xB6022457u},
        {"vsetvli x5, x10, e8,m1", 0x000572D7u},
        {"vle8.v v1, (x10)", 0x02050087u},
        {"vle16.v v4, (a0)", 0x02055207u},
        {"vse16.v v4, (a1)", 0x0205D227u},
        {"vse32.v v2, (x3)", 0x0201E127u},
        {"vse8.v v0, (x0)", 0x02000027u},
    };
    for (const auto& f : fixtures) {
        CAPTURE(f.text);
        auto prog = assemble(f.text);
        REQUIRE(prog.size() == 1);
        CHECK(encode_instruction(prog[0]) == f.word);
        CHECK(decode_instruction(f.word) == prog[0]);
    }
}

TEST_CASE("custom encodings stay inside custom-0") {
    struct Fix {
        const char* text;
        uint32_t word;
    };
    const Fix fixtures[] = {
        {"vsacfg x5, 77, 1", 0x04D0828Bu},
        {"vsald8.v v2, (x10)", 0x0205110Bu},
        {"vsam.vv v8, v4, v2", 0x0022240Bu},
        {"vsac.vv v8, v4, v2", 0x0022340Bu},
    };
    for (const auto& f : fixtures) {
        CAPTURE(f.text);
        auto prog = assemble(f.text);
        REQUIRE(prog.size() == 1);
        uint32_t w = encode_instruction(prog[0]);
        CHECK(w == f.word);
        CHECK((w & 0x7f) == 0x0b);
        CHECK(decode_instruction(w) == prog[0]);
    }
}

TEST_CASE("csr codec") {
    SUBCASE("mm int16 defaults") {
        VsaCsr csr = decode_csr(0b000000100, 1);
        CHECK(csr == VsaCsr{Precision::Int16, 1, Strategy::MM, 1, 1});
    }
    SUBCASE("ffcs int8 k3 n2 s2") {
        VsaCsr csr = decode_csr(0b001001101, 0b01010);
        CHECK(csr == VsaCsr{Precision::Int8, 3, Strategy::FFCS, 2, 2});
    }
    SUBCASE("mm normalizes the kernel field") {
        VsaCsr csr = decode_csr(0b000011100, 1);  // kernel field = 7, strategy = MM
        CHECK(csr.kernel_size == 1);
    }
    SUBCASE("round trip over every legal value") {
        for (int prec = 0; prec < 3; ++prec)
            for (int strat = 0; strat < 4; ++strat)
                for (int k = 1; k <= 15; ++k)
                    for (int n = 1; n <= 7; ++n)
                        for (int s = 1; s <= 4; ++s) {
                            VsaCsr csr{static_cast<Precision>(2 - prec), k,
                                       static_cast<Strategy>(strat), n, s};
                            uint16_t zimm;
                            uint8_t uimm;
                            encode_csr(csr, zimm, uimm);
                            VsaCsr back = decode_csr(zimm, uimm);
                            if (csr.strategy == Strategy::MM) csr.kernel_size = 1;
                            CHECK(back == csr);
                        }
    }
    SUBCASE("reserved fields reject") {
        CHECK_THROWS_AS(decode_csr(0b000000011, 1), ConfigError);  // precision 0b11
        CHECK_THROWS_AS(decode_csr(0b001000001, 1), ConfigError);  // kernel field 0
        CHECK_THROWS_AS(decode_csr(0b100000101, 1), ConfigError);  // strategy >= 4
        CHECK_THROWS_AS(decode_csr(0b000000100, 0b01000), ConfigError);  // N 0
        CHECK_THROWS_AS(decode_csr(512, 1), ConfigError);
        VsaCsr bad{Precision::Int8, 16, Strategy::FF, 1, 1};
        uint16_t z;
        uint8_t u;
        CHECK_THROWS_AS(encode_csr(bad, z, u), ConfigError);
        bad = {Precision::Int8, 3, Strategy::FF, 8, 1};
        CHECK_THROWS_AS(encode_csr(bad, z, u), ConfigError);
        bad = {Precision::Int8, 3, Strategy::FF, 1, 5};
        CHECK_THROWS_AS(encode_csr(bad, z, u), ConfigError);
    }
}

namespace {

Instruction random_instruction(std::mt19937& rng) {
    auto reg = [&] { return static_cast<uint8_t>(rng() % 32); };
    Instruction inst;
    switch (rng() % 8) {
        case 0:
            inst.mnemonic = Mnemonic::VSACFG;
            inst.rd = reg();
            inst.rs1 = 0;
            inst.zimm = static_cast<uint16_t>(rng() % 512);
            inst.uimm = static_cast<uint8_t>(rng() % 32);
            break;
        case 1:
            inst.mnemonic = Mnemonic::VSALD;
            inst.vd = reg();
            inst.rs1 = reg();
            inst.ew = static_cast<uint8_t>(4u << (rng() % 3));
            break;
        case 2:
            inst.mnemonic = Mnemonic::VSAM;
            inst.vd = reg();
            inst.vs1 = reg();
            inst.vs2 = reg();
            break;
        case 3:
            inst.mnemonic = Mnemonic::VSAC;
            inst.vd = reg();
            inst.vs1 = reg();
            inst.vs2 = reg();
            break;
        case 4:
            inst.mnemonic = Mnemonic::VSETVLI;
            inst.rd = reg();
            inst.rs1 = reg();
            inst.zimm = static_cast<uint16_t>(rng() % 512);
            break;
        case 5:
            inst.mnemonic = Mnemonic::VLE;
            inst.vd = reg();
            inst.rs1 = reg();
            inst.ew = static_cast<uint8_t>(8u << (rng() % 2));
            break;
        case 6:
            inst.mnemonic = Mnemonic::VSE;
            inst.vd = reg();
            inst.rs1 = reg();
            inst.ew = static_cast<uint8_t>(8u << (rng() % 3));
            break;
        default:
            inst.mnemonic = Mnemonic::VMACC;
            inst.vd = reg();
            inst.vs1 = reg();
            inst.vs2 = reg();
            break;
    }
    return inst;
}

}  // namespace

TEST_CASE("10k random instructions survive both round trips") {
    std::mt19937 rng(0xC0FFEEu);
    for (int i = 0; i < 10000; ++i) {
        Instruction inst = random_instruction(rng);
        CAPTURE(disassemble(inst));
        Instruction back = decode_instruction(encode_instruction(inst));
        CHECK(back == inst);
        auto prog = assemble(disassemble(inst));
        REQUIRE(prog.size() == 1);
        CHECK(prog[0] == inst);
    }
}

TEST_CASE("random words either reject or re-encode identically") {
    std::mt19937 rng(0xDECAFu);
    int accepted = 0;
    for (int i = 0; i < 200000; ++i) {
        uint32_t w = rng();
        try {
            Instruction inst = decode_instruction(w);
            CHECK(encode_instruction(inst) == w);
            ++accepted;
        } catch (const IllegalInstruction&) {
        }
    }
    // The encoding space is sparse, but random sampling should still hit it.
    CHECK(accepted > 0);
    CHECK_THROWS_AS(decode_instruction(0), IllegalInstruction);
    CHECK_THROWS_AS(decode_instruction(0x0000400Bu), IllegalInstruction);  // funct3 4, custom-0
}

TEST_CASE("assembler accepts a full listing") {
    const char* text =
        "# tile config then one load/compute/store pass\n"
        "vsetvli x1, x2, e16,m1\n"
        "\n"
        "vsacfg x5, 0b001001101, 0x0A   # int8 FFCS k3, N=2 s=2\n"
        "vsald16.v v0, (a0)\n"
        "vsam.vv v8, v0, v4\n"
        "vse32.v v8, (a1)\n";
    auto prog = assemble(text);
    REQUIRE(prog.size() == 5);
    CHECK(prog[0].mnemonic == Mnemonic::VSETVLI);
    CHECK(prog[0].zimm == 0b001000);
    CHECK(prog[1].mnemonic == Mnemonic::VSACFG);
    CHECK(prog[1].zimm == 77);
    CHECK(prog[1].uimm == 10);
    CHECK(prog[2].rs1 == 10);
    CHECK(vsald_precision(prog[2]) == Precision::Int16);
    CHECK(prog[3].vd == 8);
    CHECK(prog[4].mnemonic == Mnemonic::VSE);
    CHECK(prog[4].ew == 32);
    CHECK(prog[4].rs1 == 11);

    // Disassembly is a fixpoint: canonical text re-assembles to the same
    // program and re-prints to the same text.
    std::string canon = disassemble(prog);
    auto again = assemble(canon);
    CHECK(again == prog);
    CHECK(disassemble(again) == canon);
}

TEST_CASE("assembler reports 1-based line numbers") {
    auto line_of = [](const std::string& text) {
        try {
            assemble(text);
        } catch (const AssemblyError& e) {
            return e.line;
        }
        return -1;
    };
    CHECK(line_of("vmacc.vv v1, v2, v3\n\nvsub.vv v1, v2, v3\n") == 3);
    CHECK(line_of("vle16.v v1, (v2)\n") == 1);           // vector reg as address base
    CHECK(line_of("# only a comment\nvsacfg x1, 512, 0\n") == 2);  // zimm too wide
    CHECK(line_of("vsacfg x1, 7, 32\n") == 1);           // uimm too wide
    CHECK(line_of("vsam.vv v1, v2\n") == 1);             // missing operand
    CHECK(line_of("vsetvli x1, x2, e128,m1\n") == 1);    // bad sew
    CHECK(line_of("vsetvli x1, x2, e8,m3\n") == 1);      // bad lmul
    CHECK(line_of("vle16.v v1, x10\n") == 1);            // missing parens
    CHECK(line_of("vle16.v v40, (x10)\n") == 1);         // vector reg out of range
    CHECK(line_of("vmacc.vv v1, v2, v3\n") == -1);       // sanity: valid text passes
}

TEST_CASE("abi aliases and immediate bases are interchangeable") {
    CHECK(assemble("vle16.v v4, (a0)") == assemble("vle16.v v4, (x10)"));
    CHECK(assemble("vsacfg x5, 0x4d, 0b00001") == assemble("vsacfg x5, 77, 1"));
    CHECK(assemble("vsetvli x1, x2, 8") == assemble("vsetvli x1, x2, e16,m1"));
    CHECK_THROWS_AS(assemble("vle16.v v4, (a8)"), AssemblyError);
}

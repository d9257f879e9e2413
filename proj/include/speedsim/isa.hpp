#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "speedsim/errors.hpp"

namespace speedsim {

// Operand precision of the tensor unit. PP sub-words share one 64-bit
// datapath word, so pp(p) * width_bits(p) == 64 always.
enum class Precision : uint8_t { Int4 = 0, Int8 = 1, Int16 = 2 };

constexpr int width_bits(Precision p) {
    switch (p) {
        case Precision::Int4: return 4;
        case Precision::Int8: return 8;
        case Precision::Int16: return 16;
    }
    return 16;
}

// Packing factor: how many sub-words one 64-bit operand carries.
constexpr int pp(Precision p) { return 64 / width_bits(p); }

const char* to_string(Precision p);
Precision precision_from_bits(int bits);  // 4/8/16 -> enum, else ConfigError

// Dataflow strategy selected through VSACFG. FF is the only strategy legal
// for depth-wise convolutions.
enum class Strategy : uint8_t { MM = 0, FFCS = 1, CF = 2, FF = 3 };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);  // ConfigError on unknown

enum class Mnemonic : uint8_t {
    VSACFG,
    VSALD,
    VSAM,
    VSAC,
    VSETVLI,
    VLE,
    VSE,
    VMACC,
};

const char* to_string(Mnemonic m);

// One decoded instruction. Fields that a given mnemonic does not use stay at
// their zero default so that decode(encode(i)) == i holds field-for-field.
struct Instruction {
    Mnemonic mnemonic = Mnemonic::VSACFG;
    uint8_t rd = 0;    // scalar dest (VSACFG, VSETVLI)
    uint8_t rs1 = 0;   // scalar source (address base / AVL)
    uint8_t vd = 0;    // vector dest (also store-data reg for VSE)
    uint8_t vs1 = 0;
    uint8_t vs2 = 0;
    uint8_t ew = 0;     // element width in bits: VSALD 4/8/16, VLE 8/16, VSE 8/16/32
    uint16_t zimm = 0;  // 9-bit immediate (VSACFG config / VSETVLI vtype)
    uint8_t uimm = 0;   // 5-bit immediate (VSACFG)

    bool operator==(const Instruction&) const = default;
};

// Element width of a VSALD variant as a tensor-unit precision.
Precision vsald_precision(const Instruction& inst);

// Tensor-unit configuration state written by VSACFG.
struct VsaCsr {
    Precision precision = Precision::Int16;
    int kernel_size = 1;  // 1..15; normalized to 1 when strategy == MM
    Strategy strategy = Strategy::MM;
    int stage_param_n = 1;  // N, >= 1 (FFCS group length)
    int stride = 1;         // >= 1

    bool operator==(const VsaCsr&) const = default;
};

// zimm/uimm layout for VSACFG:
//   zimm[1:0] precision (00=Int16 01=Int8 10=Int4, 11 reserved)
//   zimm[5:2] kernel_size (1..15, 0 reserved)
//   zimm[8:6] strategy (000=MM 001=FFCS 010=CF 011=FF, rest reserved)
//   uimm[2:0] stage_param_n (1..7, 0 reserved)
//   uimm[4:3] stride - 1
VsaCsr decode_csr(uint16_t zimm, uint8_t uimm);
void encode_csr(const VsaCsr& csr, uint16_t& zimm, uint8_t& uimm);

// 32-bit encodings. Custom ops live in the custom-0 major opcode (0x0b) with
// funct3 selecting {VSACFG=0, VSALD=1, VSAM=2, VSAC=3}; the baseline subset
// uses the standard RVV v1.0 encodings.
uint32_t encode_instruction(const Instruction& inst);       // EncodingError on bad fields
Instruction decode_instruction(uint32_t word);              // IllegalInstruction if unknown

// Assembly text <-> instructions. assemble() reports errors with 1-based
// line numbers; '#' starts a comment; blank lines are ignored.
std::vector<Instruction> assemble(const std::string& text);
std::string disassemble(const Instruction& inst);
std::string disassemble(const std::vector<Instruction>& prog);

}  // namespace speedsim

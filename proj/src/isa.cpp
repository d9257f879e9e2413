#include "speedsim/isa.hpp"

#include <cstdio>

namespace speedsim {

namespace {

constexpr uint32_t kOpcCustom0 = 0x0b;  // custom-0 major opcode
constexpr uint32_t kOpcLoadFp = 0x07;   // RVV loads share LOAD-FP
constexpr uint32_t kOpcStoreFp = 0x27;  // RVV stores share STORE-FP
constexpr uint32_t kOpcOpV = 0x57;      // OP-V

constexpr uint32_t kF3Vsacfg = 0;
constexpr uint32_t kF3Vsald = 1;
constexpr uint32_t kF3Vsam = 2;
constexpr uint32_t kF3Vsac = 3;

constexpr uint32_t kF3Opcfg = 7;  // vsetvli
constexpr uint32_t kF3Opmvv = 2;  // vmacc.vv
constexpr uint32_t kFunct6Vmacc = 0x2d;

uint32_t bits(uint32_t w, int hi, int lo) { return (w >> lo) & ((1u << (hi - lo + 1)) - 1); }

void require(bool ok, const char* msg) {
    if (!ok) throw EncodingError(msg);
}

// RVV memory-op width field (funct3 of LOAD-FP/STORE-FP).
uint32_t mem_width_code(int ew) {
    switch (ew) {
        case 8: return 0b000;
        case 16: return 0b101;
        case 32: return 0b110;
        default: throw EncodingError("unsupported element width " + std::to_string(ew));
    }
}

int mem_width_from_code(uint32_t code) {
    switch (code) {
        case 0b000: return 8;
        case 0b101: return 16;
        case 0b110: return 32;
        default: return -1;
    }
}

// VSALD packs its width into bits 26:25 (00=16, 01=8, 10=4).
uint32_t vsald_width_code(int ew) {
    switch (ew) {
        case 16: return 0b00;
        case 8: return 0b01;
        case 4: return 0b10;
        default: throw EncodingError("vsald width must be 4, 8 or 16");
    }
}

int vsald_width_from_code(uint32_t code) {
    switch (code) {
        case 0b00: return 16;
        case 0b01: return 8;
        case 0b10: return 4;
        default: return -1;
    }
}

}  // namespace

const char* to_string(Precision p) {
    switch (p) {
        case Precision::Int4: return "int4";
        case Precision::Int8: return "int8";
        case Precision::Int16: return "int16";
    }
    return "?";
}

Precision precision_from_bits(int bits) {
    switch (bits) {
        case 4: return Precision::Int4;
        case 8: return Precision::Int8;
        case 16: return Precision::Int16;
        default: throw ConfigError("no such precision: " + std::to_string(bits) + " bits");
    }
}

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::MM: return "MM";
        case Strategy::FFCS: return "FFCS";
        case Strategy::CF: return "CF";
        case Strategy::FF: return "FF";
    }
    return "?";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "MM" || s == "mm") return Strategy::MM;
    if (s == "FFCS" || s == "ffcs") return Strategy::FFCS;
    if (s == "CF" || s == "cf") return Strategy::CF;
    if (s == "FF" || s == "ff") return Strategy::FF;
    throw ConfigError("no such strategy: " + s);
}

const char* to_string(Mnemonic m) {
    switch (m) {
        case Mnemonic::VSACFG: return "vsacfg";
        case Mnemonic::VSALD: return "vsald";
        case Mnemonic::VSAM: return "vsam";
        case Mnemonic::VSAC: return "vsac";
        case Mnemonic::VSETVLI: return "vsetvli";
        case Mnemonic::VLE: return "vle";
        case Mnemonic::VSE: return "vse";
        case Mnemonic::VMACC: return "vmacc";
    }
    return "?";
}

Precision vsald_precision(const Instruction& inst) {
    if (inst.mnemonic != Mnemonic::VSALD) throw EncodingError("not a vsald instruction");
    return precision_from_bits(inst.ew);
}

VsaCsr decode_csr(uint16_t zimm, uint8_t uimm) {
    if (zimm >= 512) throw ConfigError("zimm exceeds 9 bits");
    if (uimm >= 32) throw ConfigError("uimm exceeds 5 bits");
    VsaCsr csr;
    uint32_t prec = zimm & 0x3;
    uint32_t kernel = (zimm >> 2) & 0xf;
    uint32_t strat = (zimm >> 6) & 0x7;
    uint32_t n = uimm & 0x7;
    uint32_t stride_m1 = (uimm >> 3) & 0x3;
    switch (prec) {
        case 0: csr.precision = Precision::Int16; break;
        case 1: csr.precision = Precision::Int8; break;
        case 2: csr.precision = Precision::Int4; break;
        default: throw ConfigError("reserved precision code 0b11");
    }
    if (kernel == 0) throw ConfigError("kernel size field is 0 (reserved)");
    if (strat > 3) throw ConfigError("reserved strategy code " + std::to_string(strat));
    if (n == 0) throw ConfigError("stage parameter N field is 0 (reserved)");
    csr.strategy = static_cast<Strategy>(strat);
    // MM has no spatial kernel; the field is ignored and the CSR normalized.
    csr.kernel_size = csr.strategy == Strategy::MM ? 1 : static_cast<int>(kernel);
    csr.stage_param_n = static_cast<int>(n);
    csr.stride = static_cast<int>(stride_m1) + 1;
    return csr;
}

void encode_csr(const VsaCsr& csr, uint16_t& zimm, uint8_t& uimm) {
    int kernel = csr.strategy == Strategy::MM ? 1 : csr.kernel_size;
    if (kernel < 1 || kernel > 15)
        throw ConfigError("kernel size " + std::to_string(kernel) + " out of range 1..15");
    if (csr.stage_param_n < 1 || csr.stage_param_n > 7)
        throw ConfigError("stage parameter N " + std::to_string(csr.stage_param_n) +
                          " out of range 1..7");
    if (csr.stride < 1 || csr.stride > 4)
        throw ConfigError("stride " + std::to_string(csr.stride) + " out of range 1..4");
    uint32_t prec;
    switch (csr.precision) {
        case Precision::Int16: prec = 0; break;
        case Precision::Int8: prec = 1; break;
        default: prec = 2; break;
    }
    zimm = static_cast<uint16_t>((static_cast<uint32_t>(csr.strategy) << 6) |
                                 (static_cast<uint32_t>(kernel) << 2) | prec);
    uimm = static_cast<uint8_t>(((csr.stride - 1) << 3) | csr.stage_param_n);
}

uint32_t encode_instruction(const Instruction& inst) {
    require(inst.rd < 32 && inst.rs1 < 32, "scalar register out of range");
    require(inst.vd < 32 && inst.vs1 < 32 && inst.vs2 < 32, "vector register out of range");
    switch (inst.mnemonic) {
        case Mnemonic::VSACFG: {
            require(inst.zimm < 512, "zimm exceeds 9 bits");
            require(inst.uimm < 32, "uimm exceeds 5 bits");
            return (static_cast<uint32_t>(inst.zimm) << 20) |
                   (static_cast<uint32_t>(inst.uimm) << 15) | (kF3Vsacfg << 12) |
                   (static_cast<uint32_t>(inst.rd) << 7) | kOpcCustom0;
        }
        case Mnemonic::VSALD:
            return (vsald_width_code(inst.ew) << 25) | (static_cast<uint32_t>(inst.rs1) << 15) |
                   (kF3Vsald << 12) | (static_cast<uint32_t>(inst.vd) << 7) | kOpcCustom0;
        case Mnemonic::VSAM:
        case Mnemonic::VSAC: {
            uint32_t f3 = inst.mnemonic == Mnemonic::VSAM ? kF3Vsam : kF3Vsac;
            return (static_cast<uint32_t>(inst.vs2) << 20) |
                   (static_cast<uint32_t>(inst.vs1) << 15) | (f3 << 12) |
                   (static_cast<uint32_t>(inst.vd) << 7) | kOpcCustom0;
        }
        case Mnemonic::VSETVLI:
            require(inst.zimm < 512, "vtype immediate exceeds 9 bits");
            return (static_cast<uint32_t>(inst.zimm) << 20) |
                   (static_cast<uint32_t>(inst.rs1) << 15) | (kF3Opcfg << 12) |
                   (static_cast<uint32_t>(inst.rd) << 7) | kOpcOpV;
        case Mnemonic::VLE:
            require(inst.ew == 8 || inst.ew == 16, "vle width must be 8 or 16");
            return (1u << 25) | (static_cast<uint32_t>(inst.rs1) << 15) |
                   (mem_width_code(inst.ew) << 12) | (static_cast<uint32_t>(inst.vd) << 7) |
                   kOpcLoadFp;
        case Mnemonic::VSE:
            require(inst.ew == 8 || inst.ew == 16 || inst.ew == 32,
                    "vse width must be 8, 16 or 32");
            return (1u << 25) | (static_cast<uint32_t>(inst.rs1) << 15) |
                   (mem_width_code(inst.ew) << 12) | (static_cast<uint32_t>(inst.vd) << 7) |
                   kOpcStoreFp;
        case Mnemonic::VMACC:
            return (kFunct6Vmacc << 26) | (1u << 25) | (static_cast<uint32_t>(inst.vs2) << 20) |
                   (static_cast<uint32_t>(inst.vs1) << 15) | (kF3Opmvv << 12) |
                   (static_cast<uint32_t>(inst.vd) << 7) | kOpcOpV;
    }
    throw EncodingError("unknown mnemonic");
}

Instruction decode_instruction(uint32_t word) {
    if (word == 0) throw IllegalInstruction("all-zero instruction word");
    Instruction inst;
    uint32_t opc = bits(word, 6, 0);
    uint32_t f3 = bits(word, 14, 12);
    switch (opc) {
        case kOpcCustom0:
            switch (f3) {
                case kF3Vsacfg:
                    if (bits(word, 31, 29) != 0) break;
                    inst.mnemonic = Mnemonic::VSACFG;
                    inst.rd = static_cast<uint8_t>(bits(word, 11, 7));
                    inst.uimm = static_cast<uint8_t>(bits(word, 19, 15));
                    inst.zimm = static_cast<uint16_t>(bits(word, 28, 20));
                    return inst;
                case kF3Vsald: {
                    if (bits(word, 31, 27) != 0 || bits(word, 24, 20) != 0) break;
                    int ew = vsald_width_from_code(bits(word, 26, 25));
                    if (ew < 0) break;
                    inst.mnemonic = Mnemonic::VSALD;
                    inst.ew = static_cast<uint8_t>(ew);
                    inst.vd = static_cast<uint8_t>(bits(word, 11, 7));
                    inst.rs1 = static_cast<uint8_t>(bits(word, 19, 15));
                    return inst;
                }
                case kF3Vsam:
                case kF3Vsac:
                    if (bits(word, 31, 25) != 0) break;
                    inst.mnemonic = f3 == kF3Vsam ? Mnemonic::VSAM : Mnemonic::VSAC;
                    inst.vd = static_cast<uint8_t>(bits(word, 11, 7));
                    inst.vs1 = static_cast<uint8_t>(bits(word, 19, 15));
                    inst.vs2 = static_cast<uint8_t>(bits(word, 24, 20));
                    return inst;
                default: break;
            }
            break;
        case kOpcOpV:
            if (f3 == kF3Opcfg) {
                // vsetvli has bit 31 clear; we only accept vtype values that fit
                // the 9-bit immediate this ISA subset uses.
                if (bits(word, 31, 31) != 0 || bits(word, 30, 29) != 0) break;
                inst.mnemonic = Mnemonic::VSETVLI;
                inst.rd = static_cast<uint8_t>(bits(word, 11, 7));
                inst.rs1 = static_cast<uint8_t>(bits(word, 19, 15));
                inst.zimm = static_cast<uint16_t>(bits(word, 28, 20));
                return inst;
            }
            if (f3 == kF3Opmvv && bits(word, 31, 26) == kFunct6Vmacc && bits(word, 25, 25) == 1) {
                inst.mnemonic = Mnemonic::VMACC;
                inst.vd = static_cast<uint8_t>(bits(word, 11, 7));
                inst.vs1 = static_cast<uint8_t>(bits(word, 19, 15));
                inst.vs2 = static_cast<uint8_t>(bits(word, 24, 20));
                return inst;
            }
            break;
        case kOpcLoadFp:
        case kOpcStoreFp: {
            // unit-stride unmasked only: nf=0, mew=0, mop=0, vm=1, lumop/sumop=0
            if (bits(word, 31, 26) != 0 || bits(word, 25, 25) != 1 || bits(word, 24, 20) != 0)
                break;
            int ew = mem_width_from_code(f3);
            if (ew < 0) break;
            if (opc == kOpcLoadFp && ew == 32) break;  // vle32 not in this subset
            inst.mnemonic = opc == kOpcLoadFp ? Mnemonic::VLE : Mnemonic::VSE;
            inst.ew = static_cast<uint8_t>(ew);
            inst.vd = static_cast<uint8_t>(bits(word, 11, 7));
            inst.rs1 = static_cast<uint8_t>(bits(word, 19, 15));
            return inst;
        }
        default: break;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%08x", word);
    throw IllegalInstruction(std::string("cannot decode word ") + buf);
}

}  // namespace speedsim

#include <algorithm>
#include <cctype>
#include <sstream>

#include "speedsim/isa.hpp"

namespace speedsim {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_operands(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    cur = trim(cur);
    if (!cur.empty() || !out.empty()) out.push_back(cur);
    return out;
}

[[noreturn]] void fail(int line, const std::string& msg) { throw AssemblyError(line, msg); }

uint8_t parse_xreg(const std::string& tok, int line) {
    std::string t = trim(tok);
    if (t.size() >= 2 && t[0] == 'a') {
        // ABI aliases a0..a7 -> x10..x17
        if (t.size() == 2 && t[1] >= '0' && t[1] <= '7')
            return static_cast<uint8_t>(10 + (t[1] - '0'));
        fail(line, "bad scalar register '" + t + "'");
    }
    if (t.size() < 2 || t[0] != 'x') fail(line, "expected scalar register, got '" + t + "'");
    for (size_t i = 1; i < t.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(t[i])))
            fail(line, "bad scalar register '" + t + "'");
    int n = std::stoi(t.substr(1));
    if (n > 31) fail(line, "scalar register x" + std::to_string(n) + " out of range");
    return static_cast<uint8_t>(n);
}

uint8_t parse_vreg(const std::string& tok, int line) {
    std::string t = trim(tok);
    if (t.size() < 2 || t[0] != 'v') fail(line, "expected vector register, got '" + t + "'");
    for (size_t i = 1; i < t.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(t[i])))
            fail(line, "bad vector register '" + t + "'");
    int n = std::stoi(t.substr(1));
    if (n > 31) fail(line, "vector register v" + std::to_string(n) + " out of range");
    return static_cast<uint8_t>(n);
}

// "(x10)" / "(a0)" base-address operand.
uint8_t parse_addr(const std::string& tok, int line) {
    std::string t = trim(tok);
    if (t.size() < 3 || t.front() != '(' || t.back() != ')')
        fail(line, "expected (reg) address operand, got '" + t + "'");
    return parse_xreg(t.substr(1, t.size() - 2), line);
}

uint32_t parse_imm(const std::string& tok, int line, uint32_t limit, const char* what) {
    std::string t = trim(tok);
    int base = 10;
    size_t pos = 0;
    if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
        base = 16;
        pos = 2;
    } else if (t.size() > 2 && t[0] == '0' && (t[1] == 'b' || t[1] == 'B')) {
        base = 2;
        pos = 2;
    }
    if (pos >= t.size()) fail(line, std::string("bad ") + what + " '" + t + "'");
    uint64_t val = 0;
    for (size_t i = pos; i < t.size(); ++i) {
        int d;
        char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t[i])));
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = 10 + (c - 'a');
        else d = -1;
        if (d < 0 || d >= base) fail(line, std::string("bad ") + what + " '" + t + "'");
        val = val * base + static_cast<uint64_t>(d);
        if (val > 0xffffffffull) fail(line, std::string(what) + " '" + t + "' out of range");
    }
    if (val >= limit)
        fail(line, std::string(what) + " " + std::to_string(val) + " exceeds maximum " +
                       std::to_string(limit - 1));
    return static_cast<uint32_t>(val);
}

// "e8,m1" arrives as two comma-split tokens; returns the vtype immediate.
uint16_t parse_vtype(const std::string& etok, const std::string& mtok, int line) {
    std::string e = trim(etok), m = trim(mtok);
    int sew, lmul;
    if (e == "e8") sew = 0;
    else if (e == "e16") sew = 1;
    else if (e == "e32") sew = 2;
    else if (e == "e64") sew = 3;
    else fail(line, "bad element width '" + e + "' (expected e8/e16/e32/e64)");
    if (m == "m1") lmul = 0;
    else if (m == "m2") lmul = 1;
    else if (m == "m4") lmul = 2;
    else if (m == "m8") lmul = 3;
    else fail(line, "bad group multiplier '" + m + "' (expected m1/m2/m4/m8)");
    return static_cast<uint16_t>((sew << 3) | lmul);
}

void expect_count(const std::vector<std::string>& ops, size_t n, int line, const char* mnem) {
    if (ops.size() != n)
        fail(line, std::string(mnem) + " expects " + std::to_string(n) + " operands, got " +
                       std::to_string(ops.size()));
}

Instruction parse_line(const std::string& mnem, const std::vector<std::string>& ops, int line) {
    Instruction inst;
    if (mnem == "vsacfg") {
        expect_count(ops, 3, line, "vsacfg");
        inst.mnemonic = Mnemonic::VSACFG;
        inst.rd = parse_xreg(ops[0], line);
        inst.zimm = static_cast<uint16_t>(parse_imm(ops[1], line, 512, "zimm"));
        inst.uimm = static_cast<uint8_t>(parse_imm(ops[2], line, 32, "uimm"));
        return inst;
    }
    if (mnem == "vsald16.v" || mnem == "vsald8.v" || mnem == "vsald4.v") {
        expect_count(ops, 2, line, "vsald");
        inst.mnemonic = Mnemonic::VSALD;
        inst.ew = mnem == "vsald16.v" ? 16 : (mnem == "vsald8.v" ? 8 : 4);
        inst.vd = parse_vreg(ops[0], line);
        inst.rs1 = parse_addr(ops[1], line);
        return inst;
    }
    if (mnem == "vsam.vv" || mnem == "vsac.vv") {
        expect_count(ops, 3, line, mnem.c_str());
        inst.mnemonic = mnem == "vsam.vv" ? Mnemonic::VSAM : Mnemonic::VSAC;
        inst.vd = parse_vreg(ops[0], line);
        inst.vs1 = parse_vreg(ops[1], line);
        inst.vs2 = parse_vreg(ops[2], line);
        return inst;
    }
    if (mnem == "vsetvli") {
        inst.mnemonic = Mnemonic::VSETVLI;
        if (ops.size() == 4) {
            inst.rd = parse_xreg(ops[0], line);
            inst.rs1 = parse_xreg(ops[1], line);
            inst.zimm = parse_vtype(ops[2], ops[3], line);
        } else if (ops.size() == 3) {
            inst.rd = parse_xreg(ops[0], line);
            inst.rs1 = parse_xreg(ops[1], line);
            inst.zimm = static_cast<uint16_t>(parse_imm(ops[2], line, 512, "vtype"));
        } else {
            fail(line, "vsetvli expects rd, rs1, eN,mN (or a numeric vtype)");
        }
        return inst;
    }
    if (mnem == "vle8.v" || mnem == "vle16.v") {
        expect_count(ops, 2, line, "vle");
        inst.mnemonic = Mnemonic::VLE;
        inst.ew = mnem == "vle8.v" ? 8 : 16;
        inst.vd = parse_vreg(ops[0], line);
        inst.rs1 = parse_addr(ops[1], line);
        return inst;
    }
    if (mnem == "vse8.v" || mnem == "vse16.v" || mnem == "vse32.v") {
        expect_count(ops, 2, line, "vse");
        inst.mnemonic = Mnemonic::VSE;
        inst.ew = mnem == "vse8.v" ? 8 : (mnem == "vse16.v" ? 16 : 32);
        inst.vd = parse_vreg(ops[0], line);
        inst.rs1 = parse_addr(ops[1], line);
        return inst;
    }
    if (mnem == "vmacc.vv") {
        expect_count(ops, 3, line, "vmacc.vv");
        inst.mnemonic = Mnemonic::VMACC;
        inst.vd = parse_vreg(ops[0], line);
        inst.vs1 = parse_vreg(ops[1], line);
        inst.vs2 = parse_vreg(ops[2], line);
        return inst;
    }
    fail(line, "unknown mnemonic '" + mnem + "'");
}

}  // namespace

std::vector<Instruction> assemble(const std::string& text) {
    std::vector<Instruction> prog;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (size_t hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::string s = trim(raw);
        if (s.empty()) continue;
        size_t sp = s.find_first_of(" \t");
        std::string mnem = s.substr(0, sp);
        std::transform(mnem.begin(), mnem.end(), mnem.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        std::vector<std::string> ops;
        if (sp != std::string::npos) ops = split_operands(s.substr(sp + 1));
        prog.push_back(parse_line(mnem, ops, line));
    }
    return prog;
}

std::string disassemble(const Instruction& inst) {
    std::ostringstream out;
    auto x = [](uint8_t r) { return "x" + std::to_string(r); };
    auto v = [](uint8_t r) { return "v" + std::to_string(r); };
    switch (inst.mnemonic) {
        case Mnemonic::VSACFG:
            out << "vsacfg " << x(inst.rd) << ", " << inst.zimm << ", "
                << static_cast<int>(inst.uimm);
            break;
        case Mnemonic::VSALD:
            out << "vsald" << static_cast<int>(inst.ew) << ".v " << v(inst.vd) << ", ("
                << x(inst.rs1) << ")";
            break;
        case Mnemonic::VSAM:
        case Mnemonic::VSAC:
            out << (inst.mnemonic == Mnemonic::VSAM ? "vsam.vv " : "vsac.vv ") << v(inst.vd)
                << ", " << v(inst.vs1) << ", " << v(inst.vs2);
            break;
        case Mnemonic::VSETVLI: {
            out << "vsetvli " << x(inst.rd) << ", " << x(inst.rs1) << ", ";
            if ((inst.zimm & ~0x3fu) == 0 && ((inst.zimm >> 3) & 0x7) <= 3 &&
                (inst.zimm & 0x7) <= 3) {
                out << "e" << (8 << ((inst.zimm >> 3) & 0x7)) << ",m" << (1 << (inst.zimm & 0x7));
            } else {
                out << inst.zimm;
            }
            break;
        }
        case Mnemonic::VLE:
            out << "vle" << static_cast<int>(inst.ew) << ".v " << v(inst.vd) << ", ("
                << x(inst.rs1) << ")";
            break;
        case Mnemonic::VSE:
            out << "vse" << static_cast<int>(inst.ew) << ".v " << v(inst.vd) << ", ("
                << x(inst.rs1) << ")";
            break;
        case Mnemonic::VMACC:
            out << "vmacc.vv " << v(inst.vd) << ", " << v(inst.vs1) << ", " << v(inst.vs2);
            break;
    }
    return out.str();
}

std::string disassemble(const std::vector<Instruction>& prog) {
    std::string out;
    for (const auto& inst : prog) {
        out += disassemble(inst);
        out += '\n';
    }
    return out;
}

}  // namespace speedsim

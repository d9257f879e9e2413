#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "speedsim/dataflow.hpp"
#include "speedsim/isa.hpp"
#include "speedsim/memsys.hpp"
#include "speedsim/mptu.hpp"

namespace speedsim {

// Functional unit that owns an instruction's EX occupancy. Each unit holds at
// most one in-flight instruction; VSACFG never occupies EX at all.
enum class FuKind : uint8_t { None, Alu, Vldu, Vsu, Mptu };
const char* to_string(FuKind f);

// Absolute pipeline cycles for one instruction (first machine cycle is 1).
// A VSACFG skips IS/EX, so is/ex_start/ex_end stay 0 and co == id + 1 at the
// earliest. For everything else EX spans [ex_start, ex_end] inclusive.
struct InstrTiming {
    Mnemonic mnemonic = Mnemonic::VSACFG;
    FuKind fu = FuKind::None;
    uint64_t dur = 0;
    uint64_t id = 0;
    uint64_t is = 0;
    uint64_t ex_start = 0;
    uint64_t ex_end = 0;
    uint64_t co = 0;
};

struct RunResult {
    uint64_t cycles = 0;
    uint64_t instructions = 0;
    uint64_t ext_bytes_read = 0;
    uint64_t ext_bytes_written = 0;
    uint64_t valid_macs = 0;  // real multiply-accumulates (2 ops each)
    double ops_per_cycle = 0.0;
    std::vector<InstrTiming> timing;
};

// Four-stage in-order pipeline (ID / IS / EX / CO) over the lanes' register
// file and tensor arrays.
//
//   ID decodes one instruction per cycle and applies VSACFG/VSETVLI state.
//   IS dispatches oldest-first, one per cycle, once the target unit is free
//      and no whole-register hazard (RAW, WAW, WAR) remains against an
//      in-flight instruction.
//   EX holds one instruction per functional unit for its duration.
//   CO commits one instruction per cycle, in program order.
//
// Durations: loads/stores take ceil(external bytes / bus width) cycles on
// VLDU/VSU; VMACC takes ceil(vl / (lanes * 64/sew)) on the ALU; tensor ops
// take their schedule cost on the MPTU, plus a one-time array fill of
// (tile_r + tile_c - 2) cycles for the first tensor op of a program.
class Machine {
public:
    explicit Machine(const HwConfig& hw);

    // Clears the register file, tensor-array accumulators, configuration
    // state, and scalar registers.
    void reset();

    // Executes a planned program: instruction semantics come from the plan's
    // operand descriptors, and valid work is the plan's mac count.
    RunResult run(const Plan& plan, ExternalMemory& mem);

    // Executes a raw (assembled) program. The baseline subset VSETVLI / VLE /
    // VSE / VMACC is fully functional with addresses taken from the scalar
    // registers; custom instructions use the register-level semantics
    // documented in docs/formats.md (VSALD broadcast-loads vd, VSAM/VSAC run
    // one kernel_size^2-step tile sweep from vs1/vs2 into vd).
    RunResult run(const std::vector<Instruction>& prog, ExternalMemory& mem);

    // Scalar registers: pre-resolved base addresses / AVL values supplied by
    // the harness (no scalar pipeline is modeled).
    std::array<uint64_t, 32>& xregs() { return xregs_; }

    Vrf& vrf() { return vrf_; }
    const HwConfig& config() const { return hw_; }

    // One CSV line per occupied (cycle, stage): `cycle,stage,instr,mnemonic,
    // unit`. Empty path disables tracing.
    void set_trace(std::string path) { trace_path_ = std::move(path); }

private:
    struct Work {
        FuKind fu = FuKind::None;
        uint64_t dur = 0;
        uint32_t reads = 0;
        uint32_t writes = 0;
    };

    RunResult execute(const std::vector<Instruction>& prog, const Plan* plan,
                      ExternalMemory& mem);
    Work classify(const Instruction& inst, const Plan* plan, size_t idx,
                  bool& mptu_seen);
    void exec_raw(const Instruction& inst, ExternalMemory& mem, uint64_t cycle);
    void write_trace(const std::vector<InstrTiming>& timing) const;

    HwConfig hw_;
    Vrf vrf_;
    std::vector<MptuArray> pes_;
    std::array<uint64_t, 32> xregs_{};
    VsaCsr csr_{};
    uint64_t vl_ = 0;
    int sew_ = 16;
    std::string trace_path_;
};

}  // namespace speedsim

#pragma once

#include <cstdint>

#include "speedsim/dataflow.hpp"

namespace speedsim {

// Configuration of the reference vector machine. It is its own machine, not
// derived from the tensor-unit hardware config: with the defaults its peak is
// 16 Int16 MACs per cycle, the same as a 4-lane 2x2-tile tensor-unit build,
// so default-vs-default comparisons are at matched compute. The startup
// overhead is a calibration knob, not a derived constant; orderings and
// trends are the contract, absolute speedups move with this value.
struct BaselineParams {
    int lanes = 4;
    int datapath_bits_per_lane = 64;  // 4 x Int16 or 8 x Int8 MACs per cycle
    int startup_cycles = 6;
};

// One modeled baseline execution. The baseline machine has a plain
// multiply-accumulate datapath (no sub-word packing), lowers convolutions
// through an explicit im2col matrix, and keeps no operand resident across
// arithmetic instructions: every multiply-accumulate streams its vector
// operand from external memory again. Instruction and register counts, by
// contrast, reflect the standard lowering in which small operand sets stay
// in registers, which is what the instruction-sequence comparison shows.
struct BaselineRun {
    uint64_t instructions = 0;
    uint64_t arith_instructions = 0;
    uint64_t load_instructions = 0;
    uint64_t store_instructions = 0;
    int vregs_used = 0;
    uint64_t cycles = 0;
    uint64_t ext_bytes_read = 0;
    uint64_t ext_bytes_written = 0;
    uint64_t valid_macs = 0;
    double ops_per_cycle = 0.0;
};

// Models the baseline executing one operator. Throws UnsupportedPrecision
// for Int4 (the baseline datapath stops at 8-bit elements).
BaselineRun baseline_run(const OperatorDesc& op, const BaselineParams& params = {});

}  // namespace speedsim

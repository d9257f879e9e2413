#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speedsim/isa.hpp"
#include "speedsim/memsys.hpp"
#include "speedsim/mptu.hpp"
#include "speedsim/oracle.hpp"

namespace speedsim {

// ---------------------------------------------------------------------------
// Hardware description
// ---------------------------------------------------------------------------

struct HwConfig {
    int lanes = 4;
    int tile_r = 4;   // PE rows
    int tile_c = 4;   // PE columns
    int bus_bytes = 64;  // external bus bytes per cycle

    void validate() const;

    // Headline peak: 2 * lanes * tile_r * tile_c * pp(p) operations/cycle.
    // (Int16 sustains at most half of it: a 16-bit product occupies the PE
    // multiplier fabric for two cycles, see core_word_cost.)
    int64_t peak_ops_per_cycle(Precision p) const {
        return 2ll * lanes * tile_r * tile_c * pp(p);
    }
};

// Cycles one packed 64-bit word-pair occupies a PE. The multiplier fabric of
// a PE is 32 4-bit cells; an int4 word needs 16, int8 needs 32, int16 needs
// 64 -> two passes.
constexpr int core_word_cost(Precision p) { return p == Precision::Int16 ? 2 : 1; }

// ---------------------------------------------------------------------------
// Operator description and external tensor layout
// ---------------------------------------------------------------------------

enum class OpKind : uint8_t { Conv, Mm };

struct OperatorDesc {
    OpKind kind = OpKind::Mm;
    ConvShape conv;
    MmShape mm;
    Precision precision = Precision::Int16;

    void validate() const;
    uint64_t macs() const;  // oracle mac count
    std::string label() const;  // e.g. "conv3x3s1-16x32x32-oc64" / "mm64x64x64"
};

// Byte addresses of the operand tensors in external memory. Rows are
// byte-padded: a row of n elements takes row_bytes(n, p) bytes, so int4 rows
// with odd length round up to the next byte.
struct ExtLayout {
    uint32_t x_base = 0;  // conv input / mm B
    uint32_t w_base = 0;  // conv weights / mm A
    uint32_t y_base = 0;  // int32 output
};

uint32_t row_bytes(int64_t elems, Precision p);

// Packed-element host helpers (low nibble first for int4).
void poke_elems(ExternalMemory& mem, uint32_t base, const int32_t* vals, size_t n, Precision p);
std::vector<int32_t> peek_elems(const ExternalMemory& mem, uint32_t base, size_t n, Precision p);
void poke_i32(ExternalMemory& mem, uint32_t base, const int32_t* vals, size_t n);
std::vector<int32_t> peek_i32(const ExternalMemory& mem, uint32_t base, size_t n);

// Default layout for an operator: x, then w, then y, each 64-byte aligned.
ExtLayout default_layout(const OperatorDesc& op, uint32_t base = 0x10000);

// ---------------------------------------------------------------------------
// Per-lane VRF region map (byte offsets into a lane's 16 KiB)
// ---------------------------------------------------------------------------
//   v0  - v15 : streamed operand region (conv input plane / mm B columns)
//   v16 - v19 : weight buffer ping (conv taps / mm A rows)
//   v20 - v23 : weight buffer pong
//   v24 - v30 : output / partial-sum region (int32 grids)
//   v31       : reserved scratch
inline constexpr uint32_t kXBase = 0;
inline constexpr uint32_t kXBytes = 16 * Vrf::kRegBytes;  // 8192
inline constexpr uint32_t kWPing = 16 * Vrf::kRegBytes;
inline constexpr uint32_t kWPong = 20 * Vrf::kRegBytes;
inline constexpr uint32_t kWBytes = 4 * Vrf::kRegBytes;   // 2048 per buffer
inline constexpr uint32_t kOutBase = 24 * Vrf::kRegBytes;
inline constexpr uint32_t kOutBytes = 7 * Vrf::kRegBytes; // 3584

// Bitmask of the registers a byte span [base, base+bytes) touches.
uint32_t region_mask(uint32_t base, uint64_t bytes);

// ---------------------------------------------------------------------------
// Execution plan
// ---------------------------------------------------------------------------

// One tensor-unit stage: an outer-product sweep of r_cnt row operands against
// c_cnt column operands over `steps` reduction steps. Word addresses are
// per-lane VRF byte addresses:
//   row word(r, step) = row_base + r * row_rstride + row_off[step0 + step]
//   col word(c, step) = col_base + c * col_cstride + col_off[step0 + step]
// The offset tables live on the Block. The int32 accumulator grid maps to
//   grid cell(r, c)   = io_base + r * io_rstride + c * 4
struct Stage {
    uint32_t row_base = 0;
    uint32_t row_rstride = 0;
    uint32_t col_base = 0;
    uint32_t col_cstride = 0;
    int r_cnt = 0;
    int c_cnt = 0;
    int step0 = 0;
    int steps = 0;

    bool pe_clear = true;    // clear PE accumulators first (false: continue a CF chain)
    bool acc_read = false;   // add the existing grid (VRF partial) to the result
    bool write = false;      // write the grid back to the VRF (clears the PEs)
    bool drain = false;      // CF tile end: writeback costs tile_c cycles
    uint32_t io_base = 0;
    uint32_t io_rstride = 0;

    int64_t valid_macs = 0;  // padding and idle sub-words excluded
};

// Depth-wise stage: every active lane streams one channel's input plane
// against its PE-resident taps, accumulating diagonally into the VRF.
// Addresses are identical in each lane; lane l works on channel chan0 + l.
struct DwStage {
    uint32_t x_base = 0;    // input plane rows [y0, y1) packed at ew
    uint32_t w_base = 0;    // kh*kw taps packed at ew
    uint32_t out_base = 0;  // int32 rows [oy0, oy1) x ow
    int chan0 = 0;
    int active_lanes = 0;
    int y0 = 0;             // real input rows held in the VRF
    int y1 = 0;
    int oy0 = 0;            // output rows this stage owns (halo rows excluded)
    int oy1 = 0;
    bool init = false;      // zero the output rows first (first tap pass)
    int64_t valid_macs = 0;
};

enum class BlockKind : uint8_t { Dense, Dw };

// The unit of work of one VSAM/VSAC instruction.
struct Block {
    BlockKind kind = BlockKind::Dense;
    std::vector<uint32_t> row_off;
    std::vector<uint32_t> col_off;
    std::vector<Stage> stages;
    std::vector<DwStage> dw;
    Precision precision = Precision::Int16;
    int kernel_w = 1;       // dw: sub-kernel rect width
    int kernel_h = 1;       //     sub-kernel rect height
    int ky0 = 0;            //     sub-kernel rect origin in the full kernel
    int kx0 = 0;
    int stride = 1;
    int pad = 0;
    int in_w = 0;           // dw input plane width (x addressing)
    int out_w = 0;          // dw output plane width
    int x_pitch = 0;        // dw VRF bytes per input row
    int w_pitch = 0;        // dw VRF bytes per full-kernel tap row

    int64_t valid_macs() const;
};

uint64_t stage_cycles(const Stage& s, Precision p, const HwConfig& hw);
uint64_t dw_stage_cycles(const DwStage& s, const Block& b, const HwConfig& hw);
uint64_t block_cycles(const Block& b, const HwConfig& hw, bool first_in_program);

// ---------------------------------------------------------------------------
// Program side information (harness-resolved descriptors)
// ---------------------------------------------------------------------------

enum class LoadKind : uint8_t {
    ConvInput,   // padded, channel-packed plane chunk; broadcast to all lanes
    ConvWeights, // (ic-pack, tap, col) words; per-lane output-channel split
    MmA,         // m rows, k-packed words; broadcast
    MmB,         // per-lane n columns, k-packed words
    DwInput,     // per-lane channel plane rows, element-packed
    DwWeights,   // per-lane channel taps
    RawStriped,  // baseline vle: vl elements striped into a register
};

struct LoadDesc {
    LoadKind kind = LoadKind::RawStriped;
    Precision prec = Precision::Int16;
    uint32_t vrf_base = 0;
    uint64_t bytes = 0;  // exact external bytes this load transfers

    // kind-specific coordinates (unused fields stay zero)
    int ic0 = 0, icn = 0;    // channel range (conv); k-pack range is k0/kn
    int y0 = 0, y1 = 0;      // ConvInput: PADDED plane row range; DwInput: real
                             // input rows; MmA: m row range
    int n0 = 0, nn = 0;      // global oc range (ConvWeights) / per-lane n cols (MmB)
    int k0 = 0, kn = 0;      // k-pack range (mm) / tap index range (ConvWeights)
    int ky0 = 0, kx0 = 0;    // ConvWeights: sub-kernel rect origin
    int kws = 0;             // ConvWeights: sub-kernel rect width (tap t ->
                             //   ky = ky0 + t / kws, kx = kx0 + t % kws)
    int elems = 0;           // RawStriped element count
    int reg = 0;             // RawStriped destination register
    uint32_t ext = 0;        // RawStriped external byte address
};

struct StoreDesc {
    // Runs are derived from the plan geometry; `bytes` is the exact total.
    enum class Kind : uint8_t { ConvOut, MmOut, DwOut, RawStriped } kind = Kind::RawStriped;
    uint32_t vrf_base = 0;
    uint64_t bytes = 0;

    int oc0 = 0, ocn = 0;   // output channel range (conv/dw) / m range (mm)
    int p0 = 0, p1 = 0;     // linear position range (conv) / output row range (dw)
    int n0 = 0, nn = 0;     // per-lane n column range (mm)
    int elems = 0;          // RawStriped
    int reg = 0;            // RawStriped source register
    int elem_off = 0;       // RawStriped first element index within register
    int ew = 32;            // RawStriped element width (bits)
    uint32_t ext = 0;       // RawStriped external byte address
};

struct SideInfo {
    int block = -1;                  // VSAM/VSAC: index into Plan::blocks
    std::optional<LoadDesc> load;    // VSALD/VLE
    std::optional<StoreDesc> store;  // VSE
    uint32_t avl = 0;                // VSETVLI application vector length
    uint32_t reads_mask = 0;         // vector registers read (whole-register)
    uint32_t writes_mask = 0;        // vector registers written
};

struct Plan {
    OperatorDesc op;
    Strategy strategy = Strategy::MM;
    HwConfig hw;
    ExtLayout layout;
    std::vector<Instruction> program;
    std::vector<SideInfo> side;      // parallel to program
    std::vector<Block> blocks;
    uint64_t valid_macs = 0;
    uint64_t pred_load_bytes = 0;
    uint64_t pred_store_bytes = 0;
    int vregs_used = 0;
};

// ---------------------------------------------------------------------------
// Planning
// ---------------------------------------------------------------------------

// Default strategy: MM operators use MM; depth-wise convolutions fold fully
// (FF is the only legal choice); point-wise convolutions default to CF;
// other dense convolutions default to FFCS. Any conv strategy can be forced
// on a dense convolution explicitly.
Strategy select_strategy(const OperatorDesc& op);

// Throws StrategyError if the strategy is illegal for the operator.
void check_strategy(const OperatorDesc& op, Strategy s);

// Kernel axes longer than the 15 the config register can express are split
// greedily into chunks of <= 15; the sub-kernels run as extra tap passes
// accumulating into the same outputs.
std::vector<int> decompose_axis(int k);

// Build the complete plan: program text, side tables, and tensor-unit blocks.
// stage_n is the VSACFG N parameter (weight-fetch group length, FFCS only).
Plan plan_operator(const OperatorDesc& op, const HwConfig& hw, Strategy strategy,
                   int stage_n = 4);

inline Plan plan_operator(const OperatorDesc& op, const HwConfig& hw) {
    return plan_operator(op, hw, select_strategy(op));
}

// ---------------------------------------------------------------------------
// Functional execution of plan pieces (used by the machine)
// ---------------------------------------------------------------------------

void execute_load(const LoadDesc& d, const Plan& plan, ExternalMemory& mem, Vrf& vrf,
                  uint64_t cycle);
void execute_store(const StoreDesc& d, const Plan& plan, ExternalMemory& mem, Vrf& vrf,
                   uint64_t cycle);
// `pes` is the machine's persistent per-lane PE state (CF chains carry
// accumulators across instructions); `prec` comes from the live config register.
void execute_block(const Block& b, Precision prec, const HwConfig& hw, Vrf& vrf,
                   std::vector<MptuArray>& pes);

}  // namespace speedsim

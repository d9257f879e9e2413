// Frozen fixtures for the plain-vector reference cost model. Expected
// values below were computed by hand from the documented model:
//   per-instruction cycles = startup(6) + ceil(work / (lanes * 64/sew)),
//   32-bit stores use lanes*2 elements per cycle,
//   vector length cap = lanes * 4096 / sew elements,
//   traffic streams every multiply-accumulate operand from memory again,
//   convolutions add an im2col matrix (read source + write matrix).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "speedsim/baseline.hpp"
#include "speedsim/errors.hpp"
#include "speedsim/machine.hpp"
#include "speedsim/memsys.hpp"
#include "speedsim/oracle.hpp"

using namespace speedsim;

namespace {

OperatorDesc mm_op(int m, int k, int n, Precision p) {
    OperatorDesc op;
    op.kind = OpKind::Mm;
    op.mm = MmShape{m, k, n};
    op.precision = p;
    return op;
}

OperatorDesc conv_op(ConvShape s, Precision p) {
    OperatorDesc op;
    op.kind = OpKind::Conv;
    op.conv = s;
    op.precision = p;
    return op;
}

}  // namespace

TEST_CASE("canonical 4x8 matrix product costs") {
    BaselineParams bp;
    bp.lanes = 2;  // matched to a 2-lane 2x2-tile tensor-unit build
    const BaselineRun r = baseline_run(mm_op(4, 4, 8, Precision::Int16), bp);

    // vsetvli + 4 row loads + 16 splats + 16 multiply-accumulates + 4 stores
    CHECK(r.instructions == 41);
    CHECK(r.arith_instructions == 16);
    CHECK(r.load_instructions == 20);
    CHECK(r.store_instructions == 4);
    CHECK(r.vregs_used == 6);
    // 7 cycles for every 16-bit instruction (8 elems/cycle), 8 for each store
    CHECK(r.cycles == 291);
    CHECK(r.ext_bytes_read == 4 * 4 * 8 * 2 + 4 * 4 * 2);
    CHECK(r.ext_bytes_written == 4 * 8 * 4);
    CHECK(r.valid_macs == 128);
    CHECK(r.ops_per_cycle == doctest::Approx(256.0 / 291.0));
}

TEST_CASE("vector-length chunking") {
    // default lanes = 4 -> vlmax(int16) = 1024
    const BaselineRun r = baseline_run(mm_op(2, 2, 5000, Precision::Int16));

    // 5 chunks of n: 4 x 1024 + 904
    CHECK(r.instructions == 45);
    CHECK(r.arith_instructions == 20);
    // full chunk: 6*70 + 2*134 = 688; last: 6*63 + 2*119 = 616; splats 4*7
    CHECK(r.cycles == 7 + 4 * 688 + 616 + 28);
    CHECK(r.ext_bytes_read == 2ull * 2 * 5000 * 2 + 8);
    CHECK(r.ext_bytes_written == 2ull * 5000 * 4);
    CHECK(r.valid_macs == 20000);
}

TEST_CASE("pointwise conv pays im2col traffic") {
    ConvShape s{16, 16, 16, 16, 1, 1, 1, 0, false};
    const BaselineRun r = baseline_run(conv_op(s, Precision::Int16));

    CHECK(r.instructions == 545);
    CHECK(r.arith_instructions == 256);
    CHECK(r.cycles == 8391);
    // im2col source 8192 + streamed rows 131072 + splats 512
    CHECK(r.ext_bytes_read == 139776);
    // im2col matrix 8192 + 32-bit outputs 16384
    CHECK(r.ext_bytes_written == 24576);
    CHECK(r.valid_macs == conv_macs(s));
}

TEST_CASE("small maps collapse to startup overhead") {
    ConvShape small{16, 4, 4, 16, 1, 1, 1, 0, false};
    ConvShape big{16, 32, 32, 16, 1, 1, 1, 0, false};
    const BaselineRun rs = baseline_run(conv_op(small, Precision::Int16));
    const BaselineRun rb = baseline_run(conv_op(big, Precision::Int16));

    CHECK(rs.cycles == 3831);
    CHECK(rb.cycles == 22983);
    CHECK(rs.ops_per_cycle == doctest::Approx(8192.0 / 3831.0));
    CHECK(rb.ops_per_cycle == doctest::Approx(524288.0 / 22983.0));
    // utilization collapses on the small map (startup dominates)
    CHECK(rs.ops_per_cycle * 5 < rb.ops_per_cycle);
}

TEST_CASE("degenerate one-element conv") {
    ConvShape s{1, 1, 1, 1, 1, 1, 1, 0, false};
    const BaselineRun r = baseline_run(conv_op(s, Precision::Int8));
    CHECK(r.arith_instructions == 1);
    CHECK(r.instructions == 5);  // vsetvli + row load + splat + macc + store
    CHECK(r.valid_macs == 1);
}

TEST_CASE("depthwise model") {
    ConvShape s{8, 8, 8, 8, 3, 3, 1, 1, true};
    const BaselineRun r = baseline_run(conv_op(s, Precision::Int8));
    CHECK(r.arith_instructions == 8 * 9);
    CHECK(r.vregs_used == 11);
    CHECK(r.valid_macs == conv_macs(s));
    // per-channel streams 4608 + splats 72 + im2col source 4608
    CHECK(r.ext_bytes_read == 9288);
    // im2col matrices 4608 + outputs 2048
    CHECK(r.ext_bytes_written == 6656);
}

TEST_CASE("rejects unsupported configurations") {
    CHECK_THROWS_AS(baseline_run(mm_op(4, 4, 8, Precision::Int4)),
                    UnsupportedPrecision);
    BaselineParams p;
    p.startup_cycles = -1;
    CHECK_THROWS_AS(baseline_run(mm_op(4, 4, 8, Precision::Int16), p),
                    ConfigError);
    p = BaselineParams{};
    p.datapath_bits_per_lane = 48;
    CHECK_THROWS_AS(baseline_run(mm_op(4, 4, 8, Precision::Int16), p),
                    ConfigError);
}

TEST_CASE("narrower elements run faster") {
    ConvShape s{16, 16, 16, 32, 3, 3, 1, 1, false};
    const BaselineRun r16 = baseline_run(conv_op(s, Precision::Int16));
    const BaselineRun r8 = baseline_run(conv_op(s, Precision::Int8));
    CHECK(r8.cycles < r16.cycles);
    CHECK(r8.ext_bytes_read < r16.ext_bytes_read);
    CHECK(r8.valid_macs == r16.valid_macs);
}

TEST_CASE("baseline math equals the direct reference") {
    // The baseline lowers through im2col; its arithmetic must match the
    // direct convolution bit for bit, so cost is the only difference.
    std::mt19937 rng(77);
    std::uniform_int_distribution<int32_t> d(-128, 127);
    ConvShape s{3, 9, 7, 5, 3, 3, 2, 1, false};
    std::vector<int32_t> x(s.input_elems()), w(s.weight_elems());
    std::vector<int32_t> ya(s.output_elems()), yb(s.output_elems());
    for (auto& v : x) v = d(rng);
    for (auto& v : w) v = d(rng);
    conv2d_ref(s, x.data(), w.data(), ya.data());
    conv2d_im2col(s, x.data(), w.data(), yb.data());
    REQUIRE(ya == yb);
}

TEST_CASE("machine beats the baseline on a dense conv") {
    // matched peak compute: 4-lane 2x2 tile at Int16 = 16 MACs/cycle, same
    // as the default baseline datapath
    HwConfig hw;
    hw.tile_r = 2;
    hw.tile_c = 2;
    ConvShape s{16, 16, 16, 16, 1, 1, 1, 0, false};
    OperatorDesc op = conv_op(s, Precision::Int16);
    const Plan plan = plan_operator(op, hw, select_strategy(op));

    ExternalMemory mem;
    std::mt19937 rng(5);
    std::uniform_int_distribution<int32_t> d(-100, 100);
    std::vector<int32_t> x(s.input_elems()), w(s.weight_elems());
    for (auto& v : x) v = d(rng);
    for (auto& v : w) v = d(rng);
    // row-padded external layout used by the planner's loads
    const uint32_t rb_x = row_bytes(s.iw, op.precision);
    for (int c = 0; c < s.ic; ++c)
        for (int y = 0; y < s.ih; ++y)
            poke_elems(mem, plan.layout.x_base + (uint32_t(c) * s.ih + y) * rb_x,
                       x.data() + (size_t(c) * s.ih + y) * s.iw, s.iw, op.precision);
    const size_t wrow = size_t(s.kw) * s.oc;
    const uint32_t rb_w = row_bytes(int64_t(wrow), op.precision);
    for (int c = 0; c < s.ic; ++c)
        for (int ky = 0; ky < s.kh; ++ky)
            poke_elems(mem, plan.layout.w_base + (uint32_t(c) * s.kh + ky) * rb_w,
                       w.data() + (size_t(c) * s.kh + ky) * wrow, wrow, op.precision);

    Machine machine(hw);
    const RunResult run = machine.run(plan, mem);
    const BaselineRun base = baseline_run(op);

    CHECK(base.cycles > run.cycles);  // speedup > 1
    CHECK(base.ext_bytes_read + base.ext_bytes_written >
          run.ext_bytes_read + run.ext_bytes_written);
}

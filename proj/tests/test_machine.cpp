#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "speedsim/machine.hpp"
#include "speedsim/oracle.hpp"

using namespace speedsim;

namespace {

Instruction make(Mnemonic m) {
    Instruction i{};
    i.mnemonic = m;
    return i;
}

Instruction cfg(Precision p, int kernel, Strategy st) {
    VsaCsr c{};
    c.precision = p;
    c.kernel_size = kernel;
    c.strategy = st;
    Instruction i = make(Mnemonic::VSACFG);
    encode_csr(c, i.zimm, i.uimm);
    return i;
}

Instruction vsetvli_e16(uint8_t rd, uint8_t rs1) {
    Instruction i = make(Mnemonic::VSETVLI);
    i.rd = rd;
    i.rs1 = rs1;
    i.zimm = 1 << 3;  // e16
    return i;
}

Instruction vsam(uint8_t vd, uint8_t vs1, uint8_t vs2) {
    Instruction i = make(Mnemonic::VSAM);
    i.vd = vd;
    i.vs1 = vs1;
    i.vs2 = vs2;
    return i;
}

HwConfig small_hw() {
    HwConfig hw{};
    hw.lanes = 2;
    hw.tile_r = 2;
    hw.tile_c = 2;
    return hw;
}

std::vector<int32_t> rand_vals(std::mt19937& rng, size_t n, Precision p) {
    const int w = width_bits(p);
    std::uniform_int_distribution<int32_t> d(-(1 << (w - 1)), (1 << (w - 1)) - 1);
    std::vector<int32_t> v(n);
    for (auto& e : v) e = d(rng);
    return v;
}

void poke_conv(ExternalMemory& mem, const ExtLayout& lay, const ConvShape& cs,
               Precision p, const std::vector<int32_t>& x,
               const std::vector<int32_t>& w) {
    const uint32_t rb_x = row_bytes(cs.iw, p);
    for (int ic = 0; ic < cs.ic; ++ic)
        for (int iy = 0; iy < cs.ih; ++iy)
            poke_elems(mem, lay.x_base + (static_cast<uint32_t>(ic) * cs.ih + iy) * rb_x,
                       &x[(static_cast<size_t>(ic) * cs.ih + iy) * cs.iw], cs.iw, p);
    const int wrow = cs.kw * (cs.depthwise ? 1 : cs.oc);
    const uint32_t rb_w = row_bytes(wrow, p);
    for (int ic = 0; ic < cs.ic; ++ic)
        for (int ky = 0; ky < cs.kh; ++ky)
            poke_elems(mem, lay.w_base + (static_cast<uint32_t>(ic) * cs.kh + ky) * rb_w,
                       &w[(static_cast<size_t>(ic) * cs.kh + ky) * wrow], wrow, p);
}

// Plans, loads operands, runs on a fresh machine, and checks the result
// against the reference kernel plus the plan's byte ledger.
RunResult run_conv(ConvShape cs, Precision p, Strategy st, uint32_t seed,
                   const HwConfig& hw) {
    std::mt19937 rng(seed);
    OperatorDesc op{};
    op.kind = OpKind::Conv;
    op.conv = cs;
    op.precision = p;
    Plan plan = plan_operator(op, hw, st);

    ExternalMemory mem;
    auto x = rand_vals(rng, cs.input_elems(), p);
    auto w = rand_vals(rng, cs.weight_elems(), p);
    poke_conv(mem, plan.layout, cs, p, x, w);

    Machine m(hw);
    RunResult res = m.run(plan, mem);

    std::vector<int32_t> y_ref(cs.output_elems());
    conv2d_ref(cs, x.data(), w.data(), y_ref.data());
    REQUIRE(peek_i32(mem, plan.layout.y_base, y_ref.size()) == y_ref);
    CHECK(res.ext_bytes_read == plan.pred_load_bytes);
    CHECK(res.ext_bytes_written == plan.pred_store_bytes);
    CHECK(res.valid_macs == conv_macs(cs));
    CHECK(res.ops_per_cycle <= hw.peak_ops_per_cycle(p));
    return res;
}

}  // namespace

TEST_CASE("pipeline timing fixtures") {
    HwConfig hw = small_hw();
    ExternalMemory mem;

    SUBCASE("empty program runs in zero cycles") {
        Machine m(hw);
        RunResult r = m.run(std::vector<Instruction>{}, mem);
        CHECK(r.cycles == 0);
        CHECK(r.instructions == 0);
    }
    SUBCASE("a lone configuration write occupies ID and CO only") {
        Machine m(hw);
        RunResult r = m.run({cfg(Precision::Int8, 3, Strategy::FFCS)}, mem);
        CHECK(r.cycles == 2);
        CHECK(r.timing[0].is == 0);
        CHECK(r.timing[0].ex_start == 0);
        CHECK(r.timing[0].co == 2);
    }
    SUBCASE("a lone vsetvli flows through all four stages") {
        Machine m(hw);
        RunResult r = m.run({vsetvli_e16(1, 0)}, mem);
        CHECK(r.cycles == 4);  // ID 1, IS 2, EX 3, CO 4
        CHECK(r.timing[0].fu == FuKind::Alu);
    }
    SUBCASE("commits stay in program order, one per cycle") {
        Machine m(hw);
        std::vector<Instruction> prog{vsetvli_e16(1, 0),
                                      cfg(Precision::Int4, 1, Strategy::MM),
                                      vsam(8, 1, 2), vsam(9, 3, 4)};
        RunResult r = m.run(prog, mem);
        for (size_t i = 1; i < r.timing.size(); ++i)
            CHECK(r.timing[i].co > r.timing[i - 1].co);
    }
}

TEST_CASE("whole-register hazards stall dispatch until commit") {
    HwConfig hw = small_hw();
    ExternalMemory mem;
    Machine m(hw);

    // v9 <- (v1,v2) then v10 <- (v9,v2): read-after-write on v9.
    std::vector<Instruction> raw{cfg(Precision::Int8, 1, Strategy::MM),
                                 vsam(9, 1, 2), vsam(10, 9, 2)};
    RunResult r = m.run(raw, mem);
    CHECK(r.timing[2].is >= r.timing[1].co + 1);

    // Write-after-write on the same destination register.
    m.reset();
    RunResult waw = m.run({cfg(Precision::Int8, 1, Strategy::MM),
                           vsam(9, 1, 2), vsam(9, 3, 4)},
                          mem);
    CHECK(waw.timing[2].is >= waw.timing[1].co + 1);

    // Independent destinations may overlap in the backend.
    m.reset();
    RunResult ind = m.run({cfg(Precision::Int8, 1, Strategy::MM),
                           vsam(9, 1, 2), vsam(10, 3, 4)},
                          mem);
    CHECK(ind.timing[2].is < waw.timing[2].is);
    CHECK(ind.cycles < waw.cycles);
}

TEST_CASE("a configuration switch between tensor ops costs exactly one cycle") {
    HwConfig hw = small_hw();
    ExternalMemory mem;

    // Operands: v1/v3 rows, v2/v4 columns, same bytes in both runs.
    auto preload = [&](Machine& m) {
        const uint64_t row = 0x0102030405060708ull;
        const uint64_t col = 0x1111111111111111ull;
        for (int l = 0; l < hw.lanes; ++l)
            for (int r = 0; r < hw.tile_r; ++r) {
                m.vrf().write_lane(l, Vrf::addr_of(1, 8 * r), &row, 8);
                m.vrf().write_lane(l, Vrf::addr_of(3, 8 * r), &row, 8);
                m.vrf().write_lane(l, Vrf::addr_of(2, 8 * r), &col, 8);
                m.vrf().write_lane(l, Vrf::addr_of(4, 8 * r), &col, 8);
            }
    };
    auto grid0 = [&](Machine& m, uint8_t vd) {
        uint32_t v = 0;
        m.vrf().read_lane(0, &v, Vrf::addr_of(vd, 0), 4);
        return v;
    };

    Machine base(hw);
    preload(base);
    RunResult without = base.run(
        {cfg(Precision::Int4, 1, Strategy::MM), vsam(8, 1, 2), vsam(9, 3, 4)},
        mem);

    Machine switched(hw);
    preload(switched);
    RunResult with = switched.run(
        {cfg(Precision::Int4, 1, Strategy::MM), vsam(8, 1, 2),
         cfg(Precision::Int8, 1, Strategy::MM), vsam(9, 3, 4)},
        mem);

    CHECK(with.cycles == without.cycles + 1);

    // The second op really ran at the new precision: 0x01..08 dot 0x11..11
    // is 20 at Int4 (sixteen signed 4-bit slots, so 0x8 reads as -8) but
    // 612 at Int8 (eight positive bytes summing to 36, times 17).
    CHECK(grid0(base, 9) == 20);
    CHECK(grid0(switched, 9) == 612);
    // And the op before the switch is identical in both runs.
    CHECK(grid0(base, 8) == 20);
    CHECK(grid0(switched, 8) == 20);
}

TEST_CASE("baseline vector subset executes functionally") {
    HwConfig hw{};
    ExternalMemory mem;
    Machine m(hw);

    // y[i] += a[i] * b[i] over 8 int16 elements.
    const uint32_t a_base = 0x1000, b_base = 0x2000, y_base = 0x3000;
    std::vector<int32_t> a{3, -2, 7, 0, 5, -8, 2, 9};
    std::vector<int32_t> b{4, 6, -3, 11, 2, 2, -5, 1};
    std::vector<int32_t> y0{1, 1, 1, 1, 1, 1, 1, 1};
    poke_elems(mem, a_base, a.data(), 8, Precision::Int16);
    poke_elems(mem, b_base, b.data(), 8, Precision::Int16);
    poke_elems(mem, y_base, y0.data(), 8, Precision::Int16);

    m.xregs()[1] = 8;       // AVL
    m.xregs()[2] = a_base;
    m.xregs()[3] = b_base;
    m.xregs()[4] = y_base;

    auto vle = [](uint8_t vd, uint8_t rs1) {
        Instruction i = make(Mnemonic::VLE);
        i.vd = vd;
        i.rs1 = rs1;
        i.ew = 16;
        return i;
    };
    Instruction vmacc = make(Mnemonic::VMACC);
    vmacc.vd = 3;
    vmacc.vs1 = 1;
    vmacc.vs2 = 2;
    Instruction vse = make(Mnemonic::VSE);
    vse.vd = 3;
    vse.rs1 = 4;
    vse.ew = 16;

    RunResult r = m.run({vsetvli_e16(5, 1), vle(1, 2), vle(2, 3), vle(3, 4),
                         vmacc, vse},
                        mem);

    std::vector<int32_t> want(8);
    for (int i = 0; i < 8; ++i) want[i] = y0[i] + a[i] * b[i];
    auto got = peek_elems(mem, y_base, 8, Precision::Int16);
    CHECK(got == want);
    CHECK(r.cycles == 13);  // frozen: sequential loads, stalled macc + store
    CHECK(r.ext_bytes_read == 48);
    CHECK(r.ext_bytes_written == 16);
    CHECK(r.valid_macs == 8);
    CHECK(m.xregs()[5] == 8);  // vsetvli wrote vl back
}

TEST_CASE("planned operators run end to end on the machine") {
    HwConfig hw{};
    run_conv({3, 8, 8, 5, 3, 3, 1, 1, false}, Precision::Int8, Strategy::FFCS, 1, hw);
    run_conv({16, 6, 6, 16, 1, 1, 1, 0, false}, Precision::Int16, Strategy::CF, 2, hw);
    run_conv({5, 9, 7, 3, 3, 3, 1, 1, false}, Precision::Int4, Strategy::FF, 3, hw);
    run_conv({6, 8, 8, 6, 3, 3, 2, 1, true}, Precision::Int8, Strategy::FF, 4, hw);

    // Matrix path with the oracle.
    std::mt19937 rng(55);
    OperatorDesc op{};
    op.kind = OpKind::Mm;
    op.mm = {20, 33, 17};
    op.precision = Precision::Int16;
    Plan plan = plan_operator(op, hw, Strategy::MM);
    ExternalMemory mem;
    auto a = rand_vals(rng, op.mm.a_elems(), op.precision);
    auto b = rand_vals(rng, op.mm.b_elems(), op.precision);
    const uint32_t rb_a = row_bytes(op.mm.k, op.precision);
    for (int i = 0; i < op.mm.m; ++i)
        poke_elems(mem, plan.layout.w_base + static_cast<uint32_t>(i) * rb_a,
                   &a[static_cast<size_t>(i) * op.mm.k], op.mm.k, op.precision);
    const uint32_t rb_b = row_bytes(op.mm.n, op.precision);
    for (int k = 0; k < op.mm.k; ++k)
        poke_elems(mem, plan.layout.x_base + static_cast<uint32_t>(k) * rb_b,
                   &b[static_cast<size_t>(k) * op.mm.n], op.mm.n, op.precision);

    Machine m(hw);
    RunResult res = m.run(plan, mem);
    std::vector<int32_t> y_ref(op.mm.y_elems());
    matmul_ref(op.mm, a.data(), b.data(), y_ref.data());
    CHECK(peek_i32(mem, plan.layout.y_base, y_ref.size()) == y_ref);
    CHECK(res.ext_bytes_read == plan.pred_load_bytes);
    CHECK(res.ext_bytes_written == plan.pred_store_bytes);
    CHECK(res.ops_per_cycle <= hw.peak_ops_per_cycle(op.precision));
    CHECK(res.valid_macs == mm_macs(op.mm));
}

TEST_CASE("identical runs produce identical results") {
    HwConfig hw{};
    RunResult r1 = run_conv({8, 10, 10, 8, 3, 3, 1, 1, false}, Precision::Int8,
                            Strategy::FFCS, 99, hw);
    RunResult r2 = run_conv({8, 10, 10, 8, 3, 3, 1, 1, false}, Precision::Int8,
                            Strategy::FFCS, 99, hw);
    CHECK(r1.cycles == r2.cycles);
    CHECK(r1.ext_bytes_read == r2.ext_bytes_read);
    CHECK(r1.ext_bytes_written == r2.ext_bytes_written);
    CHECK(r1.ops_per_cycle == doctest::Approx(r2.ops_per_cycle));
}

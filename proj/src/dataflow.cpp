#include "speedsim/dataflow.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <string>
#include <vector>

namespace speedsim {

namespace {

constexpr int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }
constexpr uint32_t align_up(uint32_t v, uint32_t a) { return (v + a - 1) / a * a; }

// ---------------------------------------------------------------------------
// Packed sub-word access helpers
// ---------------------------------------------------------------------------

// Write value v into sub-word `slot` of the 64-bit word at word_addr,
// little-endian, slot i occupying bits [i*w, (i+1)*w).
void put_sub(Vrf& vrf, int lane, uint32_t word_addr, int slot, Precision p, int32_t v) {
    const int w = width_bits(p);
    if (w == 4) {
        uint32_t addr = word_addr + slot / 2;
        uint8_t b = 0;
        vrf.read_lane(lane, &b, addr, 1);
        const int sh = 4 * (slot & 1);
        b = static_cast<uint8_t>((b & ~(0xf << sh)) | ((v & 0xf) << sh));
        vrf.write_lane(lane, addr, &b, 1);
    } else if (w == 8) {
        uint8_t b = static_cast<uint8_t>(v);
        vrf.write_lane(lane, word_addr + slot, &b, 1);
    } else {
        uint8_t b[2] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8)};
        vrf.write_lane(lane, word_addr + 2 * slot, b, 2);
    }
}

// Sign-extended element `idx` of a row of elements packed at precision p
// starting at byte_base (element 0 at the low nibble of the first byte).
int32_t get_sub(const Vrf& vrf, int lane, uint32_t byte_base, int idx, Precision p) {
    const int w = width_bits(p);
    if (w == 4) {
        uint8_t b = 0;
        vrf.read_lane(lane, &b, byte_base + idx / 2, 1);
        uint8_t nib = (b >> (4 * (idx & 1))) & 0xf;
        return (nib ^ 0x8) - 0x8;
    }
    if (w == 8) {
        uint8_t b = 0;
        vrf.read_lane(lane, &b, byte_base + idx, 1);
        return static_cast<int8_t>(b);
    }
    uint8_t b[2];
    vrf.read_lane(lane, b, byte_base + 2 * idx, 2);
    return static_cast<int16_t>(b[0] | (b[1] << 8));
}

int32_t vrf_i32(const Vrf& vrf, int lane, uint32_t addr) {
    int32_t v = 0;
    vrf.read_lane(lane, &v, addr, 4);
    return v;
}

void put_i32(Vrf& vrf, int lane, uint32_t addr, int32_t v) {
    vrf.write_lane(lane, addr, &v, 4);
}

void zero_span(Vrf& vrf, int lane, uint32_t base, uint32_t len) {
    static const uint8_t zeros[512] = {};
    while (len > 0) {
        uint32_t n = std::min<uint32_t>(len, sizeof zeros);
        vrf.write_lane(lane, base, zeros, n);
        base += n;
        len -= n;
    }
}

// Sign-extended element at bit offset `bit` of an external-run buffer.
int32_t buf_elem(const uint8_t* buf, int64_t bit, Precision p) {
    const int w = width_bits(p);
    const uint8_t* b = buf + bit / 8;
    if (w == 4) {
        uint8_t nib = (*b >> (bit % 8)) & 0xf;
        return (nib ^ 0x8) - 0x8;
    }
    if (w == 8) return static_cast<int8_t>(*b);
    return static_cast<int16_t>(b[0] | (b[1] << 8));
}

void buf_put(uint8_t* buf, int64_t bit, Precision p, int32_t v) {
    const int w = width_bits(p);
    uint8_t* b = buf + bit / 8;
    if (w == 4) {
        const int sh = static_cast<int>(bit % 8);
        *b = static_cast<uint8_t>((*b & ~(0xf << sh)) | ((v & 0xf) << sh));
    } else if (w == 8) {
        *b = static_cast<uint8_t>(v);
    } else {
        b[0] = static_cast<uint8_t>(v);
        b[1] = static_cast<uint8_t>(v >> 8);
    }
}

// ---------------------------------------------------------------------------
// Planner scaffolding
// ---------------------------------------------------------------------------

// Kernel sub-rectangle of a decomposed kernel.
struct Rect {
    int ky0, kh, kx0, kw;
    int taps() const { return kh * kw; }
};

std::vector<Rect> make_rects(int kh, int kw) {
    std::vector<Rect> out;
    int ky0 = 0;
    for (int sh : decompose_axis(kh)) {
        int kx0 = 0;
        for (int sw : decompose_axis(kw)) {
            out.push_back({ky0, sh, kx0, sw});
            kx0 += sw;
        }
        ky0 += sh;
    }
    return out;
}

// One r_cnt-wide sweep of output positions (never crosses an output row).
struct Sweep {
    int oy, ox0, r_cnt;
};

std::vector<Sweep> make_sweeps(int oy0, int oy1, int ow, int R) {
    std::vector<Sweep> out;
    for (int oy = oy0; oy < oy1; ++oy)
        for (int ox0 = 0; ox0 < ow; ox0 += R)
            out.push_back({oy, ox0, std::min(R, ow - ox0)});
    return out;
}

// A weight-fetch unit: a contiguous run of (ic-pack, tap) reduction steps.
// Either several whole ic-packs (t covers the full rect) or a tap sub-range
// of a single pack.
struct RedSlice {
    int icp0, icp_n;  // chunk-local pack range
    int t0, t_n;      // tap range within the rect
    int steps() const { return icp_n * t_n; }
};

std::vector<RedSlice> make_slices(int icp_n, int ntaps, int cap_words) {
    std::vector<RedSlice> out;
    if (ntaps <= cap_words) {
        const int per = std::max(1, cap_words / ntaps);
        for (int i = 0; i < icp_n; i += per)
            out.push_back({i, std::min(per, icp_n - i), 0, ntaps});
        return out;
    }
    const int per_t = std::min(cap_words, ntaps);
    for (int i = 0; i < icp_n; ++i)
        for (int t0 = 0; t0 < ntaps; t0 += per_t)
            out.push_back({i, 1, t0, std::min(per_t, ntaps - t0)});
    return out;
}

// Instruction emission with side tables, config-register dedup and weight
// buffer ping-pong.
struct Emitter {
    Plan& plan;
    const HwConfig& hw;
    int w_toggle = 0;
    VsaCsr cur{};
    bool csr_valid = false;

    explicit Emitter(Plan& p) : plan(p), hw(p.hw) {}

    void push(const Instruction& inst, SideInfo s) {
        plan.program.push_back(inst);
        plan.side.push_back(std::move(s));
    }

    void vsetvli(Precision p, uint32_t avl) {
        Instruction i{};
        i.mnemonic = Mnemonic::VSETVLI;
        int sew_code = width_bits(p) == 16 ? 1 : 0;  // e8 carries int4/int8 data
        i.zimm = static_cast<uint16_t>(sew_code << 3);
        SideInfo s{};
        s.avl = avl;
        push(i, std::move(s));
    }

    void vsacfg(const VsaCsr& csr) {
        if (csr_valid && csr == cur) return;
        Instruction i{};
        i.mnemonic = Mnemonic::VSACFG;
        encode_csr(csr, i.zimm, i.uimm);
        push(i, SideInfo{});
        cur = csr;
        csr_valid = true;
    }

    uint32_t wbuf_next() {
        uint32_t b = w_toggle ? kWPong : kWPing;
        w_toggle ^= 1;
        return b;
    }

    void vsald(const LoadDesc& d, uint64_t span_bytes) {
        Instruction i{};
        i.mnemonic = Mnemonic::VSALD;
        i.rs1 = 10;
        i.vd = static_cast<uint8_t>(d.vrf_base / Vrf::kRegBytes);
        i.ew = static_cast<uint8_t>(width_bits(d.prec));
        SideInfo s{};
        s.load = d;
        s.writes_mask = region_mask(d.vrf_base, span_bytes);
        push(i, std::move(s));
        plan.pred_load_bytes += d.bytes;
    }

    void vse(const StoreDesc& d, uint64_t span_bytes) {
        Instruction i{};
        i.mnemonic = Mnemonic::VSE;
        i.rs1 = 11;
        i.vd = static_cast<uint8_t>(d.vrf_base / Vrf::kRegBytes);
        i.ew = 32;
        SideInfo s{};
        s.store = d;
        s.reads_mask = region_mask(d.vrf_base, span_bytes);
        push(i, std::move(s));
        plan.pred_store_bytes += d.bytes;
    }

    void vsam(Block b, uint32_t reads, uint32_t writes, bool use_vsac = false) {
        Instruction i{};
        i.mnemonic = use_vsac ? Mnemonic::VSAC : Mnemonic::VSAM;
        i.vd = static_cast<uint8_t>(kOutBase / Vrf::kRegBytes);
        i.vs1 = 0;
        i.vs2 = 16;
        SideInfo s{};
        s.block = static_cast<int>(plan.blocks.size());
        s.reads_mask = reads;
        s.writes_mask = writes;
        for (const Stage& st : b.stages) plan.valid_macs += st.valid_macs;
        for (const DwStage& st : b.dw) plan.valid_macs += st.valid_macs;
        plan.blocks.push_back(std::move(b));
        push(i, std::move(s));
    }
};

// ---------------------------------------------------------------------------
// Dense convolution planner (FF / FFCS / CF)
// ---------------------------------------------------------------------------

void plan_dense_conv(Plan& plan, int stage_n) {
    const ConvShape& cs = plan.op.conv;
    const Precision prec = plan.op.precision;
    const HwConfig& hw = plan.hw;
    const int P = pp(prec);
    const int R = hw.tile_r, C = hw.tile_c, L = hw.lanes;
    const int oh = cs.oh(), ow = cs.ow();
    const int PW = cs.iw + 2 * cs.pad;
    const int s = cs.stride;

    const std::vector<Rect> rects = make_rects(cs.kh, cs.kw);
    int ntaps_max = 1;
    for (const Rect& r : rects) ntaps_max = std::max(ntaps_max, r.taps());

    const int cap_words = static_cast<int>(kWBytes / (8 * C));  // per weight buffer

    // Output-row chunking: the int32 partial grid for a chunk must fit the
    // output region, and the padded input rows it needs must fit the operand
    // region for at least one ic-pack.
    const int out_rows_cap = static_cast<int>(kOutBytes / (4u * C * ow));
    if (out_rows_cap < 1)
        throw ScheduleError("one output row (" + std::to_string(ow) +
                            " positions) exceeds the partial-sum region");
    int chunk_oh = std::min(oh, out_rows_cap);
    auto prows_of = [&](int rows) { return (rows - 1) * s + cs.kh; };
    auto icp_x_cap = [&](int rows) {
        return static_cast<int>(kXBytes / (8ll * prows_of(rows) * PW));
    };
    while (chunk_oh > 1 && icp_x_cap(chunk_oh) < 1) --chunk_oh;
    if (icp_x_cap(chunk_oh) < 1)
        throw ScheduleError("padded input window " + std::to_string(prows_of(1)) + "x" +
                            std::to_string(PW) + " exceeds the operand region");

    const int ic_packs = static_cast<int>(ceil_div(cs.ic, P));
    int icp_cap = icp_x_cap(chunk_oh);
    if (plan.strategy == Strategy::FF)
        icp_cap = std::min(icp_cap, std::max(1, cap_words / ntaps_max));
    const int icp_chunk = std::min(ic_packs, icp_cap);
    const int ic_chunks = static_cast<int>(ceil_div(ic_packs, icp_chunk));

    const int oc_per_round = L * C;
    const int oc_rounds = static_cast<int>(ceil_div(cs.oc, oc_per_round));

    const uint32_t rb_in = row_bytes(cs.iw, prec);

    Emitter em(plan);
    em.vsetvli(prec, 0);

    for (int ocr = 0; ocr < oc_rounds; ++ocr) {
        const int oc0 = ocr * oc_per_round;
        const int ocn = std::min(cs.oc, oc0 + oc_per_round);
        const int oc_real = ocn - oc0;

        for (int oy0 = 0; oy0 < oh; oy0 += chunk_oh) {
            const int oy1 = std::min(oh, oy0 + chunk_oh);
            const int py0 = oy0 * s;
            const int prows = prows_of(oy1 - oy0);
            const int chunk_pos = (oy1 - oy0) * ow;
            const std::vector<Sweep> sweeps = make_sweeps(oy0, oy1, ow, R);
            bool grid_virgin = true;

            for (int icc = 0; icc < ic_chunks; ++icc) {
                const int gp0 = icc * icp_chunk;
                const int icp_n = std::min(icp_chunk, ic_packs - gp0);

                // Operand fetch: padded, channel-packed plane rows.
                {
                    LoadDesc d{};
                    d.kind = LoadKind::ConvInput;
                    d.prec = prec;
                    d.vrf_base = kXBase;
                    d.ic0 = gp0 * P;
                    d.icn = std::min(cs.ic, (gp0 + icp_n) * P);
                    d.y0 = py0;
                    d.y1 = py0 + prows;
                    const int ry0 = std::max(0, py0 - cs.pad);
                    const int ry1 = std::min(cs.ih, py0 + prows - cs.pad);
                    d.bytes = static_cast<uint64_t>(d.icn - d.ic0) *
                              std::max(0, ry1 - ry0) * rb_in;
                    em.vsald(d, 8ull * icp_n * prows * PW);
                }

                for (const Rect& rect : rects) {
                    VsaCsr csr{};
                    csr.precision = prec;
                    csr.kernel_size = std::max(rect.kh, rect.kw);
                    csr.strategy = plan.strategy;
                    csr.stage_param_n = stage_n;
                    csr.stride = std::min(s, 4);
                    em.vsacfg(csr);

                    const bool first_pass = grid_virgin;
                    const std::vector<RedSlice> slices =
                        make_slices(icp_n, rect.taps(), cap_words);

                    // Weight fetch descriptor + offset tables for one slice.
                    auto w_load = [&](const RedSlice& sl, uint32_t wbuf) {
                        LoadDesc d{};
                        d.kind = LoadKind::ConvWeights;
                        d.prec = prec;
                        d.vrf_base = wbuf;
                        d.ic0 = (gp0 + sl.icp0) * P;
                        d.icn = std::min(cs.ic, (gp0 + sl.icp0 + sl.icp_n) * P);
                        d.n0 = oc0;
                        d.nn = ocn;
                        d.k0 = sl.t0;
                        d.kn = sl.t0 + sl.t_n;
                        d.ky0 = rect.ky0;
                        d.kx0 = rect.kx0;
                        d.kws = rect.kw;
                        const int wb = width_bits(prec);
                        uint64_t span = 0;
                        for (int t = sl.t0; t < sl.t0 + sl.t_n; ++t) {
                            const int kx = rect.kx0 + t % rect.kw;
                            const int64_t e0 = static_cast<int64_t>(kx) * cs.oc + oc0;
                            const int64_t e1 = static_cast<int64_t>(kx) * cs.oc + ocn;
                            span += ceil_div(e1 * wb, 8) - (e0 * wb) / 8;
                        }
                        d.bytes = span * (d.icn - d.ic0);
                        em.vsald(d, 8ull * sl.steps() * C);
                    };

                    auto fill_offsets = [&](Block& b, const RedSlice& sl) {
                        b.row_off.reserve(sl.steps());
                        b.col_off.reserve(sl.steps());
                        for (int i = 0; i < sl.icp_n; ++i)
                            for (int t = sl.t0; t < sl.t0 + sl.t_n; ++t) {
                                const int ky = rect.ky0 + t / rect.kw;
                                const int kx = rect.kx0 + t % rect.kw;
                                b.row_off.push_back(
                                    8u * ((sl.icp0 + i) * prows * PW + ky * PW + kx));
                                b.col_off.push_back(
                                    8u * ((i * sl.t_n + (t - sl.t0)) * C));
                            }
                    };

                    auto make_stage = [&](const Sweep& sw, const RedSlice& sl,
                                          uint32_t wbuf) {
                        Stage st{};
                        st.row_base = kXBase + 8u * ((sw.oy * s - py0) * PW + sw.ox0 * s);
                        st.row_rstride = 8u * s;
                        st.col_base = wbuf;
                        st.col_cstride = 8;
                        st.r_cnt = sw.r_cnt;
                        st.c_cnt = C;
                        st.step0 = 0;
                        st.steps = sl.steps();
                        const int q0 = (sw.oy - oy0) * ow + sw.ox0;
                        st.io_base = kOutBase + 4u * q0 * C;
                        st.io_rstride = 4u * C;
                        int64_t v = 0;
                        for (int i = 0; i < sl.icp_n; ++i) {
                            const int gp = gp0 + sl.icp0 + i;
                            const int real_ic =
                                std::min(P, cs.ic - gp * P);
                            for (int t = sl.t0; t < sl.t0 + sl.t_n; ++t) {
                                const int ky = rect.ky0 + t / rect.kw;
                                const int kx = rect.kx0 + t % rect.kw;
                                const int iy = sw.oy * s - cs.pad + ky;
                                if (iy < 0 || iy >= cs.ih) continue;
                                for (int r = 0; r < sw.r_cnt; ++r) {
                                    const int ix = (sw.ox0 + r) * s - cs.pad + kx;
                                    if (ix < 0 || ix >= cs.iw) continue;
                                    v += static_cast<int64_t>(real_ic) * oc_real;
                                }
                            }
                        }
                        st.valid_macs = v;
                        return st;
                    };

                    const uint32_t x_mask =
                        region_mask(kXBase, 8ull * icp_n * prows * PW);
                    const uint32_t grid_mask =
                        region_mask(kOutBase, 4ull * chunk_pos * C);

                    if (plan.strategy == Strategy::FF) {
                        for (size_t isl = 0; isl < slices.size(); ++isl) {
                            const RedSlice& sl = slices[isl];
                            const uint32_t wbuf = em.wbuf_next();
                            w_load(sl, wbuf);
                            Block b{};
                            b.kind = BlockKind::Dense;
                            b.precision = prec;
                            fill_offsets(b, sl);
                            const bool acc = !(first_pass && isl == 0);
                            for (const Sweep& sw : sweeps) {
                                Stage st = make_stage(sw, sl, wbuf);
                                st.acc_read = acc;
                                st.write = true;
                                b.stages.push_back(st);
                            }
                            const uint32_t wmask =
                                region_mask(wbuf, 8ull * sl.steps() * C);
                            em.vsam(std::move(b),
                                    x_mask | wmask | (acc ? grid_mask : 0u), grid_mask);
                            grid_virgin = false;
                        }
                    } else if (plan.strategy == Strategy::FFCS) {
                        const int N = stage_n;
                        for (size_t g0 = 0; g0 < sweeps.size(); g0 += N) {
                            const size_t g1 = std::min(sweeps.size(), g0 + N);
                            for (size_t isl = 0; isl < slices.size(); ++isl) {
                                const RedSlice& sl = slices[isl];
                                const uint32_t wbuf = em.wbuf_next();
                                w_load(sl, wbuf);
                                Block b{};
                                b.kind = BlockKind::Dense;
                                b.precision = prec;
                                fill_offsets(b, sl);
                                const bool acc = !(first_pass && isl == 0);
                                for (size_t g = g0; g < g1; ++g) {
                                    Stage st = make_stage(sweeps[g], sl, wbuf);
                                    st.acc_read = acc;
                                    st.write = true;
                                    b.stages.push_back(st);
                                }
                                const uint32_t wmask =
                                    region_mask(wbuf, 8ull * sl.steps() * C);
                                em.vsam(std::move(b),
                                        x_mask | wmask | (acc ? grid_mask : 0u),
                                        grid_mask);
                            }
                        }
                        grid_virgin = false;
                    } else {  // CF: PE-resident chain per sweep
                        for (const Sweep& sw : sweeps) {
                            for (size_t isl = 0; isl < slices.size(); ++isl) {
                                const RedSlice& sl = slices[isl];
                                const uint32_t wbuf = em.wbuf_next();
                                w_load(sl, wbuf);
                                Block b{};
                                b.kind = BlockKind::Dense;
                                b.precision = prec;
                                fill_offsets(b, sl);
                                Stage st = make_stage(sw, sl, wbuf);
                                st.pe_clear = isl == 0;
                                const bool last = isl + 1 == slices.size();
                                st.write = last;
                                st.drain = last;
                                st.acc_read = last && !first_pass;
                                b.stages.push_back(st);
                                const uint32_t wmask =
                                    region_mask(wbuf, 8ull * sl.steps() * C);
                                em.vsam(std::move(b),
                                        x_mask | wmask |
                                            (st.acc_read ? grid_mask : 0u),
                                        st.write ? grid_mask : 0u);
                            }
                        }
                        grid_virgin = false;
                    }
                }
            }

            StoreDesc d{};
            d.kind = StoreDesc::Kind::ConvOut;
            d.vrf_base = kOutBase;
            d.oc0 = oc0;
            d.ocn = ocn;
            d.p0 = oy0 * ow;
            d.p1 = oy1 * ow;
            d.bytes = 4ull * oc_real * chunk_pos;
            em.vse(d, 4ull * chunk_pos * C);
        }
    }
}

// ---------------------------------------------------------------------------
// Matrix-multiply planner
// ---------------------------------------------------------------------------

void plan_mm(Plan& plan, int stage_n) {
    const MmShape& mm = plan.op.mm;
    const Precision prec = plan.op.precision;
    const HwConfig& hw = plan.hw;
    const int P = pp(prec), wb = width_bits(prec);
    const int R = hw.tile_r, C = hw.tile_c, L = hw.lanes;

    const int k_packs = static_cast<int>(ceil_div(mm.k, P));
    const int n_lane = static_cast<int>(ceil_div(mm.n, L));
    const int m_rounds = static_cast<int>(ceil_div(mm.m, R));

    const int n_cap_out = static_cast<int>(kOutBytes / (4u * R));
    const int kp_cap_a = static_cast<int>(kWBytes / (8u * R));
    if (n_cap_out < 1 || kp_cap_a < 1)
        throw ScheduleError("tile rows exceed the on-chip regions");
    const int n_chunk = std::min(n_lane, n_cap_out);
    const int kp_chunk =
        std::min({k_packs, kp_cap_a, static_cast<int>(kXBytes / (8u * n_chunk))});
    if (kp_chunk < 1)
        throw ScheduleError("one k-pack per column does not fit the operand region");
    const int n_chunks = static_cast<int>(ceil_div(n_lane, n_chunk));
    const int k_chunks = static_cast<int>(ceil_div(k_packs, kp_chunk));
    const bool b_resident = n_chunks == 1 && k_chunks == 1;

    const bool use_vsac = mm.n == 1;
    // The whole A operand stays resident in one weight buffer when it fits;
    // otherwise m-row groups ping-pong through the two buffers.
    const bool a_resident =
        k_chunks == 1 && 8ull * mm.m * k_packs <= kWBytes;

    Emitter em(plan);
    em.vsetvli(prec, 0);
    VsaCsr csr{};
    csr.precision = prec;
    csr.kernel_size = 1;
    csr.strategy = Strategy::MM;
    csr.stage_param_n = stage_n;
    csr.stride = 1;
    em.vsacfg(csr);

    auto b_load = [&](int n0, int n_cnt, int kp0, int kp_cnt) {
        LoadDesc d{};
        d.kind = LoadKind::MmB;
        d.prec = prec;
        d.vrf_base = kXBase;
        d.n0 = n0;
        d.nn = n0 + n_cnt;
        d.k0 = kp0;
        d.kn = kp0 + kp_cnt;
        const int ke0 = kp0 * P;
        const int ke1 = std::min(mm.k, (kp0 + kp_cnt) * P);
        uint64_t per_k = 0;
        for (int l = 0; l < L; ++l) {
            const int64_t g0 = static_cast<int64_t>(l) * n_lane + n0;
            const int64_t g1 = std::min<int64_t>(mm.n, g0 + n_cnt);
            if (g1 > g0) per_k += ceil_div(g1 * wb, 8) - (g0 * wb) / 8;
        }
        d.bytes = per_k * (ke1 - ke0);
        em.vsald(d, 8ull * n_cnt * kp_cnt);
    };

    if (b_resident) b_load(0, n_lane, 0, k_packs);
    if (a_resident) {
        LoadDesc d{};
        d.kind = LoadKind::MmA;
        d.prec = prec;
        d.vrf_base = kWPing;
        d.y0 = 0;
        d.y1 = mm.m;
        d.k0 = 0;
        d.kn = k_packs;
        d.bytes = static_cast<uint64_t>(mm.m) * row_bytes(mm.k, prec);
        em.vsald(d, 8ull * mm.m * k_packs);
    }

    for (int mr = 0; mr < m_rounds; ++mr) {
        const int m0 = mr * R;
        const int m_cnt = std::min(R, mm.m - m0);
        for (int nc = 0; nc < n_chunks; ++nc) {
            const int n0 = nc * n_chunk;
            const int n_cnt = std::min(n_chunk, n_lane - n0);
            for (int kc = 0; kc < k_chunks; ++kc) {
                const int kp0 = kc * kp_chunk;
                const int kp_cnt = std::min(kp_chunk, k_packs - kp0);
                const int ke0 = kp0 * P;
                const int ke1 = std::min(mm.k, (kp0 + kp_cnt) * P);

                uint32_t abuf = kWPing;
                if (!a_resident) {
                    abuf = em.wbuf_next();
                    LoadDesc d{};
                    d.kind = LoadKind::MmA;
                    d.prec = prec;
                    d.vrf_base = abuf;
                    d.y0 = m0;
                    d.y1 = m0 + m_cnt;
                    d.k0 = kp0;
                    d.kn = kp0 + kp_cnt;
                    d.bytes = static_cast<uint64_t>(m_cnt) *
                              (ceil_div(static_cast<int64_t>(ke1) * wb, 8) - ke0 * wb / 8);
                    em.vsald(d, 8ull * m_cnt * kp_cnt);
                }
                if (!b_resident) b_load(n0, n_cnt, kp0, kp_cnt);

                const int k_real = ke1 - ke0;
                const uint32_t a_row0 = a_resident ? 8u * m0 * k_packs : 0u;

                // One tensor op per R x C output tile sweep.
                for (int j0 = 0; j0 < n_cnt; j0 += C) {
                    Block b{};
                    b.kind = BlockKind::Dense;
                    b.precision = prec;
                    b.row_off.reserve(kp_cnt);
                    b.col_off.reserve(kp_cnt);
                    for (int j = 0; j < kp_cnt; ++j) {
                        b.row_off.push_back(8u * j);
                        b.col_off.push_back(8u * j);
                    }
                    Stage st{};
                    st.row_base = abuf + a_row0;
                    st.row_rstride = 8u * kp_cnt;
                    st.col_base = kXBase + 8u * (b_resident
                                                     ? (n0 + j0) * k_packs
                                                     : j0 * kp_cnt);
                    st.col_cstride = 8u * (b_resident ? k_packs : kp_cnt);
                    st.r_cnt = m_cnt;
                    st.c_cnt = std::min(C, n_cnt - j0);
                    st.steps = kp_cnt;
                    st.acc_read = kc > 0;
                    st.write = true;
                    st.io_base = kOutBase + 4u * j0;
                    st.io_rstride = 4u * n_cnt;
                    int64_t cols_real = 0;
                    for (int c = 0; c < st.c_cnt; ++c) {
                        const int local = n0 + j0 + c;
                        if (local >= n_lane) continue;
                        for (int l = 0; l < L; ++l)
                            if (static_cast<int64_t>(l) * n_lane + local < mm.n)
                                ++cols_real;
                    }
                    st.valid_macs = static_cast<int64_t>(m_cnt) * cols_real * k_real;

                    const uint32_t grid_mask = region_mask(
                        st.io_base,
                        static_cast<uint64_t>(m_cnt - 1) * st.io_rstride +
                            4ull * st.c_cnt);
                    const uint32_t rmask =
                        region_mask(st.col_base,
                                    static_cast<uint64_t>(st.c_cnt - 1) *
                                            st.col_cstride +
                                        8ull * kp_cnt) |
                        region_mask(st.row_base, 8ull * m_cnt * kp_cnt) |
                        (kc > 0 ? grid_mask : 0u);
                    b.stages.push_back(st);
                    em.vsam(std::move(b), rmask, grid_mask, use_vsac);
                }
            }

            StoreDesc d{};
            d.kind = StoreDesc::Kind::MmOut;
            d.vrf_base = kOutBase;
            d.oc0 = m0;
            d.ocn = m0 + m_cnt;
            d.n0 = n0;
            d.nn = n0 + n_cnt;
            uint64_t cols = 0;
            for (int l = 0; l < L; ++l) {
                const int64_t g0 = static_cast<int64_t>(l) * n_lane + n0;
                const int64_t g1 = std::min<int64_t>(mm.n, g0 + n_cnt);
                if (g1 > g0) cols += g1 - g0;
            }
            d.bytes = 4ull * m_cnt * cols;
            em.vse(d, 4ull * m_cnt * n_cnt);
        }
    }
}

// ---------------------------------------------------------------------------
// Depth-wise planner (FF only)
// ---------------------------------------------------------------------------

void plan_dw(Plan& plan, int stage_n) {
    const ConvShape& cs = plan.op.conv;
    const Precision prec = plan.op.precision;
    const HwConfig& hw = plan.hw;
    const int L = hw.lanes;
    const int oh = cs.oh(), ow = cs.ow();
    const int s = cs.stride;

    const uint32_t x_pitch = align_up(row_bytes(cs.iw, prec), 8);
    const uint32_t w_pitch = align_up(row_bytes(cs.kw, prec), 8);
    if (static_cast<uint64_t>(cs.kh) * w_pitch > kWBytes)
        throw ScheduleError("depth-wise taps exceed the weight buffer");
    const int x_rows_cap = static_cast<int>(kXBytes / x_pitch);
    const int out_rows_cap = static_cast<int>(kOutBytes / (4u * ow));
    if (x_rows_cap < cs.kh || out_rows_cap < 1)
        throw ScheduleError("depth-wise planes exceed the on-chip regions");

    auto in_rows = [&](int oy0, int oy1) {
        const int ry0 = std::max(0, oy0 * s - cs.pad);
        const int ry1 = std::min(cs.ih, (oy1 - 1) * s - cs.pad + cs.kh);
        return std::pair<int, int>{ry0, std::max(ry0, ry1)};
    };
    int chunk_oh = std::min(oh, out_rows_cap);
    while (chunk_oh > 1) {
        bool ok = true;
        for (int oy0 = 0; oy0 < oh && ok; oy0 += chunk_oh) {
            auto [a, b] = in_rows(oy0, std::min(oh, oy0 + chunk_oh));
            ok = b - a <= x_rows_cap;
        }
        if (ok) break;
        --chunk_oh;
    }
    {
        auto [a, b] = in_rows(0, 1);
        if (b - a > x_rows_cap)
            throw ScheduleError("depth-wise input window exceeds the operand region");
    }

    const std::vector<Rect> rects = make_rects(cs.kh, cs.kw);
    const int groups = static_cast<int>(ceil_div(cs.ic, L));
    const uint32_t rb_in = row_bytes(cs.iw, prec);
    const uint32_t rb_w = row_bytes(cs.kw, prec);

    Emitter em(plan);
    em.vsetvli(prec, 0);

    for (int g = 0; g < groups; ++g) {
        const int chan0 = g * L;
        const int active = std::min(L, cs.ic - chan0);

        {
            LoadDesc d{};
            d.kind = LoadKind::DwWeights;
            d.prec = prec;
            d.vrf_base = kWPing;
            d.ic0 = chan0;
            d.icn = chan0 + active;
            d.bytes = static_cast<uint64_t>(active) * cs.kh * rb_w;
            em.vsald(d, static_cast<uint64_t>(cs.kh) * w_pitch);
        }

        for (int oy0 = 0; oy0 < oh; oy0 += chunk_oh) {
            const int oy1 = std::min(oh, oy0 + chunk_oh);
            auto [ry0, ry1] = in_rows(oy0, oy1);

            {
                LoadDesc d{};
                d.kind = LoadKind::DwInput;
                d.prec = prec;
                d.vrf_base = kXBase;
                d.ic0 = chan0;
                d.icn = chan0 + active;
                d.y0 = ry0;
                d.y1 = ry1;
                d.bytes = static_cast<uint64_t>(active) * (ry1 - ry0) * rb_in;
                em.vsald(d, static_cast<uint64_t>(ry1 - ry0) * x_pitch);
            }

            const uint32_t x_mask =
                region_mask(kXBase, static_cast<uint64_t>(ry1 - ry0) * x_pitch);
            const uint32_t w_mask =
                region_mask(kWPing, static_cast<uint64_t>(cs.kh) * w_pitch);
            const uint32_t o_mask =
                region_mask(kOutBase, 4ull * (oy1 - oy0) * ow);

            for (size_t ri = 0; ri < rects.size(); ++ri) {
                const Rect& rect = rects[ri];
                VsaCsr csr{};
                csr.precision = prec;
                csr.kernel_size = std::max(rect.kh, rect.kw);
                csr.strategy = Strategy::FF;
                csr.stage_param_n = stage_n;
                csr.stride = std::min(s, 4);
                em.vsacfg(csr);

                Block b{};
                b.kind = BlockKind::Dw;
                b.precision = prec;
                b.kernel_h = rect.kh;
                b.kernel_w = rect.kw;
                b.ky0 = rect.ky0;
                b.kx0 = rect.kx0;
                b.stride = s;
                b.pad = cs.pad;
                b.in_w = cs.iw;
                b.out_w = ow;
                b.x_pitch = static_cast<int>(x_pitch);
                b.w_pitch = static_cast<int>(w_pitch);

                DwStage st{};
                st.x_base = kXBase;
                st.w_base = kWPing;
                st.out_base = kOutBase;
                st.chan0 = chan0;
                st.active_lanes = active;
                st.y0 = ry0;
                st.y1 = ry1;
                st.oy0 = oy0;
                st.oy1 = oy1;
                st.init = ri == 0;
                int64_t v = 0;
                for (int iy = ry0; iy < ry1; ++iy)
                    for (int ix = 0; ix < cs.iw; ++ix)
                        for (int ty = 0; ty < rect.kh; ++ty)
                            for (int tx = 0; tx < rect.kw; ++tx) {
                                const int py = iy + cs.pad - (rect.ky0 + ty);
                                const int px = ix + cs.pad - (rect.kx0 + tx);
                                if (py % s || px % s) continue;
                                const int oy = py / s, ox = px / s;
                                if (oy < oy0 || oy >= oy1 || ox < 0 || ox >= ow) continue;
                                ++v;
                            }
                st.valid_macs = v * active;
                b.dw.push_back(st);

                em.vsam(std::move(b), x_mask | w_mask | o_mask, o_mask);
            }

            StoreDesc d{};
            d.kind = StoreDesc::Kind::DwOut;
            d.vrf_base = kOutBase;
            d.oc0 = chan0;
            d.ocn = chan0 + active;
            d.p0 = oy0;
            d.p1 = oy1;
            d.bytes = 4ull * active * (oy1 - oy0) * ow;
            em.vse(d, 4ull * (oy1 - oy0) * ow);
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public helpers
// ---------------------------------------------------------------------------

void HwConfig::validate() const {
    if (lanes < 1 || lanes > 64) throw ConfigError("lanes must be 1..64");
    if (tile_r < 1 || tile_r > 16 || tile_c < 1 || tile_c > 16)
        throw ConfigError("tile dimensions must be 1..16");
    if (bus_bytes < 8 || bus_bytes > 1024 || (bus_bytes & (bus_bytes - 1)))
        throw ConfigError("bus_bytes must be a power of two in 8..1024");
}

void OperatorDesc::validate() const {
    if (kind == OpKind::Conv)
        conv.validate();
    else
        mm.validate();
}

uint64_t OperatorDesc::macs() const {
    return kind == OpKind::Conv ? conv_macs(conv) : mm_macs(mm);
}

std::string OperatorDesc::label() const {
    std::string out;
    if (kind == OpKind::Conv) {
        out = conv.depthwise ? "dwconv" : "conv";
        out += std::to_string(conv.kh) + "x" + std::to_string(conv.kw);
        out += "s" + std::to_string(conv.stride) + "p" + std::to_string(conv.pad);
        out += "-ic" + std::to_string(conv.ic);
        out += "-" + std::to_string(conv.ih) + "x" + std::to_string(conv.iw);
        out += "-oc" + std::to_string(conv.oc);
    } else {
        out = "mm" + std::to_string(mm.m) + "x" + std::to_string(mm.k) + "x" +
              std::to_string(mm.n);
    }
    return out + "-" + to_string(precision);
}

uint32_t row_bytes(int64_t elems, Precision p) {
    return static_cast<uint32_t>(ceil_div(elems * width_bits(p), 8));
}

void poke_elems(ExternalMemory& mem, uint32_t base, const int32_t* vals, size_t n,
                Precision p) {
    std::vector<uint8_t> buf(row_bytes(static_cast<int64_t>(n), p), 0);
    for (size_t i = 0; i < n; ++i)
        buf_put(buf.data(), static_cast<int64_t>(i) * width_bits(p), p, vals[i]);
    mem.poke(base, buf.data(), buf.size());
}

std::vector<int32_t> peek_elems(const ExternalMemory& mem, uint32_t base, size_t n,
                                Precision p) {
    std::vector<uint8_t> buf(row_bytes(static_cast<int64_t>(n), p));
    mem.peek(base, buf.data(), buf.size());
    std::vector<int32_t> out(n);
    for (size_t i = 0; i < n; ++i)
        out[i] = buf_elem(buf.data(), static_cast<int64_t>(i) * width_bits(p), p);
    return out;
}

void poke_i32(ExternalMemory& mem, uint32_t base, const int32_t* vals, size_t n) {
    mem.poke(base, vals, n * 4);
}

std::vector<int32_t> peek_i32(const ExternalMemory& mem, uint32_t base, size_t n) {
    std::vector<int32_t> out(n);
    mem.peek(base, out.data(), n * 4);
    return out;
}

ExtLayout default_layout(const OperatorDesc& op, uint32_t base) {
    ExtLayout l{};
    uint64_t x_bytes, w_bytes, y_bytes;
    if (op.kind == OpKind::Conv) {
        const ConvShape& c = op.conv;
        x_bytes = static_cast<uint64_t>(c.ic) * c.ih * row_bytes(c.iw, op.precision);
        w_bytes = static_cast<uint64_t>(c.ic) * c.kh *
                  row_bytes(static_cast<int64_t>(c.kw) * (c.depthwise ? 1 : c.oc),
                            op.precision);
        y_bytes = 4ull * c.output_elems();
    } else {
        x_bytes = static_cast<uint64_t>(op.mm.k) * row_bytes(op.mm.n, op.precision);
        w_bytes = static_cast<uint64_t>(op.mm.m) * row_bytes(op.mm.k, op.precision);
        y_bytes = 4ull * op.mm.y_elems();
    }
    l.x_base = align_up(base, 64);
    l.w_base = align_up(l.x_base + static_cast<uint32_t>(x_bytes), 64);
    l.y_base = align_up(l.w_base + static_cast<uint32_t>(w_bytes), 64);
    (void)y_bytes;
    return l;
}

uint32_t region_mask(uint32_t base, uint64_t bytes) {
    if (bytes == 0) return 0;
    const uint32_t r0 = base / Vrf::kRegBytes;
    const uint32_t r1 = static_cast<uint32_t>(
        ceil_div(base + bytes, Vrf::kRegBytes));
    uint32_t m = 0;
    for (uint32_t r = r0; r < r1 && r < 32; ++r) m |= 1u << r;
    return m;
}

Strategy select_strategy(const OperatorDesc& op) {
    if (op.kind == OpKind::Mm) return Strategy::MM;
    if (op.conv.depthwise) return Strategy::FF;
    if (op.conv.kh == 1 && op.conv.kw == 1) return Strategy::CF;
    return Strategy::FFCS;
}

void check_strategy(const OperatorDesc& op, Strategy s) {
    if (op.kind == OpKind::Mm) {
        if (s != Strategy::MM)
            throw StrategyError(std::string(to_string(s)) +
                                " is a convolution strategy; matrix operators use MM");
        return;
    }
    if (s == Strategy::MM)
        throw StrategyError("MM is a matrix strategy; convolutions use FF/FFCS/CF");
    if (op.conv.depthwise && s != Strategy::FF)
        throw StrategyError(std::string(to_string(s)) +
                            " cannot keep depth-wise taps resident; use FF");
}

std::vector<int> decompose_axis(int k) {
    if (k < 1) throw ConfigError("kernel axis must be >= 1");
    std::vector<int> out;
    while (k > 15) {
        out.push_back(15);
        k -= 15;
    }
    out.push_back(k);
    return out;
}

// ---------------------------------------------------------------------------
// Cycle model
// ---------------------------------------------------------------------------

uint64_t stage_cycles(const Stage& s, Precision p, const HwConfig& hw) {
    const uint64_t req = s.steps;                       // operand request port
    const uint64_t core = static_cast<uint64_t>(s.steps) * core_word_cost(p);
    const uint64_t acc = s.acc_read ? 1 : 0;            // partial-sum fetch
    uint64_t wb = 0;                                    // writeback port
    if (s.write) wb = s.drain ? static_cast<uint64_t>(hw.tile_c) : 1;
    return std::max(std::max(req, core), std::max(acc, wb));
}

uint64_t dw_stage_cycles(const DwStage& s, const Block& b, const HwConfig& hw) {
    // Streamed plane rows occupy the same per-lane multiplier fabric as the
    // dense path: tile_r*tile_c*pp(p) element products per cycle, with int16
    // words taking two passes. The operand port limits consumption to one
    // packed word per cycle. Tap preload is charged on top.
    const uint64_t positions = static_cast<uint64_t>(s.y1 - s.y0) * b.in_w;
    const uint64_t taps = static_cast<uint64_t>(b.kernel_h) * b.kernel_w;
    const uint64_t pack = static_cast<uint64_t>(pp(b.precision));
    const uint64_t slots = static_cast<uint64_t>(hw.tile_r) * hw.tile_c * pack;
    const uint64_t core =
        ceil_div(positions * taps * core_word_cost(b.precision), slots);
    const uint64_t req = ceil_div(positions, pack);
    return std::max(core, req) + taps;
}

uint64_t block_cycles(const Block& b, const HwConfig& hw, bool first_in_program) {
    uint64_t total = first_in_program
                         ? static_cast<uint64_t>(hw.tile_r) + hw.tile_c - 2
                         : 0;  // systolic fill
    for (const Stage& s : b.stages) total += stage_cycles(s, b.precision, hw);
    for (const DwStage& s : b.dw) total += dw_stage_cycles(s, b, hw);
    return total;
}

int64_t Block::valid_macs() const {
    int64_t v = 0;
    for (const Stage& s : stages) v += s.valid_macs;
    for (const DwStage& s : dw) v += s.valid_macs;
    return v;
}

// ---------------------------------------------------------------------------
// plan_operator
// ---------------------------------------------------------------------------

Plan plan_operator(const OperatorDesc& op, const HwConfig& hw, Strategy strategy,
                   int stage_n) {
    op.validate();
    hw.validate();
    check_strategy(op, strategy);
    if (stage_n < 1 || stage_n > 7)
        throw ConfigError("stage parameter N must be 1..7");

    Plan plan{};
    plan.op = op;
    plan.strategy = strategy;
    plan.hw = hw;
    plan.layout = default_layout(op);

    if (op.kind == OpKind::Mm)
        plan_mm(plan, stage_n);
    else if (op.conv.depthwise)
        plan_dw(plan, stage_n);
    else
        plan_dense_conv(plan, stage_n);

    if (plan.valid_macs != op.macs())
        throw LoweringError("plan covers " + std::to_string(plan.valid_macs) +
                            " macs, operator needs " + std::to_string(op.macs()));

    uint32_t used = 0;
    for (const SideInfo& s : plan.side) used |= s.reads_mask | s.writes_mask;
    plan.vregs_used = std::popcount(used);
    return plan;
}

// ---------------------------------------------------------------------------
// Functional execution
// ---------------------------------------------------------------------------

void execute_load(const LoadDesc& d, const Plan& plan, ExternalMemory& mem, Vrf& vrf,
                  uint64_t cycle) {
    const Precision p = d.prec;
    const int wb = width_bits(p);
    const int P = pp(p);
    const int L = vrf.lanes();
    const ExtLayout& lay = plan.layout;
    std::vector<uint8_t> buf;

    switch (d.kind) {
        case LoadKind::ConvInput: {
            const ConvShape& cs = plan.op.conv;
            const int PW = cs.iw + 2 * cs.pad;
            const int prows = d.y1 - d.y0;
            const int icp_cnt = static_cast<int>(ceil_div(d.icn - d.ic0, P));
            const uint32_t span = 8u * icp_cnt * prows * PW;
            for (int l = 0; l < L; ++l) zero_span(vrf, l, d.vrf_base, span);
            const uint32_t rb = row_bytes(cs.iw, p);
            buf.resize(rb);
            const int ry0 = std::max(0, d.y0 - cs.pad);
            const int ry1 = std::min(cs.ih, d.y1 - cs.pad);
            for (int ic = d.ic0; ic < d.icn; ++ic) {
                const int icp = (ic - d.ic0) / P;
                const int slot = (ic - d.ic0) % P;
                for (int ry = ry0; ry < ry1; ++ry) {
                    mem.read(lay.x_base + (static_cast<uint32_t>(ic) * cs.ih + ry) * rb,
                             rb, buf.data(), cycle);
                    const int prow = ry + cs.pad - d.y0;
                    for (int ix = 0; ix < cs.iw; ++ix) {
                        const int32_t v =
                            buf_elem(buf.data(), static_cast<int64_t>(ix) * wb, p);
                        if (v == 0) continue;
                        const uint32_t word =
                            d.vrf_base +
                            8u * (icp * prows * PW + prow * PW + (ix + cs.pad));
                        for (int l = 0; l < L; ++l) put_sub(vrf, l, word, slot, p, v);
                    }
                }
            }
            break;
        }
        case LoadKind::ConvWeights: {
            const ConvShape& cs = plan.op.conv;
            const int C = plan.hw.tile_c;
            const int t_cnt = d.kn - d.k0;
            const int icp_cnt = static_cast<int>(ceil_div(d.icn - d.ic0, P));
            const uint32_t span = 8u * icp_cnt * t_cnt * C;
            for (int l = 0; l < L; ++l) zero_span(vrf, l, d.vrf_base, span);
            const uint32_t rbw =
                row_bytes(static_cast<int64_t>(cs.kw) * cs.oc, p);
            for (int ic = d.ic0; ic < d.icn; ++ic) {
                const int icp = (ic - d.ic0) / P;
                const int slot = (ic - d.ic0) % P;
                for (int t = d.k0; t < d.kn; ++t) {
                    const int ky = d.ky0 + t / d.kws;
                    const int kx = d.kx0 + t % d.kws;
                    const int64_t e0 = static_cast<int64_t>(kx) * cs.oc + d.n0;
                    const int64_t e1 = static_cast<int64_t>(kx) * cs.oc + d.nn;
                    const int64_t byte0 = e0 * wb / 8;
                    const uint32_t len =
                        static_cast<uint32_t>(ceil_div(e1 * wb, 8) - byte0);
                    buf.resize(len);
                    mem.read(lay.w_base +
                                 (static_cast<uint32_t>(ic) * cs.kh + ky) * rbw +
                                 static_cast<uint32_t>(byte0),
                             len, buf.data(), cycle);
                    for (int oc = d.n0; oc < d.nn; ++oc) {
                        const int32_t v = buf_elem(
                            buf.data(),
                            (static_cast<int64_t>(kx) * cs.oc + oc) * wb - byte0 * 8, p);
                        const int rel = oc - d.n0;
                        const uint32_t word =
                            d.vrf_base +
                            8u * ((icp * t_cnt + (t - d.k0)) * C + rel % C);
                        put_sub(vrf, rel / C, word, slot, p, v);
                    }
                }
            }
            break;
        }
        case LoadKind::MmA: {
            const MmShape& mm = plan.op.mm;
            const int kp_cnt = d.kn - d.k0;
            const uint32_t span = 8u * (d.y1 - d.y0) * kp_cnt;
            for (int l = 0; l < L; ++l) zero_span(vrf, l, d.vrf_base, span);
            const uint32_t rba = row_bytes(mm.k, p);
            const int ke0 = d.k0 * P;
            const int ke1 = std::min(mm.k, d.kn * P);
            const int64_t byte0 = static_cast<int64_t>(ke0) * wb / 8;
            const uint32_t len =
                static_cast<uint32_t>(ceil_div(static_cast<int64_t>(ke1) * wb, 8) - byte0);
            buf.resize(len);
            for (int m = d.y0; m < d.y1; ++m) {
                mem.read(lay.w_base + static_cast<uint32_t>(m) * rba +
                             static_cast<uint32_t>(byte0),
                         len, buf.data(), cycle);
                for (int k = ke0; k < ke1; ++k) {
                    const int32_t v = buf_elem(
                        buf.data(), static_cast<int64_t>(k) * wb - byte0 * 8, p);
                    if (v == 0) continue;
                    const uint32_t word =
                        d.vrf_base + 8u * ((m - d.y0) * kp_cnt + (k / P - d.k0));
                    for (int l = 0; l < L; ++l) put_sub(vrf, l, word, k % P, p, v);
                }
            }
            break;
        }
        case LoadKind::MmB: {
            const MmShape& mm = plan.op.mm;
            const int n_lane = static_cast<int>(ceil_div(mm.n, L));
            const int kp_cnt = d.kn - d.k0;
            const uint32_t span = 8u * (d.nn - d.n0) * kp_cnt;
            for (int l = 0; l < L; ++l) zero_span(vrf, l, d.vrf_base, span);
            const uint32_t rbb = row_bytes(mm.n, p);
            const int ke0 = d.k0 * P;
            const int ke1 = std::min(mm.k, d.kn * P);
            for (int l = 0; l < L; ++l) {
                const int64_t g0 = static_cast<int64_t>(l) * n_lane + d.n0;
                const int64_t g1 = std::min<int64_t>(mm.n, g0 + (d.nn - d.n0));
                if (g1 <= g0) continue;
                const int64_t byte0 = g0 * wb / 8;
                const uint32_t len =
                    static_cast<uint32_t>(ceil_div(g1 * wb, 8) - byte0);
                buf.resize(len);
                for (int k = ke0; k < ke1; ++k) {
                    mem.read(lay.x_base + static_cast<uint32_t>(k) * rbb +
                                 static_cast<uint32_t>(byte0),
                             len, buf.data(), cycle);
                    for (int64_t n = g0; n < g1; ++n) {
                        const int32_t v =
                            buf_elem(buf.data(), n * wb - byte0 * 8, p);
                        if (v == 0) continue;
                        const uint32_t word =
                            d.vrf_base +
                            8u * (static_cast<uint32_t>(n - g0 + 0) * kp_cnt +
                                  (k / P - d.k0));
                        put_sub(vrf, l, word, k % P, p, v);
                    }
                }
            }
            break;
        }
        case LoadKind::DwInput: {
            const ConvShape& cs = plan.op.conv;
            const uint32_t pitch = align_up(row_bytes(cs.iw, p), 8);
            const uint32_t rb = row_bytes(cs.iw, p);
            const uint32_t span = static_cast<uint32_t>(d.y1 - d.y0) * pitch;
            buf.resize(rb);
            for (int li = 0; li < d.icn - d.ic0; ++li) {
                zero_span(vrf, li, d.vrf_base, span);
                const int ch = d.ic0 + li;
                for (int ry = d.y0; ry < d.y1; ++ry) {
                    mem.read(lay.x_base + (static_cast<uint32_t>(ch) * cs.ih + ry) * rb,
                             rb, buf.data(), cycle);
                    vrf.write_lane(li, d.vrf_base + (ry - d.y0) * pitch, buf.data(), rb);
                }
            }
            break;
        }
        case LoadKind::DwWeights: {
            const ConvShape& cs = plan.op.conv;
            const uint32_t pitch = align_up(row_bytes(cs.kw, p), 8);
            const uint32_t rb = row_bytes(cs.kw, p);
            buf.resize(rb);
            for (int li = 0; li < d.icn - d.ic0; ++li) {
                zero_span(vrf, li, d.vrf_base, static_cast<uint32_t>(cs.kh) * pitch);
                const int ch = d.ic0 + li;
                for (int ky = 0; ky < cs.kh; ++ky) {
                    mem.read(lay.w_base + (static_cast<uint32_t>(ch) * cs.kh + ky) * rb,
                             rb, buf.data(), cycle);
                    vrf.write_lane(li, d.vrf_base + ky * pitch, buf.data(), rb);
                }
            }
            break;
        }
        case LoadKind::RawStriped: {
            const int eb = wb / 8;
            buf.resize(static_cast<size_t>(d.elems) * eb);
            mem.read(d.ext, static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            for (int i = 0; i < d.elems; ++i) {
                uint32_t v = 0;
                std::memcpy(&v, buf.data() + static_cast<size_t>(i) * eb, eb);
                vrf.store_elem(d.reg, i, eb, v);
            }
            break;
        }
    }
}

void execute_store(const StoreDesc& d, const Plan& plan, ExternalMemory& mem, Vrf& vrf,
                   uint64_t cycle) {
    const ExtLayout& lay = plan.layout;
    std::vector<uint8_t> buf;

    switch (d.kind) {
        case StoreDesc::Kind::ConvOut: {
            const ConvShape& cs = plan.op.conv;
            const int C = plan.hw.tile_c;
            const uint32_t T = static_cast<uint32_t>(cs.oh()) * cs.ow();
            const int cnt = d.p1 - d.p0;
            buf.resize(static_cast<size_t>(cnt) * 4);
            for (int oc = d.oc0; oc < d.ocn; ++oc) {
                const int rel = oc - d.oc0;
                const int lane = rel / C, c = rel % C;
                for (int p = 0; p < cnt; ++p) {
                    const int32_t v =
                        vrf_i32(vrf, lane, d.vrf_base + 4u * (p * C + c));
                    std::memcpy(buf.data() + static_cast<size_t>(p) * 4, &v, 4);
                }
                mem.write(lay.y_base + 4u * (static_cast<uint32_t>(oc) * T + d.p0),
                          static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            }
            break;
        }
        case StoreDesc::Kind::MmOut: {
            const MmShape& mm = plan.op.mm;
            const int L = vrf.lanes();
            const int n_lane = static_cast<int>(ceil_div(mm.n, L));
            const int n_cnt = d.nn - d.n0;
            for (int m = d.oc0; m < d.ocn; ++m) {
                for (int l = 0; l < L; ++l) {
                    const int64_t g0 = static_cast<int64_t>(l) * n_lane + d.n0;
                    const int64_t g1 = std::min<int64_t>(mm.n, g0 + n_cnt);
                    if (g1 <= g0) continue;
                    buf.resize(static_cast<size_t>(g1 - g0) * 4);
                    for (int64_t n = g0; n < g1; ++n) {
                        const int32_t v = vrf_i32(
                            vrf, l,
                            d.vrf_base +
                                4u * ((m - d.oc0) * n_cnt +
                                      static_cast<int>(n - g0)));
                        std::memcpy(buf.data() + static_cast<size_t>(n - g0) * 4, &v, 4);
                    }
                    mem.write(lay.y_base +
                                  4u * (static_cast<uint32_t>(m) * mm.n +
                                        static_cast<uint32_t>(g0)),
                              static_cast<uint32_t>(buf.size()), buf.data(), cycle);
                }
            }
            break;
        }
        case StoreDesc::Kind::DwOut: {
            const ConvShape& cs = plan.op.conv;
            const int ow = cs.ow();
            const uint32_t T = static_cast<uint32_t>(cs.oh()) * ow;
            const int rows = d.p1 - d.p0;
            buf.resize(static_cast<size_t>(rows) * ow * 4);
            for (int li = 0; li < d.ocn - d.oc0; ++li) {
                const int ch = d.oc0 + li;
                vrf.read_lane(li, buf.data(), d.vrf_base,
                              static_cast<uint32_t>(buf.size()));
                mem.write(lay.y_base +
                              4u * (static_cast<uint32_t>(ch) * T +
                                    static_cast<uint32_t>(d.p0) * ow),
                          static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            }
            break;
        }
        case StoreDesc::Kind::RawStriped: {
            const int eb = d.ew / 8;
            buf.resize(static_cast<size_t>(d.elems) * eb);
            for (int i = 0; i < d.elems; ++i) {
                const uint32_t v = vrf.load_elem(d.reg, d.elem_off + i, eb);
                std::memcpy(buf.data() + static_cast<size_t>(i) * eb, &v, eb);
            }
            mem.write(d.ext, static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            break;
        }
    }
}

void execute_block(const Block& b, Precision prec, const HwConfig& hw, Vrf& vrf,
                   std::vector<MptuArray>& pes) {
    const int L = vrf.lanes();
    if (static_cast<int>(pes.size()) < L)
        throw ExecutionError("tensor unit state not initialized for all lanes");

    if (b.kind == BlockKind::Dense) {
        std::vector<uint64_t> rows(hw.tile_r), cols(hw.tile_c);
        for (const Stage& st : b.stages) {
            for (int l = 0; l < L; ++l) {
                MptuArray& pe = pes[l];
                pe.set_precision(prec);
                if (st.pe_clear) pe.clear();
                for (int j = 0; j < st.steps; ++j) {
                    const uint32_t ro = b.row_off[st.step0 + j];
                    const uint32_t co = b.col_off[st.step0 + j];
                    for (int r = 0; r < st.r_cnt; ++r)
                        vrf.read_lane(l, &rows[r],
                                      st.row_base + r * st.row_rstride + ro, 8);
                    for (int c = 0; c < st.c_cnt; ++c)
                        vrf.read_lane(l, &cols[c],
                                      st.col_base + c * st.col_cstride + co, 8);
                    pe.core_cycle(rows.data(), st.r_cnt, cols.data(), st.c_cnt);
                }
                if (st.write) {
                    for (int r = 0; r < st.r_cnt; ++r)
                        for (int c = 0; c < st.c_cnt; ++c) {
                            uint32_t v = pe.acc(r, c);
                            const uint32_t cell =
                                st.io_base + r * st.io_rstride + 4u * c;
                            if (st.acc_read)
                                v += static_cast<uint32_t>(vrf_i32(vrf, l, cell));
                            put_i32(vrf, l, cell, static_cast<int32_t>(v));
                        }
                    pe.clear();
                }
            }
        }
        return;
    }

    // Depth-wise: stream the plane, accumulate diagonally into the VRF.
    for (const DwStage& st : b.dw) {
        for (int li = 0; li < st.active_lanes; ++li) {
            if (st.init)
                zero_span(vrf, li, st.out_base,
                          4u * (st.oy1 - st.oy0) * b.out_w);
            for (int iy = st.y0; iy < st.y1; ++iy) {
                const uint32_t xrow = st.x_base + (iy - st.y0) * b.x_pitch;
                for (int ix = 0; ix < b.in_w; ++ix) {
                    const int32_t xv = get_sub(vrf, li, xrow, ix, prec);
                    for (int ty = 0; ty < b.kernel_h; ++ty) {
                        const int py = iy + b.pad - (b.ky0 + ty);
                        if (py % b.stride) continue;
                        const int oy = py / b.stride;
                        if (oy < st.oy0 || oy >= st.oy1) continue;
                        for (int tx = 0; tx < b.kernel_w; ++tx) {
                            const int px = ix + b.pad - (b.kx0 + tx);
                            if (px % b.stride) continue;
                            const int ox = px / b.stride;
                            if (ox < 0 || ox >= b.out_w) continue;
                            const int32_t wv = get_sub(
                                vrf, li, st.w_base + (b.ky0 + ty) * b.w_pitch,
                                b.kx0 + tx, prec);
                            const uint32_t cell =
                                st.out_base +
                                4u * ((oy - st.oy0) * b.out_w + ox);
                            const uint32_t acc =
                                static_cast<uint32_t>(vrf_i32(vrf, li, cell)) +
                                static_cast<uint32_t>(xv) * static_cast<uint32_t>(wv);
                            put_i32(vrf, li, cell, static_cast<int32_t>(acc));
                        }
                    }
                }
            }
        }
    }
}

}  // namespace speedsim

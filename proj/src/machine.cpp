#include "speedsim/machine.hpp"

#include <algorithm>
#include <fstream>
#include <tuple>

#include "speedsim/errors.hpp"

namespace speedsim {

namespace {

constexpr uint64_t kVlenBits = 8ull * Vrf::kRegBytes;  // 4096

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

int32_t sign_extend(uint32_t v, int bits) {
    const uint32_t m = 1u << (bits - 1);
    return static_cast<int32_t>(((v & ((1ull << bits) - 1)) ^ m) - m);
}

}  // namespace

const char* to_string(FuKind f) {
    switch (f) {
        case FuKind::None: return "-";
        case FuKind::Alu: return "alu";
        case FuKind::Vldu: return "vldu";
        case FuKind::Vsu: return "vsu";
        case FuKind::Mptu: return "mptu";
    }
    return "?";
}

Machine::Machine(const HwConfig& hw) : hw_(hw), vrf_(hw.lanes) {
    hw_.validate();
    pes_.reserve(hw_.lanes);
    for (int l = 0; l < hw_.lanes; ++l) pes_.emplace_back(hw_.tile_r, hw_.tile_c);
}

void Machine::reset() {
    vrf_.clear();
    for (auto& pe : pes_) pe.clear();
    xregs_.fill(0);
    csr_ = VsaCsr{};
    vl_ = 0;
    sew_ = 16;
}

RunResult Machine::run(const Plan& plan, ExternalMemory& mem) {
    if (plan.program.size() != plan.side.size())
        throw StateError("plan side info does not cover the program");
    return execute(plan.program, &plan, mem);
}

RunResult Machine::run(const std::vector<Instruction>& prog, ExternalMemory& mem) {
    return execute(prog, nullptr, mem);
}

// Decodes one instruction's unit, duration, and register masks, advancing the
// program-order configuration state (csr / vl / sew) exactly as the ID stage
// would.
Machine::Work Machine::classify(const Instruction& inst, const Plan* plan,
                                size_t idx, bool& mptu_seen) {
    Work w{};
    const uint64_t bus = hw_.bus_bytes;
    switch (inst.mnemonic) {
        case Mnemonic::VSACFG:
            csr_ = decode_csr(inst.zimm, inst.uimm);
            return w;  // ID -> CO only
        case Mnemonic::VSETVLI: {
            sew_ = 8 << ((inst.zimm >> 3) & 0x7);
            const uint64_t vlmax = hw_.lanes * kVlenBits / sew_;
            uint64_t avl = vlmax;
            if (plan) {
                if (plan->side[idx].avl) avl = plan->side[idx].avl;
            } else if (inst.rs1 != 0) {
                avl = xregs_[inst.rs1];
            }
            vl_ = std::min(avl, vlmax);
            w.fu = FuKind::Alu;
            w.dur = 1;
            return w;
        }
        case Mnemonic::VSALD: {
            w.fu = FuKind::Vldu;
            if (plan) {
                const SideInfo& s = plan->side[idx];
                w.dur = std::max<uint64_t>(1, ceil_div(s.load->bytes, bus));
                w.reads = s.reads_mask;
                w.writes = s.writes_mask;
            } else {
                const uint64_t bytes = ceil_div(vl_ * inst.ew, 8);
                w.dur = std::max<uint64_t>(1, ceil_div(bytes, bus));
                w.writes = 1u << inst.vd;
            }
            return w;
        }
        case Mnemonic::VLE: {
            w.fu = FuKind::Vldu;
            const uint64_t bytes = vl_ * inst.ew / 8;
            w.dur = std::max<uint64_t>(1, ceil_div(bytes, bus));
            w.writes = 1u << inst.vd;
            return w;
        }
        case Mnemonic::VSE: {
            w.fu = FuKind::Vsu;
            if (plan) {
                const SideInfo& s = plan->side[idx];
                w.dur = std::max<uint64_t>(1, ceil_div(s.store->bytes, bus));
                w.reads = s.reads_mask;
                w.writes = s.writes_mask;
            } else {
                const uint64_t bytes = vl_ * inst.ew / 8;
                w.dur = std::max<uint64_t>(1, ceil_div(bytes, bus));
                w.reads = 1u << inst.vd;
            }
            return w;
        }
        case Mnemonic::VMACC: {
            w.fu = FuKind::Alu;
            const uint64_t per_cycle =
                static_cast<uint64_t>(hw_.lanes) * (64 / sew_);
            w.dur = std::max<uint64_t>(1, ceil_div(vl_, per_cycle));
            w.reads = (1u << inst.vs1) | (1u << inst.vs2) | (1u << inst.vd);
            w.writes = 1u << inst.vd;
            return w;
        }
        case Mnemonic::VSAM:
        case Mnemonic::VSAC: {
            w.fu = FuKind::Mptu;
            if (plan) {
                const SideInfo& s = plan->side[idx];
                w.dur = block_cycles(plan->blocks[s.block], hw_, !mptu_seen);
                w.reads = s.reads_mask;
                w.writes = s.writes_mask;
            } else {
                Stage st{};
                st.steps = csr_.kernel_size * csr_.kernel_size;
                st.r_cnt = hw_.tile_r;
                st.c_cnt = inst.mnemonic == Mnemonic::VSAC ? 1 : hw_.tile_c;
                st.write = true;
                w.dur = stage_cycles(st, csr_.precision, hw_);
                if (!mptu_seen) w.dur += hw_.tile_r + hw_.tile_c - 2;
                w.reads = (1u << inst.vs1) | (1u << inst.vs2);
                w.writes = 1u << inst.vd;
            }
            mptu_seen = true;
            return w;
        }
    }
    throw IllegalInstruction("unhandled mnemonic in the pipeline model");
}

// Register-level semantics for raw (assembled) programs; planned programs use
// their operand descriptors instead.
void Machine::exec_raw(const Instruction& inst, ExternalMemory& mem,
                       uint64_t cycle) {
    switch (inst.mnemonic) {
        case Mnemonic::VSACFG:
        case Mnemonic::VSETVLI:
            if (inst.mnemonic == Mnemonic::VSETVLI) xregs_[inst.rd] = vl_;
            return;
        case Mnemonic::VLE: {
            const int eb = inst.ew / 8;
            std::vector<uint8_t> buf(vl_ * eb);
            if (!buf.empty())
                mem.read(static_cast<uint32_t>(xregs_[inst.rs1]),
                         static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            for (uint64_t i = 0; i < vl_; ++i) {
                uint32_t v = 0;
                for (int b = 0; b < eb; ++b)
                    v |= static_cast<uint32_t>(buf[i * eb + b]) << (8 * b);
                vrf_.store_elem(inst.vd, static_cast<uint32_t>(i), eb, v);
            }
            return;
        }
        case Mnemonic::VSE: {
            const int eb = inst.ew / 8;
            std::vector<uint8_t> buf(vl_ * eb);
            for (uint64_t i = 0; i < vl_; ++i) {
                const uint32_t v =
                    vrf_.load_elem(inst.vd, static_cast<uint32_t>(i), eb);
                for (int b = 0; b < eb; ++b)
                    buf[i * eb + b] = static_cast<uint8_t>(v >> (8 * b));
            }
            if (!buf.empty())
                mem.write(static_cast<uint32_t>(xregs_[inst.rs1]),
                          static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            return;
        }
        case Mnemonic::VMACC: {
            const int eb = sew_ / 8;
            for (uint64_t i = 0; i < vl_; ++i) {
                const uint32_t idx = static_cast<uint32_t>(i);
                const int64_t a = sign_extend(vrf_.load_elem(inst.vs1, idx, eb), sew_);
                const int64_t b = sign_extend(vrf_.load_elem(inst.vs2, idx, eb), sew_);
                const int64_t d = sign_extend(vrf_.load_elem(inst.vd, idx, eb), sew_);
                vrf_.store_elem(inst.vd, idx, eb,
                                static_cast<uint32_t>(d + a * b));
            }
            return;
        }
        case Mnemonic::VSALD: {
            // Broadcast: every lane's vd receives the same external bytes.
            const uint64_t bytes = ceil_div(vl_ * inst.ew, 8);
            if (bytes > Vrf::kRegBytes)
                throw VrfFault("broadcast load longer than a register");
            std::vector<uint8_t> buf(bytes);
            if (!buf.empty())
                mem.read(static_cast<uint32_t>(xregs_[inst.rs1]),
                         static_cast<uint32_t>(buf.size()), buf.data(), cycle);
            for (int l = 0; l < hw_.lanes; ++l)
                vrf_.write_lane(l, Vrf::addr_of(inst.vd, 0), buf.data(),
                                static_cast<uint32_t>(buf.size()));
            return;
        }
        case Mnemonic::VSAM:
        case Mnemonic::VSAC: {
            // One tile sweep of kernel_size^2 packed words taken round-robin
            // from vs1 (rows) and vs2 (columns); 32-bit results land in vd.
            const int R = hw_.tile_r;
            const int C = inst.mnemonic == Mnemonic::VSAC ? 1 : hw_.tile_c;
            const int steps = csr_.kernel_size * csr_.kernel_size;
            std::vector<uint64_t> rows(R), cols(C);
            for (int l = 0; l < hw_.lanes; ++l) {
                MptuArray& pe = pes_[l];
                pe.set_precision(csr_.precision);
                pe.clear();
                for (int t = 0; t < steps; ++t) {
                    for (int r = 0; r < R; ++r)
                        vrf_.read_lane(l, &rows[r],
                                       Vrf::addr_of(inst.vs1,
                                                    8 * (t * R + r) % Vrf::kRegBytes),
                                       8);
                    for (int c = 0; c < C; ++c)
                        vrf_.read_lane(l, &cols[c],
                                       Vrf::addr_of(inst.vs2,
                                                    8 * (t * C + c) % Vrf::kRegBytes),
                                       8);
                    pe.core_cycle(rows.data(), R, cols.data(), C);
                }
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < C; ++c) {
                        const uint32_t v = pe.acc(r, c);
                        vrf_.write_lane(l, Vrf::addr_of(inst.vd, 4 * (r * C + c)),
                                        &v, 4);
                    }
                pe.clear();
            }
            return;
        }
    }
}

RunResult Machine::execute(const std::vector<Instruction>& prog,
                           const Plan* plan, ExternalMemory& mem) {
    const size_t n = prog.size();
    RunResult res;
    res.instructions = n;
    res.timing.resize(n);

    // Pass 1 (program order): decode work and snapshot the configuration
    // state each instruction executes under.
    std::vector<Work> work(n);
    std::vector<VsaCsr> csr_at(n);
    std::vector<uint64_t> vl_at(n);
    std::vector<int> sew_at(n);
    bool mptu_seen = false;
    for (size_t i = 0; i < n; ++i) {
        work[i] = classify(prog[i], plan, i, mptu_seen);
        csr_at[i] = csr_;
        vl_at[i] = vl_;
        sew_at[i] = sew_;
    }

    // Pass 2: scoreboard algebra. ID is one per cycle; IS dispatches
    // oldest-first once the unit's EX is clear (entry at is+1) and every
    // conflicting in-flight instruction has committed; CO is one per cycle in
    // program order.
    uint64_t id_prev = 0, is_prev = 0, co_prev = 0;
    std::array<uint64_t, 5> fu_free{};
    std::array<uint64_t, 32> write_co{}, read_co{};
    for (size_t i = 0; i < n; ++i) {
        InstrTiming& t = res.timing[i];
        t.mnemonic = prog[i].mnemonic;
        t.fu = work[i].fu;
        t.dur = work[i].dur;
        t.id = ++id_prev;
        if (work[i].fu == FuKind::None) {
            t.co = std::max(t.id + 1, co_prev + 1);
        } else {
            uint64_t is = std::max(is_prev + 1, t.id + 1);
            is = std::max(is, fu_free[static_cast<int>(work[i].fu)]);
            const uint32_t touch = work[i].reads | work[i].writes;
            for (int r = 0; r < 32; ++r) {
                const uint32_t bit = 1u << r;
                if (touch & bit) is = std::max(is, write_co[r] + 1);
                if (work[i].writes & bit) is = std::max(is, read_co[r] + 1);
            }
            t.is = is;
            t.ex_start = is + 1;
            t.ex_end = is + work[i].dur;
            t.co = std::max(t.ex_end + 1, co_prev + 1);
            is_prev = is;
            fu_free[static_cast<int>(work[i].fu)] = t.ex_end;
            for (int r = 0; r < 32; ++r) {
                const uint32_t bit = 1u << r;
                if (work[i].writes & bit) write_co[r] = std::max(write_co[r], t.co);
                if (work[i].reads & bit) read_co[r] = std::max(read_co[r], t.co);
            }
        }
        co_prev = t.co;
    }
    res.cycles = co_prev;

    // Pass 3 (program order): functional execution. Hazard stalls make any
    // legal overlap equivalent to this order.
    const uint64_t r0 = mem.bytes_read(), w0 = mem.bytes_written();
    for (size_t i = 0; i < n; ++i) {
        const Instruction& inst = prog[i];
        const uint64_t cyc = res.timing[i].ex_start;
        if (plan) {
            const SideInfo& s = plan->side[i];
            switch (inst.mnemonic) {
                case Mnemonic::VSALD:
                    execute_load(*s.load, *plan, mem, vrf_, cyc);
                    break;
                case Mnemonic::VSE:
                    execute_store(*s.store, *plan, mem, vrf_, cyc);
                    break;
                case Mnemonic::VSAM:
                case Mnemonic::VSAC:
                    execute_block(plan->blocks[s.block], csr_at[i].precision,
                                  hw_, vrf_, pes_);
                    break;
                default:
                    break;
            }
        } else {
            csr_ = csr_at[i];
            vl_ = vl_at[i];
            sew_ = sew_at[i];
            exec_raw(inst, mem, cyc);
            if (inst.mnemonic == Mnemonic::VMACC) res.valid_macs += vl_;
        }
    }
    res.ext_bytes_read = mem.bytes_read() - r0;
    res.ext_bytes_written = mem.bytes_written() - w0;
    if (plan) res.valid_macs = plan->valid_macs;
    if (res.cycles)
        res.ops_per_cycle = 2.0 * res.valid_macs / res.cycles;

    if (!trace_path_.empty()) write_trace(res.timing);
    return res;
}

void Machine::write_trace(const std::vector<InstrTiming>& timing) const {
    std::ofstream out(trace_path_);
    if (!out) throw StateError("cannot open trace file: " + trace_path_);
    out << "cycle,stage,instr,mnemonic,unit\n";
    // (cycle, stage order ID<IS<EX<CO, instr index)
    std::vector<std::tuple<uint64_t, int, size_t>> ev;
    for (size_t i = 0; i < timing.size(); ++i) {
        const InstrTiming& t = timing[i];
        ev.emplace_back(t.id, 0, i);
        if (t.is) ev.emplace_back(t.is, 1, i);
        for (uint64_t c = t.ex_start; c && c <= t.ex_end; ++c)
            ev.emplace_back(c, 2, i);
        ev.emplace_back(t.co, 3, i);
    }
    std::sort(ev.begin(), ev.end());
    static const char* kStage[] = {"ID", "IS", "EX", "CO"};
    for (const auto& [cyc, st, idx] : ev)
        out << cyc << ',' << kStage[st] << ',' << idx << ','
            << to_string(timing[idx].mnemonic) << ','
            << to_string(timing[idx].fu) << '\n';
}

}  // namespace speedsim

#include "speedsim/baseline.hpp"

#include <algorithm>

#include "speedsim/errors.hpp"

namespace speedsim {

namespace {

constexpr uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

// Accumulates the model of one  m x k x n  matrix product lowered the
// plain-vector way: for every output row, one splat load plus one
// multiply-accumulate per k, then a 32-bit store of the row. The n axis is
// chunked by the vector length; the k operand rows stay register-resident
// for instruction/register accounting, but every multiply-accumulate
// streams its row operand from external memory again (no reuse across
// instructions), and that stream is what the byte ledger charges.
struct MmModel {
    const BaselineParams& p;
    int sew;  // element bits, 8 or 16

    uint64_t elems_per_cycle() const {
        return uint64_t(p.lanes) * (uint64_t(p.datapath_bits_per_lane) / uint64_t(sew));
    }
    uint64_t elems32_per_cycle() const {
        return uint64_t(p.lanes) * (uint64_t(p.datapath_bits_per_lane) / 32);
    }
    uint64_t vlmax() const { return uint64_t(p.lanes) * 4096 / uint64_t(sew); }

    uint64_t cyc(uint64_t work, uint64_t per_cycle) const {
        return uint64_t(p.startup_cycles) + ceil_div(work, per_cycle);
    }

    void add(BaselineRun& r, uint64_t m, uint64_t k, uint64_t n) const {
        const uint64_t eb = uint64_t(sew) / 8;
        const uint64_t chunks = ceil_div(n, vlmax());
        for (uint64_t c = 0; c < chunks; ++c) {
            const uint64_t nc = std::min(vlmax(), n - c * vlmax());
            r.instructions += k + m * k + m;
            r.arith_instructions += m * k;
            r.load_instructions += k;
            r.store_instructions += m;
            r.cycles += (k + m * k) * cyc(nc, elems_per_cycle());
            r.cycles += m * cyc(nc, elems32_per_cycle());
        }
        // Scalar splat loads, one per (row, k) pair, independent of chunking.
        r.instructions += m * k;
        r.load_instructions += m * k;
        r.cycles += m * k * cyc(1, elems_per_cycle());

        r.ext_bytes_read += m * k * n * eb;  // streamed row operands
        r.ext_bytes_read += m * k * eb;      // splat scalars
        r.ext_bytes_written += m * n * 4;    // 32-bit results
    }
};

}  // namespace

BaselineRun baseline_run(const OperatorDesc& op, const BaselineParams& params) {
    op.validate();
    if (params.lanes < 1 || params.lanes > 64) {
        throw ConfigError("baseline lanes out of range");
    }
    if (params.datapath_bits_per_lane < 32 ||
        params.datapath_bits_per_lane % 32 != 0) {
        throw ConfigError("baseline datapath_bits_per_lane must be a multiple of 32");
    }
    if (params.startup_cycles < 0) {
        throw ConfigError("baseline startup_cycles must be >= 0");
    }
    if (op.precision == Precision::Int4) {
        throw UnsupportedPrecision(
            "baseline machine has no 4-bit datapath (Int8/Int16 only)");
    }

    const int sew = width_bits(op.precision);
    const uint64_t eb = uint64_t(sew) / 8;
    MmModel model{params, sew};

    BaselineRun r;
    r.instructions = 1;  // vsetvli
    r.cycles = uint64_t(params.startup_cycles) + 1;

    if (op.kind == OpKind::Mm) {
        model.add(r, op.mm.m, op.mm.k, op.mm.n);
        r.vregs_used = int(std::min<uint64_t>(31, op.mm.k + 2));
    } else if (op.conv.depthwise) {
        // Grouped: each channel is its own 1 x (kh*kw) x T product, with a
        // per-channel im2col patch matrix materialized first.
        const ConvShape& c = op.conv;
        const uint64_t kc = uint64_t(c.kh) * c.kw;
        const uint64_t t = uint64_t(c.oh()) * c.ow();
        for (int ch = 0; ch < c.ic; ++ch) model.add(r, 1, kc, t);
        r.ext_bytes_read += uint64_t(c.ic) * kc * t * eb;
        r.ext_bytes_written += uint64_t(c.ic) * kc * t * eb;
        r.vregs_used = int(std::min<uint64_t>(31, kc + 2));
    } else {
        // Dense/pointwise: weights (oc x K) times the materialized im2col
        // matrix (K x T). Both the source reads behind the materialization
        // and the written matrix carry the window-overlap duplication.
        const ConvShape& c = op.conv;
        const uint64_t kk = uint64_t(c.ic) * c.kh * c.kw;
        const uint64_t t = uint64_t(c.oh()) * c.ow();
        model.add(r, uint64_t(c.oc), kk, t);
        r.ext_bytes_read += kk * t * eb;
        r.ext_bytes_written += kk * t * eb;
        r.vregs_used = int(std::min<uint64_t>(31, kk + 2));
    }

    // Useful work only: the baseline multiplies materialized padding zeros,
    // which its cycle and byte ledgers charge, but those multiplies are not
    // valid output work and do not inflate its throughput.
    r.valid_macs = op.macs();
    r.ops_per_cycle = r.cycles ? 2.0 * double(r.valid_macs) / double(r.cycles) : 0.0;
    return r;
}

}  // namespace speedsim

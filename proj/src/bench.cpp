#include "speedsim/bench.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "speedsim/errors.hpp"
#include "speedsim/oracle.hpp"

namespace speedsim {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

Metrics metrics_of(const Plan& plan, const RunResult& run) {
    Metrics m;
    m.cycles = run.cycles;
    m.instructions_total = plan.program.size();
    for (const Instruction& inst : plan.program) {
        if (inst.mnemonic == Mnemonic::VSAM || inst.mnemonic == Mnemonic::VSAC) {
            ++m.arithmetic_instructions;
        }
    }
    m.distinct_vector_registers = plan.vregs_used;
    m.ext_bytes_read = run.ext_bytes_read;
    m.ext_bytes_written = run.ext_bytes_written;
    m.valid_ops = 2 * run.valid_macs;
    m.ops_per_cycle = run.ops_per_cycle;
    return m;
}

Metrics metrics_of(const BaselineRun& run) {
    Metrics m;
    m.cycles = run.cycles;
    m.instructions_total = run.instructions;
    m.arithmetic_instructions = run.arith_instructions;
    m.distinct_vector_registers = run.vregs_used;
    m.ext_bytes_read = run.ext_bytes_read;
    m.ext_bytes_written = run.ext_bytes_written;
    m.valid_ops = 2 * run.valid_macs;
    m.ops_per_cycle = run.ops_per_cycle;
    return m;
}

// ---------------------------------------------------------------------------
// Operands and oracle
// ---------------------------------------------------------------------------

Operands draw_operands(const OperatorDesc& op, std::mt19937& rng) {
    int lo = 0, hi = 0;
    switch (op.precision) {
        case Precision::Int4: lo = -8; hi = 7; break;
        case Precision::Int8: lo = -128; hi = 127; break;
        case Precision::Int16: lo = -32768; hi = 32767; break;
    }
    std::uniform_int_distribution<int32_t> d(lo, hi);
    Operands v;
    if (op.kind == OpKind::Conv) {
        v.x.resize(op.conv.input_elems());
        v.w.resize(op.conv.weight_elems());
    } else {
        v.x.resize(op.mm.a_elems());
        v.w.resize(op.mm.b_elems());
    }
    for (auto& e : v.x) e = d(rng);
    for (auto& e : v.w) e = d(rng);
    return v;
}

void poke_operands(const OperatorDesc& op, const ExtLayout& lay,
                   const Operands& vals, ExternalMemory& mem) {
    const Precision p = op.precision;
    if (op.kind == OpKind::Conv) {
        const ConvShape& cs = op.conv;
        const uint32_t rb_x = row_bytes(cs.iw, p);
        for (int ic = 0; ic < cs.ic; ++ic) {
            for (int iy = 0; iy < cs.ih; ++iy) {
                poke_elems(mem,
                           lay.x_base + (uint32_t(ic) * cs.ih + iy) * rb_x,
                           &vals.x[(size_t(ic) * cs.ih + iy) * cs.iw], cs.iw, p);
            }
        }
        const int wrow = cs.kw * (cs.depthwise ? 1 : cs.oc);
        const uint32_t rb_w = row_bytes(wrow, p);
        for (int ic = 0; ic < cs.ic; ++ic) {
            for (int ky = 0; ky < cs.kh; ++ky) {
                poke_elems(mem,
                           lay.w_base + (uint32_t(ic) * cs.kh + ky) * rb_w,
                           &vals.w[(size_t(ic) * cs.kh + ky) * wrow], wrow, p);
            }
        }
    } else {
        const MmShape& mm = op.mm;
        const uint32_t rb_a = row_bytes(mm.k, p);
        for (int m = 0; m < mm.m; ++m) {
            poke_elems(mem, lay.w_base + uint32_t(m) * rb_a,
                       &vals.x[size_t(m) * mm.k], mm.k, p);
        }
        const uint32_t rb_b = row_bytes(mm.n, p);
        for (int k = 0; k < mm.k; ++k) {
            poke_elems(mem, lay.x_base + uint32_t(k) * rb_b,
                       &vals.w[size_t(k) * mm.n], mm.n, p);
        }
    }
}

std::vector<int32_t> oracle_eval(const OperatorDesc& op, const Operands& vals) {
    std::vector<int32_t> y;
    if (op.kind == OpKind::Conv) {
        y.resize(op.conv.output_elems());
        conv2d_ref(op.conv, vals.x.data(), vals.w.data(), y.data());
    } else {
        y.resize(op.mm.y_elems());
        matmul_ref(op.mm, vals.x.data(), vals.w.data(), y.data());
    }
    return y;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

std::mt19937 operand_rng(const OperatorDesc& op, Precision p, uint64_t seed) {
    // Operands depend only on (op shape, precision, seed), never on the
    // strategy, so every strategy solves the identical problem instance.
    uint64_t h = seed * 0x9E3779B97F4A7C15ull;
    h ^= std::hash<std::string>{}(op.label()) + (uint64_t(p) << 32);
    return std::mt19937(uint32_t(h ^ (h >> 32)));
}

ComparisonReport compare(const OperatorDesc& op,
                         const std::vector<Precision>& precisions,
                         const std::vector<Strategy>& strategies,
                         const HwConfig& hw, const BaselineParams& bp,
                         uint64_t seed, int stage_n) {
    op.validate();
    hw.validate();

    std::vector<Strategy> strats = strategies;
    if (strats.empty()) strats.push_back(select_strategy(op));
    for (Strategy s : strats) check_strategy(op, s);

    ComparisonReport rep;
    rep.op = op;

    for (Precision p : precisions) {
        OperatorDesc run_op = op;
        run_op.precision = p;

        // Matched baseline: same precision when the baseline supports it;
        // Int4 runs fall back to the Int16 baseline, the precision the
        // original machine actually offers for those workloads.
        OperatorDesc base_op = run_op;
        if (p == Precision::Int4) base_op.precision = Precision::Int16;
        const BaselineRun base = baseline_run(base_op, bp);

        if (base_op.precision == p) {
            RunRecord rr;
            rr.strategy = "baseline";
            rr.precision = p;
            rr.metrics = metrics_of(base);
            rr.speedup = 1.0;
            rr.baseline_precision = p;
            rep.runs.push_back(rr);
        }

        std::mt19937 rng = operand_rng(run_op, p, seed);
        const Operands vals = draw_operands(run_op, rng);
        const std::vector<int32_t> y_ref = oracle_eval(run_op, vals);

        for (Strategy s : strats) {
            const Plan plan = plan_operator(run_op, hw, s, stage_n);
            ExternalMemory mem;
            poke_operands(run_op, plan.layout, vals, mem);
            Machine machine(hw);
            const RunResult run = machine.run(plan, mem);
            const std::vector<int32_t> y =
                peek_i32(mem, plan.layout.y_base, y_ref.size());
            if (y != y_ref) {
                throw ExecutionError("output mismatch vs reference: " +
                                     run_op.label() + " strategy " +
                                     to_string(s));
            }
            RunRecord rr;
            rr.strategy = to_string(s);
            rr.precision = p;
            rr.metrics = metrics_of(plan, run);
            rr.speedup = double(base.cycles) / double(run.cycles);
            rr.baseline_precision = base_op.precision;
            rep.runs.push_back(rr);
        }
    }

    // External-access ordering check per precision, when all three conv
    // strategies and a matched baseline are present.
    if (op.kind == OpKind::Conv && !op.conv.depthwise) {
        for (Precision p : precisions) {
            const Metrics* ff = nullptr;
            const Metrics* ffcs = nullptr;
            const Metrics* cf = nullptr;
            const Metrics* base = nullptr;
            for (const RunRecord& rr : rep.runs) {
                if (rr.precision != p) continue;
                if (rr.strategy == "FF") ff = &rr.metrics;
                if (rr.strategy == "FFCS") ffcs = &rr.metrics;
                if (rr.strategy == "CF") cf = &rr.metrics;
                if (rr.strategy == "baseline") base = &rr.metrics;
            }
            if (ff && ffcs && cf && base) {
                OrderingCheck c;
                c.description = std::string("ext_bytes FF < FFCS < CF < baseline @") +
                                to_string(p);
                c.pass = ff->ext_bytes() < ffcs->ext_bytes() &&
                         ffcs->ext_bytes() < cf->ext_bytes() &&
                         cf->ext_bytes() < base->ext_bytes();
                rep.checks.push_back(c);
            }
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

const char* default_suite_dir() { return SPEEDSIM_SUITE_DIR; }

Precision parse_precision(const std::string& s) {
    if (s == "int4") return Precision::Int4;
    if (s == "int8") return Precision::Int8;
    if (s == "int16") return Precision::Int16;
    throw ConfigError("unknown precision '" + s + "' (int4/int8/int16)");
}

Strategy parse_strategy(const std::string& s) {
    if (s == "MM" || s == "mm") return Strategy::MM;
    if (s == "FFCS" || s == "ffcs") return Strategy::FFCS;
    if (s == "CF" || s == "cf") return Strategy::CF;
    if (s == "FF" || s == "ff") return Strategy::FF;
    throw ConfigError("unknown strategy '" + s + "' (MM/FFCS/CF/FF)");
}

namespace {

void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

OperatorDesc parse_layer_op(const json& j, const std::string& where) {
    OperatorDesc op;
    if (j.contains("conv") == j.contains("mm")) {
        throw ConfigError(where + ": layer needs exactly one of conv/mm");
    }
    if (j.contains("conv")) {
        const json& c = j.at("conv");
        reject_unknown_keys(
            c, {"ic", "ih", "iw", "oc", "kh", "kw", "stride", "pad", "depthwise"},
            where + "/conv");
        op.kind = OpKind::Conv;
        op.conv.ic = c.at("ic").get<int>();
        op.conv.ih = c.at("ih").get<int>();
        op.conv.iw = c.at("iw").get<int>();
        op.conv.oc = c.at("oc").get<int>();
        op.conv.kh = c.at("kh").get<int>();
        op.conv.kw = c.at("kw").get<int>();
        op.conv.stride = c.value("stride", 1);
        op.conv.pad = c.value("pad", 0);
        op.conv.depthwise = c.value("depthwise", false);
    } else {
        const json& m = j.at("mm");
        reject_unknown_keys(m, {"m", "k", "n"}, where + "/mm");
        op.kind = OpKind::Mm;
        op.mm.m = m.at("m").get<int>();
        op.mm.k = m.at("k").get<int>();
        op.mm.n = m.at("n").get<int>();
    }
    return op;
}

SuiteEntry parse_layer(const json& lj, const std::string& where) {
    reject_unknown_keys(
        lj, {"name", "repeat", "conv", "mm", "strategy", "precisions"}, where);
    SuiteEntry e;
    e.repeat = lj.value("repeat", 1);
    e.op = parse_layer_op(lj, where);
    if (lj.contains("name")) {
        e.name = lj.at("name").get<std::string>();
    } else {
        // Shape-only default: the label's precision suffix would be stale once
        // the entry runs at other precisions.
        e.name = e.op.label();
        const std::string suffix = std::string("-") + to_string(e.op.precision);
        e.name.erase(e.name.size() - suffix.size());
    }
    if (e.repeat < 1) throw ConfigError(e.name + ": repeat must be >= 1");
    if (lj.contains("strategy")) {
        const std::string s = lj.at("strategy").get<std::string>();
        if (s != "auto") e.forced = parse_strategy(s);
    }
    for (const auto& ps : lj.value("precisions", json::array())) {
        e.precisions.push_back(parse_precision(ps.get<std::string>()));
    }
    e.op.validate();
    if (e.forced) check_strategy(e.op, *e.forced);
    return e;
}

}  // namespace

SuiteEntry parse_suite_layer(const std::string& json_text, const std::string& where) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
    try {
        return parse_layer(j, where);
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

Suite model_suite(const std::string& name, const std::string& dir) {
    if (name.empty() || name.find('/') != std::string::npos ||
        name.find('\\') != std::string::npos) {
        throw SuiteNotFound("bad suite name '" + name + "'");
    }
    const std::string base = dir.empty() ? default_suite_dir() : dir;
    const std::string path = base + "/" + name + ".json";
    std::ifstream in(path);
    if (!in) {
        throw SuiteNotFound("no suite '" + name + "' (" + path + ")");
    }

    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("suite " + path + ": " + e.what());
    }

    Suite suite;
    try {
        reject_unknown_keys(
            j, {"model", "note", "nonlinear_skipped", "default_precisions", "layers"},
            name);
        suite.model = j.at("model").get<std::string>();
        suite.note = j.value("note", "");
        suite.nonlinear_skipped = j.value("nonlinear_skipped", 0);
        for (const auto& ps : j.value("default_precisions", json::array())) {
            suite.default_precisions.push_back(
                parse_precision(ps.get<std::string>()));
        }
        if (suite.default_precisions.empty()) {
            suite.default_precisions = {Precision::Int16, Precision::Int8};
        }
        for (const json& lj : j.at("layers")) {
            if (!lj.contains("name"))
                throw ConfigError(suite.model + ": every suite layer needs a name");
            suite.entries.push_back(
                parse_layer(lj, suite.model + "/" + lj.at("name").get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw ConfigError("suite " + path + ": " + e.what());
    }
    return suite;
}

}  // namespace speedsim

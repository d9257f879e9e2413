// speedsim - command-line front end.
//
//   asm     assemble vector programs to 32-bit little-endian words
//   run     execute an assembled program on the simulated machine
//   bench   run operator / suite benchmarks against the plain-vector baseline
//   sweep   Cartesian design-space sweep over lanes and tile dimensions
//   report  re-render a JSON report as CSV / markdown
//
// Exit codes: 0 ok, 2 assembly error, 3 correctness failure, 4 config error.
// All file formats are documented in docs/formats.md and are byte-stable for
// a fixed config + seed.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "speedsim/bench.hpp"
#include "speedsim/errors.hpp"
#include "speedsim/machine.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace speedsim;

namespace {

// ---------------------------------------------------------------------------
// Formatting (fixed-width so report files are byte-stable)
// ---------------------------------------------------------------------------

std::string fmt4(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.4f", v);
    return b;
}

std::string fmt6(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6f", v);
    return b;
}

std::string sanitize(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
            c = '_';
    return out;
}

// ---------------------------------------------------------------------------
// Report rows
// ---------------------------------------------------------------------------

struct ReportRow {
    int lanes = 0, tile_r = 0, tile_c = 0;  // machine point (sweep columns)
    std::string op_name;
    std::string strategy;
    std::string precision;
    uint64_t cycles = 0;
    uint64_t valid_ops = 0;
    double ops_per_cycle = 0.0;
    uint64_t ext_bytes = 0;
    uint64_t ext_read = 0;
    uint64_t ext_written = 0;
    uint64_t instructions = 0;
    uint64_t arithmetic = 0;
    int regs = 0;
    double speedup = 1.0;
    std::string baseline_precision;
};

ReportRow make_row(const std::string& name, const HwConfig& hw, const RunRecord& rr) {
    ReportRow r;
    r.lanes = hw.lanes;
    r.tile_r = hw.tile_r;
    r.tile_c = hw.tile_c;
    r.op_name = name;
    r.strategy = rr.strategy;
    r.precision = to_string(rr.precision);
    r.cycles = rr.metrics.cycles;
    r.valid_ops = rr.metrics.valid_ops;
    r.ops_per_cycle = rr.metrics.ops_per_cycle;
    r.ext_bytes = rr.metrics.ext_bytes();
    r.ext_read = rr.metrics.ext_bytes_read;
    r.ext_written = rr.metrics.ext_bytes_written;
    r.instructions = rr.metrics.instructions_total;
    r.arithmetic = rr.metrics.arithmetic_instructions;
    r.regs = rr.metrics.distinct_vector_registers;
    r.speedup = rr.speedup;
    r.baseline_precision = to_string(rr.baseline_precision);
    return r;
}

json row_to_json(const ReportRow& r, bool sweep) {
    json j{{"operator", r.op_name},
           {"strategy", r.strategy},
           {"precision", r.precision},
           {"cycles", r.cycles},
           {"valid_ops", r.valid_ops},
           {"ops_per_cycle", r.ops_per_cycle},
           {"ext_bytes", r.ext_bytes},
           {"ext_bytes_read", r.ext_read},
           {"ext_bytes_written", r.ext_written},
           {"instructions", r.instructions},
           {"arithmetic_instructions", r.arithmetic},
           {"vector_registers", r.regs},
           {"speedup", r.speedup},
           {"baseline_precision", r.baseline_precision}};
    if (sweep) {
        j["lanes"] = r.lanes;
        j["tile_r"] = r.tile_r;
        j["tile_c"] = r.tile_c;
    }
    return j;
}

ReportRow row_from_json(const json& j, bool sweep) {
    ReportRow r;
    r.op_name = j.at("operator").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.precision = j.at("precision").get<std::string>();
    r.cycles = j.at("cycles").get<uint64_t>();
    r.valid_ops = j.at("valid_ops").get<uint64_t>();
    r.ops_per_cycle = j.at("ops_per_cycle").get<double>();
    r.ext_bytes = j.at("ext_bytes").get<uint64_t>();
    r.ext_read = j.at("ext_bytes_read").get<uint64_t>();
    r.ext_written = j.at("ext_bytes_written").get<uint64_t>();
    r.instructions = j.at("instructions").get<uint64_t>();
    r.arithmetic = j.at("arithmetic_instructions").get<uint64_t>();
    r.regs = j.at("vector_registers").get<int>();
    r.speedup = j.at("speedup").get<double>();
    r.baseline_precision = j.at("baseline_precision").get<std::string>();
    if (sweep) {
        r.lanes = j.at("lanes").get<int>();
        r.tile_r = j.at("tile_r").get<int>();
        r.tile_c = j.at("tile_c").get<int>();
    }
    return r;
}

void write_csv(std::ostream& os, const std::vector<ReportRow>& rows, bool sweep) {
    if (sweep)
        os << "lanes,tile_r,tile_c,";
    os << "operator,strategy,precision,cycles,valid_ops,ops_per_cycle,"
          "ext_bytes,instr,regs";
    if (sweep)
        os << ",area_eff_proxy";
    os << '\n';
    for (const ReportRow& r : rows) {
        if (sweep)
            os << r.lanes << ',' << r.tile_r << ',' << r.tile_c << ',';
        os << r.op_name << ',' << r.strategy << ',' << r.precision << ','
           << r.cycles << ',' << r.valid_ops << ',' << fmt4(r.ops_per_cycle)
           << ',' << r.ext_bytes << ',' << r.instructions << ',' << r.regs;
        if (sweep)
            os << ','
               << fmt6(r.ops_per_cycle /
                       (double(r.lanes) * r.tile_r * r.tile_c));
        os << '\n';
    }
}

struct Claim {
    std::string description;
    bool pass = false;
};

json report_json(const std::string& kind, const json& config,
                 const std::vector<ReportRow>& rows,
                 const std::vector<Claim>& claims) {
    json rows_j = json::array();
    for (const ReportRow& r : rows) rows_j.push_back(row_to_json(r, kind == "sweep"));
    json checks_j = json::array();
    for (const Claim& c : claims)
        checks_j.push_back(json{{"description", c.description}, {"pass", c.pass}});
    return json{{"kind", kind}, {"config", config}, {"rows", rows_j},
                {"checks", checks_j}};
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Config plumbing
// ---------------------------------------------------------------------------

json load_config(const std::string& path, const std::vector<std::string>& sets) {
    json cfg;
    try {
        cfg = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    if (!cfg.is_object()) throw ConfigError(path + ": config must be a JSON object");
    for (const std::string& kv : sets) {
        const size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set needs key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        const std::string raw = kv.substr(eq + 1);
        json value;
        try {
            value = json::parse(raw);
        } catch (const json::exception&) {
            value = raw;  // unparseable scalar -> plain string
        }
        json* node = &cfg;
        size_t pos = 0;
        while (true) {
            const size_t dot = key.find('.', pos);
            const std::string part = key.substr(pos, dot - pos);
            if (part.empty()) throw ConfigError("--set: empty key segment in '" + key + "'");
            if (dot == std::string::npos) {
                (*node)[part] = value;
                break;
            }
            node = &(*node)[part];
            if (!node->is_object()) *node = json::object();
            pos = dot + 1;
        }
    }
    return cfg;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed,
                    const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

uint64_t resolve_seed(const json& cfg, std::optional<uint64_t> flag) {
    if (flag) return *flag;
    if (cfg.contains("seed")) return cfg.at("seed").get<uint64_t>();
    if (const char* env = std::getenv("SPEEDSIM_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError(std::string("SPEEDSIM_SEED is not a number: ") + env);
        }
    }
    return 1;
}

HwConfig parse_machine(const json& cfg) {
    HwConfig hw;
    if (cfg.contains("machine")) {
        const json& m = cfg.at("machine");
        reject_unknown(m, {"lanes", "tile_r", "tile_c", "bus_bytes"}, "machine");
        hw.lanes = m.value("lanes", hw.lanes);
        hw.tile_r = m.value("tile_r", hw.tile_r);
        hw.tile_c = m.value("tile_c", hw.tile_c);
        hw.bus_bytes = m.value("bus_bytes", hw.bus_bytes);
    }
    hw.validate();
    return hw;
}

BaselineParams parse_baseline(const json& cfg) {
    BaselineParams bp;
    if (cfg.contains("baseline")) {
        const json& b = cfg.at("baseline");
        reject_unknown(b, {"lanes", "datapath_bits_per_lane", "startup_cycles"},
                       "baseline");
        bp.lanes = b.value("lanes", bp.lanes);
        bp.datapath_bits_per_lane =
            b.value("datapath_bits_per_lane", bp.datapath_bits_per_lane);
        bp.startup_cycles = b.value("startup_cycles", bp.startup_cycles);
    }
    return bp;
}

std::vector<Precision> parse_precision_list(const json& arr, const std::string& where) {
    std::vector<Precision> out;
    if (!arr.is_array()) throw ConfigError(where + " must be a list");
    for (const auto& p : arr) out.push_back(parse_precision(p.get<std::string>()));
    return out;
}

json machine_echo(const HwConfig& hw) {
    return json{{"lanes", hw.lanes}, {"tile_r", hw.tile_r},
                {"tile_c", hw.tile_c}, {"bus_bytes", hw.bus_bytes}};
}

json baseline_echo(const BaselineParams& bp) {
    return json{{"lanes", bp.lanes},
                {"datapath_bits_per_lane", bp.datapath_bits_per_lane},
                {"startup_cycles", bp.startup_cycles}};
}

json entry_echo(const SuiteEntry& e) {
    json j{{"name", e.name}, {"repeat", e.repeat}};
    if (e.op.kind == OpKind::Conv) {
        const ConvShape& c = e.op.conv;
        j["conv"] = json{{"ic", c.ic}, {"ih", c.ih}, {"iw", c.iw}, {"oc", c.oc},
                         {"kh", c.kh}, {"kw", c.kw}, {"stride", c.stride},
                         {"pad", c.pad}, {"depthwise", c.depthwise}};
    } else {
        j["mm"] = json{{"m", e.op.mm.m}, {"k", e.op.mm.k}, {"n", e.op.mm.n}};
    }
    j["strategy"] = e.forced ? to_string(*e.forced) : "auto";
    json pj = json::array();
    for (Precision p : e.precisions) pj.push_back(to_string(p));
    j["precisions"] = pj;
    return j;
}

// ---------------------------------------------------------------------------
// cmd asm
// ---------------------------------------------------------------------------

int cmd_asm(const std::string& input, std::string output, bool list) {
    const std::string text = read_file(input);
    const std::vector<Instruction> prog = assemble(text);
    if (output.empty()) {
        fs::path p(input);
        p.replace_extension(".bin");
        output = p.string();
    }
    std::string bytes;
    bytes.reserve(prog.size() * 4);
    for (const Instruction& inst : prog) {
        const uint32_t w = encode_instruction(inst);
        for (int i = 0; i < 4; ++i)
            bytes.push_back(static_cast<char>((w >> (8 * i)) & 0xff));
    }
    write_file(output, bytes);
    if (list) std::cout << disassemble(prog);
    std::cout << "assembled " << prog.size() << " instructions -> " << output
              << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// cmd run
// ---------------------------------------------------------------------------

int cmd_run(const std::string& program, const HwConfig& hw, uint64_t mem_size,
            const std::vector<std::string>& xregs,
            const std::vector<std::string>& images, const std::string& trace,
            const std::string& access_log, const std::vector<std::string>& peeks) {
    const std::string bytes = read_file(program);
    if (bytes.size() % 4 != 0)
        throw IllegalInstruction(program + ": size is not a multiple of 4");
    std::vector<Instruction> prog;
    prog.reserve(bytes.size() / 4);
    for (size_t i = 0; i < bytes.size(); i += 4) {
        uint32_t w = 0;
        for (int b = 3; b >= 0; --b)
            w = (w << 8) | static_cast<uint8_t>(bytes[i + b]);
        prog.push_back(decode_instruction(w));
    }

    ExternalMemory mem(mem_size);
    for (const std::string& img : images) {
        const size_t at = img.rfind('@');
        if (at == std::string::npos)
            throw ConfigError("--mem needs FILE@ADDR, got '" + img + "'");
        const std::string data = read_file(img.substr(0, at));
        const uint64_t addr = std::stoull(img.substr(at + 1), nullptr, 0);
        mem.poke(static_cast<uint32_t>(addr), data.data(), data.size());
    }

    Machine m(hw);
    for (const std::string& xr : xregs) {
        const size_t eq = xr.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--xreg needs INDEX=VALUE, got '" + xr + "'");
        const int idx = std::stoi(xr.substr(0, eq));
        if (idx < 0 || idx > 31) throw ConfigError("--xreg index must be 0..31");
        m.xregs()[idx] = std::stoull(xr.substr(eq + 1), nullptr, 0);
    }
    if (!trace.empty()) m.set_trace(trace);
    mem.set_logging(!access_log.empty());

    const RunResult r = m.run(prog, mem);

    if (!access_log.empty()) {
        std::ostringstream ss;
        ss << "cycle,dir,addr,len\n";
        for (const AccessRecord& a : mem.log())
            ss << a.cycle << ',' << (a.dir == MemDir::Read ? 'R' : 'W') << ','
               << a.addr << ',' << a.len << '\n';
        write_file(access_log, ss.str());
    }

    std::cout << "cycles=" << r.cycles << " instructions=" << r.instructions
              << " ext_bytes_read=" << r.ext_bytes_read
              << " ext_bytes_written=" << r.ext_bytes_written << '\n';

    for (const std::string& pk : peeks) {
        const size_t colon = pk.find(':');
        if (colon == std::string::npos)
            throw ConfigError("--peek needs ADDR:LEN, got '" + pk + "'");
        const uint64_t addr = std::stoull(pk.substr(0, colon), nullptr, 0);
        const uint64_t len = std::stoull(pk.substr(colon + 1), nullptr, 0);
        std::vector<uint8_t> buf(len);
        mem.peek(static_cast<uint32_t>(addr), buf.data(), buf.size());
        std::cout << "peek " << pk << " =";
        char hex[8];
        for (uint8_t b : buf) {
            std::snprintf(hex, sizeof hex, " %02x", b);
            std::cout << hex;
        }
        std::cout << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// cmd bench
// ---------------------------------------------------------------------------

struct BenchTask {
    SuiteEntry entry;
    std::vector<Strategy> strategies;   // empty: operator default
    std::vector<Precision> precisions;  // effective list
};

struct BenchSetup {
    HwConfig hw;
    BaselineParams bp;
    uint64_t seed = 1;
    int stage_n = 4;
    std::string trace_dir;
    std::vector<BenchTask> tasks;
    json echo;
};

BenchSetup parse_bench_config(const json& cfg, std::optional<uint64_t> seed_flag) {
    reject_unknown(cfg,
                   {"machine", "baseline", "seed", "stage_n", "precisions",
                    "strategies", "suite", "suite_dir", "operators", "trace_dir"},
                   "config");
    BenchSetup s;
    s.hw = parse_machine(cfg);
    s.bp = parse_baseline(cfg);
    s.seed = resolve_seed(cfg, seed_flag);
    s.stage_n = cfg.value("stage_n", 4);
    s.trace_dir = cfg.value("trace_dir", "");

    std::vector<Precision> global_prec;
    if (cfg.contains("precisions"))
        global_prec = parse_precision_list(cfg.at("precisions"), "precisions");

    std::vector<Strategy> forced_list;
    std::vector<std::string> strat_names;
    if (cfg.contains("strategies")) {
        const json& arr = cfg.at("strategies");
        if (!arr.is_array()) throw ConfigError("strategies must be a list");
        for (const auto& sv : arr) strat_names.push_back(sv.get<std::string>());
        const bool is_auto = strat_names.size() == 1 && strat_names[0] == "auto";
        if (!is_auto)
            for (const std::string& name : strat_names)
                forced_list.push_back(parse_strategy(name));
    } else {
        strat_names = {"auto"};
    }

    if (cfg.contains("suite") == cfg.contains("operators"))
        throw ConfigError("config needs exactly one of 'suite' or 'operators'");

    std::vector<Precision> suite_default{Precision::Int16, Precision::Int8};
    json ops_echo = json::array();
    std::vector<SuiteEntry> entries;
    if (cfg.contains("suite")) {
        const Suite suite =
            model_suite(cfg.at("suite").get<std::string>(), cfg.value("suite_dir", ""));
        suite_default = suite.default_precisions;
        entries = suite.entries;
    } else {
        const json& arr = cfg.at("operators");
        if (!arr.is_array()) throw ConfigError("operators must be a list");
        int idx = 0;
        for (const auto& oj : arr) {
            entries.push_back(
                parse_suite_layer(oj.dump(), "operators[" + std::to_string(idx) + "]"));
            ++idx;
        }
    }

    for (SuiteEntry& e : entries) {
        BenchTask t;
        t.entry = std::move(e);
        if (!forced_list.empty()) {
            t.strategies = forced_list;
        } else if (t.entry.forced) {
            t.strategies = {*t.entry.forced};
        }
        t.precisions = !t.entry.precisions.empty() ? t.entry.precisions
                       : !global_prec.empty()      ? global_prec
                                                   : suite_default;
        for (Strategy st : t.strategies) check_strategy(t.entry.op, st);
        s.tasks.push_back(std::move(t));
        ops_echo.push_back(entry_echo(s.tasks.back().entry));
    }

    json prec_echo = json::array();
    for (Precision p : global_prec) prec_echo.push_back(to_string(p));
    s.echo = json{{"machine", machine_echo(s.hw)},
                  {"baseline", baseline_echo(s.bp)},
                  {"seed", s.seed},
                  {"stage_n", s.stage_n},
                  {"strategies", strat_names},
                  {"precisions", prec_echo},
                  {"operators", ops_echo}};
    if (cfg.contains("suite")) {
        s.echo["suite"] = cfg.at("suite").get<std::string>();
        s.echo["suite_dir"] = cfg.value("suite_dir", "");
    }
    if (!s.trace_dir.empty()) s.echo["trace_dir"] = s.trace_dir;
    return s;
}

std::vector<ComparisonReport> run_tasks(const BenchSetup& s, int jobs) {
#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif
    std::vector<ComparisonReport> reps(s.tasks.size());
    std::vector<std::exception_ptr> errs(s.tasks.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (size_t i = 0; i < s.tasks.size(); ++i) {
        try {
            const BenchTask& t = s.tasks[i];
            reps[i] = compare(t.entry.op, t.precisions, t.strategies, s.hw, s.bp,
                              s.seed, s.stage_n);
        } catch (...) {
            errs[i] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errs)
        if (e) std::rethrow_exception(e);
    return reps;
}

// Claims derived from one task's comparison (suite-level pass/fail column).
void collect_claims(const std::string& name, const ComparisonReport& rep,
                    std::vector<Claim>& claims) {
    for (const OrderingCheck& c : rep.checks)
        claims.push_back({name + ": " + c.description, c.pass});
    for (const RunRecord& rr : rep.runs) {
        if (rr.strategy == "baseline") continue;
        claims.push_back({name + ": speedup >= 1 @" + rr.strategy + "/" +
                              to_string(rr.precision),
                          rr.speedup >= 1.0});
    }
    // Narrower precision must pay off more (per strategy, where both ran).
    for (const RunRecord& a : rep.runs) {
        if (a.strategy == "baseline" || a.precision != Precision::Int8) continue;
        for (const RunRecord& b : rep.runs) {
            if (b.strategy != a.strategy || b.precision != Precision::Int16) continue;
            claims.push_back({name + ": speedup int8 > int16 @" + a.strategy,
                              a.speedup > b.speedup});
        }
    }
    // Output-stationary dataflow must cut external traffic by more than half.
    for (const RunRecord& a : rep.runs) {
        if (a.strategy != "FF") continue;
        for (const RunRecord& b : rep.runs) {
            if (b.strategy != "baseline" || b.precision != a.precision) continue;
            const double red =
                1.0 - double(a.metrics.ext_bytes()) / double(b.metrics.ext_bytes());
            claims.push_back({name + ": FF ext_bytes reduction > 50% vs baseline @" +
                                  to_string(a.precision),
                              red > 0.5});
        }
    }
}

void trace_reruns(const BenchSetup& s) {
    fs::create_directories(s.trace_dir);
    int idx = 0;
    for (const BenchTask& t : s.tasks) {
        for (Precision p : t.precisions) {
            std::vector<Strategy> strats = t.strategies;
            if (strats.empty()) strats.push_back(select_strategy(t.entry.op));
            for (Strategy st : strats) {
                OperatorDesc op = t.entry.op;
                op.precision = p;
                std::mt19937 rng = operand_rng(op, p, s.seed);
                const Operands vals = draw_operands(op, rng);
                const Plan plan = plan_operator(op, s.hw, st, s.stage_n);
                ExternalMemory mem;
                poke_operands(op, plan.layout, vals, mem);
                Machine m(s.hw);
                char prefix[16];
                std::snprintf(prefix, sizeof prefix, "%04d", idx++);
                m.set_trace(s.trace_dir + "/" + prefix + "_" +
                            sanitize(t.entry.name) + "_" + to_string(st) + "_" +
                            to_string(p) + ".csv");
                m.run(plan, mem);
            }
        }
    }
}

int cmd_bench(const std::string& config, const std::vector<std::string>& sets,
              const std::string& out_dir, int jobs,
              std::optional<uint64_t> seed_flag) {
    const json cfg = load_config(config, sets);
    BenchSetup s = parse_bench_config(cfg, seed_flag);

    const std::vector<ComparisonReport> reps = run_tasks(s, jobs);

    std::vector<ReportRow> rows;
    std::vector<Claim> claims;
    for (size_t i = 0; i < s.tasks.size(); ++i) {
        for (const RunRecord& rr : reps[i].runs)
            rows.push_back(make_row(s.tasks[i].entry.name, s.hw, rr));
        collect_claims(s.tasks[i].entry.name, reps[i], claims);
    }
    {
        bool ok = true;
        for (size_t i = 0; i < s.tasks.size(); ++i)
            for (const RunRecord& rr : reps[i].runs)
                if (rr.strategy != "baseline")
                    ok = ok && rr.metrics.ops_per_cycle <=
                                   double(s.hw.peak_ops_per_cycle(rr.precision));
        if (!rows.empty())
            claims.push_back(
                {"machine ops_per_cycle <= 2*lanes*tile_r*tile_c*pp on every row", ok});
    }

    if (!s.trace_dir.empty()) trace_reruns(s);

    fs::create_directories(out_dir);
    std::ostringstream csv;
    write_csv(csv, rows, false);
    write_file(out_dir + "/report.csv", csv.str());
    write_file(out_dir + "/report.json",
               report_json("bench", s.echo, rows, claims).dump(2) + "\n");

    int failed = 0;
    for (const Claim& c : claims) failed += c.pass ? 0 : 1;
    std::cout << "wrote " << out_dir << "/report.csv and " << out_dir
              << "/report.json (" << rows.size() << " rows, " << claims.size()
              << " checks, " << failed << " failed)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// cmd sweep
// ---------------------------------------------------------------------------

struct SweepSetup {
    std::vector<int> lanes, tile_r, tile_c;
    int bus_bytes = 64;
    BaselineParams bp;
    uint64_t seed = 1;
    int stage_n = 4;
    std::vector<SuiteEntry> entries;
    std::vector<Precision> precisions{Precision::Int16};
    std::optional<Strategy> forced;
    json echo;
};

std::vector<int> parse_axis(const json& arr, const std::string& name, int lo, int hi) {
    std::vector<int> out;
    if (!arr.is_array() || arr.empty())
        throw ConfigError("axis " + name + " must be a non-empty list");
    for (const auto& v : arr) {
        if (!v.is_number_integer())
            throw ConfigError("axis " + name + ": values must be integers");
        const int x = v.get<int>();
        if (x < lo || x > hi || (x & (x - 1)) != 0)
            throw ConfigError("invalid axis value " + std::to_string(x) + " for " +
                              name + " (powers of two in " + std::to_string(lo) +
                              ".." + std::to_string(hi) + ")");
        out.push_back(x);
    }
    return out;
}

SweepSetup parse_sweep_config(const json& cfg, std::optional<uint64_t> seed_flag) {
    reject_unknown(cfg,
                   {"axes", "machine", "baseline", "seed", "stage_n", "precisions",
                    "strategy", "operator", "operators"},
                   "config");
    SweepSetup s;
    const HwConfig base = parse_machine(cfg);
    s.bus_bytes = base.bus_bytes;
    s.lanes = {base.lanes};
    s.tile_r = {base.tile_r};
    s.tile_c = {base.tile_c};
    if (cfg.contains("axes")) {
        const json& ax = cfg.at("axes");
        reject_unknown(ax, {"lanes", "tile_r", "tile_c"}, "axes");
        if (ax.contains("lanes")) s.lanes = parse_axis(ax.at("lanes"), "lanes", 1, 64);
        if (ax.contains("tile_r"))
            s.tile_r = parse_axis(ax.at("tile_r"), "tile_r", 1, 16);
        if (ax.contains("tile_c"))
            s.tile_c = parse_axis(ax.at("tile_c"), "tile_c", 1, 16);
    }
    s.bp = parse_baseline(cfg);
    s.seed = resolve_seed(cfg, seed_flag);
    s.stage_n = cfg.value("stage_n", 4);
    if (cfg.contains("precisions"))
        s.precisions = parse_precision_list(cfg.at("precisions"), "precisions");

    if (cfg.contains("strategy")) {
        const std::string name = cfg.at("strategy").get<std::string>();
        if (name != "auto") s.forced = parse_strategy(name);
    }

    if (cfg.contains("operator") == cfg.contains("operators"))
        throw ConfigError("config needs exactly one of 'operator' or 'operators'");
    if (cfg.contains("operator")) {
        s.entries.push_back(parse_suite_layer(cfg.at("operator").dump(), "operator"));
    } else {
        const json& arr = cfg.at("operators");
        if (!arr.is_array()) throw ConfigError("operators must be a list");
        int idx = 0;
        for (const auto& oj : arr) {
            s.entries.push_back(
                parse_suite_layer(oj.dump(), "operators[" + std::to_string(idx) + "]"));
            ++idx;
        }
    }
    for (const SuiteEntry& e : s.entries)
        if (s.forced) check_strategy(e.op, *s.forced);

    json ops_echo = json::array();
    for (const SuiteEntry& e : s.entries) ops_echo.push_back(entry_echo(e));
    json prec_echo = json::array();
    for (Precision p : s.precisions) prec_echo.push_back(to_string(p));
    s.echo = json{{"axes", json{{"lanes", s.lanes},
                                {"tile_r", s.tile_r},
                                {"tile_c", s.tile_c}}},
                  {"bus_bytes", s.bus_bytes},
                  {"baseline", baseline_echo(s.bp)},
                  {"seed", s.seed},
                  {"stage_n", s.stage_n},
                  {"strategy", s.forced ? to_string(*s.forced) : "auto"},
                  {"precisions", prec_echo},
                  {"operators", ops_echo}};
    return s;
}

int cmd_sweep(const std::string& config, const std::vector<std::string>& sets,
              const std::string& out_dir, int jobs,
              std::optional<uint64_t> seed_flag) {
    const json cfg = load_config(config, sets);
    const SweepSetup s = parse_sweep_config(cfg, seed_flag);

    struct Point {
        HwConfig hw;
        const SuiteEntry* entry;
    };
    std::vector<Point> points;
    for (int l : s.lanes)
        for (int tr : s.tile_r)
            for (int tc : s.tile_c)
                for (const SuiteEntry& e : s.entries)
                    points.push_back({HwConfig{l, tr, tc, s.bus_bytes}, &e});

#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif
    std::vector<ComparisonReport> reps(points.size());
    std::vector<std::exception_ptr> errs(points.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (size_t i = 0; i < points.size(); ++i) {
        try {
            std::vector<Strategy> strats;
            if (s.forced)
                strats = {*s.forced};
            else if (points[i].entry->forced)
                strats = {*points[i].entry->forced};
            reps[i] = compare(points[i].entry->op, s.precisions, strats,
                              points[i].hw, s.bp, s.seed, s.stage_n);
        } catch (...) {
            errs[i] = std::current_exception();
        }
    }
    for (const std::exception_ptr& e : errs)
        if (e) std::rethrow_exception(e);

    std::vector<ReportRow> rows;
    bool peak_ok = true;
    for (size_t i = 0; i < points.size(); ++i) {
        for (const RunRecord& rr : reps[i].runs) {
            if (rr.strategy == "baseline") continue;  // design-space table only
            rows.push_back(make_row(points[i].entry->name, points[i].hw, rr));
            peak_ok = peak_ok &&
                      rr.metrics.ops_per_cycle <=
                          double(points[i].hw.peak_ops_per_cycle(rr.precision));
        }
    }
    std::vector<Claim> claims;
    if (!rows.empty())
        claims.push_back(
            {"machine ops_per_cycle <= 2*lanes*tile_r*tile_c*pp on every row",
             peak_ok});

    fs::create_directories(out_dir);
    std::ostringstream csv;
    write_csv(csv, rows, true);
    write_file(out_dir + "/sweep.csv", csv.str());
    write_file(out_dir + "/sweep.json",
               report_json("sweep", s.echo, rows, claims).dump(2) + "\n");
    std::cout << "wrote " << out_dir << "/sweep.csv and " << out_dir
              << "/sweep.json (" << rows.size() << " rows)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// cmd report
// ---------------------------------------------------------------------------

int cmd_report(const std::string& input, std::string csv_path, std::string md_path) {
    json rep;
    try {
        rep = json::parse(read_file(input));
    } catch (const json::exception& e) {
        throw ConfigError(input + ": " + e.what());
    }
    std::string kind;
    std::vector<ReportRow> rows;
    std::vector<Claim> claims;
    try {
        kind = rep.at("kind").get<std::string>();
        if (kind != "bench" && kind != "sweep")
            throw ConfigError(input + ": unknown report kind '" + kind + "'");
        for (const json& rj : rep.at("rows"))
            rows.push_back(row_from_json(rj, kind == "sweep"));
        for (const json& cj : rep.at("checks"))
            claims.push_back({cj.at("description").get<std::string>(),
                              cj.at("pass").get<bool>()});
    } catch (const json::exception& e) {
        throw ConfigError(input + ": " + e.what());
    }

    if (csv_path.empty() && md_path.empty()) {
        fs::path p(input);
        p.replace_extension(".csv");
        csv_path = p.string();
        p.replace_extension(".md");
        md_path = p.string();
    }
    if (!csv_path.empty()) {
        std::ostringstream ss;
        write_csv(ss, rows, kind == "sweep");
        write_file(csv_path, ss.str());
        std::cout << "wrote " << csv_path << '\n';
    }
    if (!md_path.empty()) {
        std::ostringstream ss;
        const bool sweep = kind == "sweep";
        ss << "# " << kind << " report\n\n## Rows\n\n|";
        if (sweep) ss << " lanes | tile_r | tile_c |";
        ss << " operator | strategy | precision | cycles | valid_ops | "
              "ops_per_cycle | ext_bytes | instr | regs | speedup |\n|";
        for (int i = 0; i < (sweep ? 13 : 10); ++i) ss << "---|";
        ss << '\n';
        for (const ReportRow& r : rows) {
            ss << "|";
            if (sweep) ss << ' ' << r.lanes << " | " << r.tile_r << " | " << r.tile_c << " |";
            ss << ' ' << r.op_name << " | " << r.strategy << " | " << r.precision
               << " | " << r.cycles << " | " << r.valid_ops << " | "
               << fmt4(r.ops_per_cycle) << " | " << r.ext_bytes << " | "
               << r.instructions << " | " << r.regs << " | " << fmt4(r.speedup)
               << " |\n";
        }
        ss << "\n## Checks\n\n";
        if (claims.empty()) ss << "(none)\n";
        for (const Claim& c : claims)
            ss << "- " << (c.pass ? "PASS" : "FAIL") << " — " << c.description
               << '\n';
        write_file(md_path, ss.str());
        std::cout << "wrote " << md_path << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Exit-code mapping
// ---------------------------------------------------------------------------

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const AssemblyError& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 2;
    } catch (const IllegalInstruction& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 2;
    } catch (const EncodingError& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 2;
    } catch (const ExecutionError& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 3;
    } catch (const MemoryFault& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 3;
    } catch (const VrfFault& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 3;
    } catch (const VrfPortConflict& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 3;
    } catch (const StateError& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 3;
    } catch (const LoweringError& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 3;
    } catch (const SimError& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "speedsim: " << e.what() << '\n';
        return 4;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"speedsim - scalable vector tensor-unit simulator"};
    app.require_subcommand(1);

    // asm
    auto* c_asm = app.add_subcommand("asm", "assemble a program");
    std::string asm_in, asm_out;
    bool asm_list = false;
    c_asm->add_option("input", asm_in, "assembly source")->required();
    c_asm->add_option("-o,--output", asm_out, "output binary (default: input.bin)");
    c_asm->add_flag("--list", asm_list, "print the disassembly listing");

    // run
    auto* c_run = app.add_subcommand("run", "execute an assembled program");
    std::string run_prog, run_trace, run_alog;
    HwConfig run_hw;
    uint64_t run_mem = ExternalMemory::kDefaultSize;
    std::vector<std::string> run_xregs, run_images, run_peeks;
    c_run->add_option("program", run_prog, "program binary")->required();
    c_run->add_option("--lanes", run_hw.lanes, "lane count");
    c_run->add_option("--tile-r", run_hw.tile_r, "PE rows per lane");
    c_run->add_option("--tile-c", run_hw.tile_c, "PE columns per lane");
    c_run->add_option("--bus-bytes", run_hw.bus_bytes, "external bus bytes/cycle");
    c_run->add_option("--mem-size", run_mem, "external memory bytes");
    c_run->add_option("--xreg", run_xregs, "scalar register INDEX=VALUE")
        ->take_all();
    c_run->add_option("--mem", run_images, "preload FILE@ADDR")->take_all();
    c_run->add_option("--trace", run_trace, "cycle trace CSV path");
    c_run->add_option("--access-log", run_alog, "memory access log CSV path");
    c_run->add_option("--peek", run_peeks, "print memory ADDR:LEN after the run")
        ->take_all();

    // bench / sweep share flag shapes
    std::string bench_cfg, bench_out = ".";
    std::vector<std::string> bench_sets;
    int bench_jobs = 0;
    std::optional<uint64_t> bench_seed;
    auto* c_bench = app.add_subcommand("bench", "benchmark operators / suites");
    c_bench->add_option("config", bench_cfg, "JSON run config")->required();
    c_bench->add_option("-o,--out-dir", bench_out, "report directory");
    c_bench->add_option("--set", bench_sets, "override config key=value")
        ->take_all();
    c_bench->add_option("--jobs", bench_jobs, "parallel run bound");
    c_bench->add_option("--seed", bench_seed, "seed override");

    std::string sweep_cfg, sweep_out = ".";
    std::vector<std::string> sweep_sets;
    int sweep_jobs = 0;
    std::optional<uint64_t> sweep_seed;
    auto* c_sweep = app.add_subcommand("sweep", "design-space sweep");
    c_sweep->add_option("config", sweep_cfg, "JSON sweep config")->required();
    c_sweep->add_option("-o,--out-dir", sweep_out, "report directory");
    c_sweep->add_option("--set", sweep_sets, "override config key=value")
        ->take_all();
    c_sweep->add_option("--jobs", sweep_jobs, "parallel run bound");
    c_sweep->add_option("--seed", sweep_seed, "seed override");

    // report
    auto* c_rep = app.add_subcommand("report", "re-render a JSON report");
    std::string rep_in, rep_csv, rep_md;
    c_rep->add_option("input", rep_in, "report JSON")->required();
    c_rep->add_option("--csv", rep_csv, "CSV output path");
    c_rep->add_option("--md", rep_md, "markdown output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 4;
    }

    if (c_asm->parsed())
        return guarded([&] { return cmd_asm(asm_in, asm_out, asm_list); });
    if (c_run->parsed())
        return guarded([&] {
            run_hw.validate();
            return cmd_run(run_prog, run_hw, run_mem, run_xregs, run_images,
                           run_trace, run_alog, run_peeks);
        });
    if (c_bench->parsed())
        return guarded([&] {
            return cmd_bench(bench_cfg, bench_sets, bench_out, bench_jobs,
                             bench_seed);
        });
    if (c_sweep->parsed())
        return guarded([&] {
            return cmd_sweep(sweep_cfg, sweep_sets, sweep_out, sweep_jobs,
                             sweep_seed);
        });
    if (c_rep->parsed())
        return guarded([&] { return cmd_report(rep_in, rep_csv, rep_md); });
    return 4;  // unreachable: require_subcommand(1)
}

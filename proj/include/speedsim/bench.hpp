#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "speedsim/baseline.hpp"
#include "speedsim/machine.hpp"

namespace speedsim {

// ---------------------------------------------------------------------------
// Unified run metrics
// ---------------------------------------------------------------------------

// Cost and size figures of one run, tensor-unit or baseline, on a common
// footing. A multiply-accumulate counts as two operations, so peak
// ops_per_cycle is twice the peak MAC rate.
struct Metrics {
    uint64_t cycles = 0;
    uint64_t instructions_total = 0;
    uint64_t arithmetic_instructions = 0;
    int distinct_vector_registers = 0;
    uint64_t ext_bytes_read = 0;
    uint64_t ext_bytes_written = 0;
    uint64_t valid_ops = 0;
    double ops_per_cycle = 0.0;

    uint64_t ext_bytes() const { return ext_bytes_read + ext_bytes_written; }
};

Metrics metrics_of(const Plan& plan, const RunResult& run);
Metrics metrics_of(const BaselineRun& run);

// ---------------------------------------------------------------------------
// Operator comparison
// ---------------------------------------------------------------------------

struct RunRecord {
    std::string strategy;  // "MM" / "FFCS" / "CF" / "FF" / "baseline"
    Precision precision = Precision::Int16;
    Metrics metrics;
    // cycles(baseline at baseline_precision) / cycles(this run); baseline
    // rows carry 1.0. Int4 runs compare against the Int16 baseline, the
    // narrowest element the baseline datapath supports.
    double speedup = 0.0;
    Precision baseline_precision = Precision::Int16;
};

struct OrderingCheck {
    std::string description;
    bool pass = false;
};

struct ComparisonReport {
    OperatorDesc op;
    std::vector<RunRecord> runs;
    std::vector<OrderingCheck> checks;
};

// Random operand tensors for one operator (x/a first, w/b second) in oracle
// element order, drawn uniformly over the precision's value range.
struct Operands {
    std::vector<int32_t> x;
    std::vector<int32_t> w;
};

Operands draw_operands(const OperatorDesc& op, std::mt19937& rng);

// The generator compare() draws operands from: depends only on (op label,
// precision, seed). Exposed so other harnesses (CLI trace re-runs, sweeps)
// can reproduce the exact tensors of a bench run.
std::mt19937 operand_rng(const OperatorDesc& op, Precision p, uint64_t seed);

// Writes the operand tensors into external memory in the planner's
// row-padded layout.
void poke_operands(const OperatorDesc& op, const ExtLayout& lay,
                   const Operands& vals, ExternalMemory& mem);

// Reference 32-bit output for the operator on these operands.
std::vector<int32_t> oracle_eval(const OperatorDesc& op, const Operands& vals);

// Runs the operator under each requested strategy on the tensor-unit machine
// and under the baseline model, verifies every machine output against the
// oracle (ExecutionError on any mismatch), and reports per-run metrics,
// speedups, and external-access ordering checks. An empty strategy list means
// the default strategy for the operator. Requesting a strategy that is
// illegal for the operator throws StrategyError. Deterministic given `seed`:
// operands depend only on (op, precision, seed).
ComparisonReport compare(const OperatorDesc& op,
                         const std::vector<Precision>& precisions,
                         const std::vector<Strategy>& strategies,
                         const HwConfig& hw, const BaselineParams& bp = {},
                         uint64_t seed = 1, int stage_n = 4);

// ---------------------------------------------------------------------------
// Benchmark suites
// ---------------------------------------------------------------------------

struct SuiteEntry {
    std::string name;
    int repeat = 1;  // identical consecutive layers collapsed
    OperatorDesc op;
    std::optional<Strategy> forced;     // unset: pick per select_strategy
    std::vector<Precision> precisions;  // empty: suite default list
};

struct Suite {
    std::string model;
    std::string note;
    int nonlinear_skipped = 0;  // activation/norm/pool layers listed but not run
    std::vector<Precision> default_precisions;
    std::vector<SuiteEntry> entries;
};

// Loads `<dir>/<name>.json`. An empty `dir` means the build-time default
// directory. Missing file: SuiteNotFound. Malformed content: ConfigError.
Suite model_suite(const std::string& name, const std::string& dir = "");

// Parses one layer/operator description (the schema of a suite "layers"
// element) from JSON text. `where` names the source in error messages.
// Unlike suite layers, "name" may be omitted: it defaults to the operator
// label. ConfigError on malformed content or unknown keys.
SuiteEntry parse_suite_layer(const std::string& json_text, const std::string& where);

const char* default_suite_dir();

// String helpers shared with the CLI (ConfigError on unknown names).
Precision parse_precision(const std::string& s);
Strategy parse_strategy(const std::string& s);

}  // namespace speedsim

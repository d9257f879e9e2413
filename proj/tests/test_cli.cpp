#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// End-to-end tests against the installed binary (path injected by the build).
namespace fs = std::filesystem;

namespace {

const fs::path& scratch() {
    static const fs::path dir = [] {
        fs::path p = fs::absolute("test_cli_scratch");
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

struct CmdResult {
    int code = -1;
    std::string out;  // stdout + stderr
};

// Runs `speedsim <args>` through the shell; `env` prefixes the command line
// (e.g. "SPEEDSIM_SEED=9"). Paths in args must not contain spaces.
CmdResult cli(const std::string& args, const std::string& env = "") {
    static int seq = 0;
    const fs::path log = scratch() / ("cmd" + std::to_string(seq++) + ".log");
    std::string cmd;
    if (!env.empty()) cmd += env + " ";
    cmd += std::string(SPEEDSIM_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    CmdResult r;
    r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    r.out = slurp(log);
    return r;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Parses a report CSV into rows of fields, dropping the header.
std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    for (const std::string& line : split(slurp(p), '\n')) {
        if (line.empty()) continue;
        rows.push_back(split(line, ','));
    }
    REQUIRE(!rows.empty());
    rows.erase(rows.begin());
    return rows;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

const char* kPwcvConfig = R"({
  "machine": {"lanes": 4, "tile_r": 2, "tile_c": 2},
  "seed": 7,
  "precisions": ["int16", "int8"],
  "strategies": ["FF", "FFCS", "CF"],
  "operators": [
    {"name": "pw64", "conv": {"ic": 64, "ih": 16, "iw": 16, "oc": 64, "kh": 1, "kw": 1}}
  ]
})";

}  // namespace

TEST_CASE("cli: no subcommand and help") {
    CHECK(cli("").code == 4);
    CmdResult help = cli("--help");
    CHECK(help.code == 0);
    CHECK(contains(help.out, "bench"));
}

TEST_CASE("asm: listing assembles to little-endian custom-0 words") {
    const fs::path src = scratch() / "tiles.s";
    spit(src,
         "# four tile sweeps back to back\n"
         "vsam.vv v8, v4, v2\n"
         "vsam.vv v8, v4, v2\n"
         "\n"
         "vsam.vv v8, v4, v2\n"
         "vsam.vv v8, v4, v2   # trailing comment\n");
    CmdResult r = cli("asm " + src.string() + " --list");
    CHECK(r.code == 0);
    CHECK(contains(r.out, "assembled 4 instructions"));
    CHECK(contains(r.out, "vsam.vv"));

    // Default output name swaps the extension.
    const std::string bin = slurp(scratch() / "tiles.bin");
    REQUIRE(bin.size() == 16);
    for (int i = 0; i < 4; ++i) {
        uint32_t w = 0;
        for (int b = 3; b >= 0; --b)
            w = (w << 8) | static_cast<uint8_t>(bin[4 * i + b]);
        CHECK((w & 0x7f) == 0x0b);         // custom-0 major opcode
        CHECK(((w >> 12) & 0x7) == 2);     // funct3 selects vsam
        CHECK(w == [&] {                   // identical operands, identical words
            uint32_t w0 = 0;
            for (int b = 3; b >= 0; --b)
                w0 = (w0 << 8) | static_cast<uint8_t>(bin[b]);
            return w0;
        }());
    }
}

TEST_CASE("asm: empty source produces an empty binary") {
    const fs::path src = scratch() / "empty.s";
    spit(src, "# nothing but comments\n\n");
    const fs::path bin = scratch() / "empty.bin";
    CHECK(cli("asm " + src.string() + " -o " + bin.string()).code == 0);
    CHECK(slurp(bin).empty());
}

TEST_CASE("asm: unknown mnemonic is reported with its line number") {
    const fs::path src = scratch() / "bad.s";
    spit(src, "vsam.vv v8, v4, v2\nvmul.vv v1, v2, v3\n");
    CmdResult r = cli("asm " + src.string());
    CHECK(r.code == 2);
    CHECK(contains(r.out, "line 2"));
}

TEST_CASE("run: microprogram with trace, access log and peek") {
    const fs::path src = scratch() / "prog.s";
    spit(src,
         "vsetvli x5, x10, e16,m1\n"
         "vle16.v v1, (x11)\n"
         "vle16.v v2, (x12)\n"
         "vmacc.vv v4, v1, v2\n"
         "vse32.v v4, (x13)\n");
    REQUIRE(cli("asm " + src.string()).code == 0);

    // a = 1..16 as int16, b = 2 everywhere.
    std::string a, b;
    for (int i = 1; i <= 16; ++i) {
        a.push_back(static_cast<char>(i));
        a.push_back(0);
        b.push_back(2);
        b.push_back(0);
    }
    spit(scratch() / "a.img", a);
    spit(scratch() / "b.img", b);

    const fs::path bin = scratch() / "prog.bin";
    const fs::path trace = scratch() / "t.csv";
    const fs::path alog = scratch() / "al.csv";
    CmdResult r = cli("run " + bin.string() +
                      " --lanes 4 --tile-r 2 --tile-c 2"
                      " --xreg 10=16 --xreg 11=0x1000 --xreg 12=0x2000"
                      " --xreg 13=0x3000 --mem " +
                      (scratch() / "a.img").string() + "@0x1000 --mem " +
                      (scratch() / "b.img").string() + "@0x2000 --trace " +
                      trace.string() + " --access-log " + alog.string() +
                      " --peek 0x3000:16");
    CHECK(r.code == 0);
    CHECK(contains(r.out,
                   "cycles=12 instructions=5 ext_bytes_read=64 "
                   "ext_bytes_written=64"));
    // 2*a interleaved lane-striped: 32-bit element i pairs int16 elements
    // i and i+lanes.
    CHECK(contains(r.out,
                   "peek 0x3000:16 = 02 00 0a 00 04 00 0c 00 06 00 0e 00 08 00 "
                   "10 00"));

    const std::string tr = slurp(trace);
    CHECK(contains(tr, "cycle,stage,instr,mnemonic,unit\n"));
    CHECK(contains(tr, "1,ID,0,vsetvli,alu\n"));
    CHECK(contains(tr, ",CO,4,vse,"));

    CHECK(slurp(alog) ==
          "cycle,dir,addr,len\n"
          "4,R,4096,32\n"
          "5,R,8192,32\n"
          "11,W,12288,64\n");
}

TEST_CASE("run: truncated binary is rejected") {
    const fs::path bin = scratch() / "trunc.bin";
    spit(bin, std::string(6, '\0'));
    CHECK(cli("run " + bin.string()).code == 2);
}

TEST_CASE("bench: pointwise conv report is frozen and all checks pass") {
    const fs::path cfg = scratch() / "pwcv.json";
    spit(cfg, kPwcvConfig);
    const fs::path out = scratch() / "pwcv_out";
    CmdResult r = cli("bench " + cfg.string() + " -o " + out.string());
    CHECK(r.code == 0);
    CHECK(contains(r.out, "8 rows, 14 checks, 0 failed"));

    CHECK(slurp(out / "report.csv") ==
          "operator,strategy,precision,cycles,valid_ops,ops_per_cycle,"
          "ext_bytes,instr,regs\n"
          "pw64,baseline,int16,122631,2097152,17.1013,2236416,8321,31\n"
          "pw64,FF,int16,37261,2097152,56.2828,335872,106,22\n"
          "pw64,FFCS,int16,40237,2097152,52.1200,589824,2090,22\n"
          "pw64,CF,int16,49453,2097152,42.4070,1376256,8234,22\n"
          "pw64,baseline,int8,89351,2097152,23.4709,1150976,8321,31\n"
          "pw64,FF,int8,10509,2097152,199.5577,200704,58,22\n"
          "pw64,FFCS,int8,11997,2097152,174.8064,327680,1050,22\n"
          "pw64,CF,int8,16605,2097152,126.2964,720896,4122,22\n");

    const std::string js = slurp(out / "report.json");
    CHECK(contains(js, "\"kind\": \"bench\""));
    CHECK(contains(js, "FF ext_bytes reduction > 50% vs baseline @int16"));
    CHECK(!contains(js, "\"pass\": false"));

    // External traffic: FF under each strategy under the matched baseline.
    for (const auto& row : csv_rows(out / "report.csv")) {
        REQUIRE(row.size() == 9);
        if (row[1] == "FF") {
            const uint64_t ff = std::stoull(row[6]);
            CHECK(ff < (row[2] == "int16" ? 2236416ull : 1150976ull) / 2);
        }
    }
}

TEST_CASE("bench: empty operator list yields an empty report") {
    const fs::path cfg = scratch() / "none.json";
    spit(cfg, R"({"machine": {"lanes": 4}, "operators": []})");
    const fs::path out = scratch() / "none_out";
    CHECK(cli("bench " + cfg.string() + " -o " + out.string()).code == 0);
    CHECK(slurp(out / "report.csv") ==
          "operator,strategy,precision,cycles,valid_ops,ops_per_cycle,"
          "ext_bytes,instr,regs\n");
    CHECK(contains(slurp(out / "report.json"), "\"rows\": []"));
}

TEST_CASE("bench: unknown keys and missing suites are config errors") {
    const fs::path cfg = scratch() / "unk.json";
    spit(cfg, R"({"machine": {"lanes": 4}, "operators": [], "typo": 1})");
    CmdResult r = cli("bench " + cfg.string());
    CHECK(r.code == 4);
    CHECK(contains(r.out, "unknown key"));

    const fs::path cfg2 = scratch() / "nosuite.json";
    spit(cfg2, R"({"suite": "does_not_exist"})");
    CHECK(cli("bench " + cfg2.string()).code == 4);
}

TEST_CASE("bench: reruns are byte-identical; env seed equals the flag") {
    const fs::path cfg = scratch() / "det.json";
    spit(cfg, kPwcvConfig);
    const fs::path o1 = scratch() / "det1";
    const fs::path o2 = scratch() / "det2";
    REQUIRE(cli("bench " + cfg.string() + " -o " + o1.string()).code == 0);
    REQUIRE(cli("bench " + cfg.string() + " -o " + o2.string() + " --jobs 1")
                .code == 0);
    CHECK(slurp(o1 / "report.csv") == slurp(o2 / "report.csv"));
    CHECK(slurp(o1 / "report.json") == slurp(o2 / "report.json"));

    // The env var seeds only configs that carry no seed of their own.
    const fs::path cfg_ns = scratch() / "det_noseed.json";
    spit(cfg_ns, R"({
      "machine": {"lanes": 4, "tile_r": 2, "tile_c": 2},
      "precisions": ["int16"], "strategies": ["FF"],
      "operators": [
        {"name": "pw64",
         "conv": {"ic": 64, "ih": 16, "iw": 16, "oc": 64, "kh": 1, "kw": 1}}
      ]
    })");
    const fs::path oe = scratch() / "det_env";
    const fs::path of = scratch() / "det_flag";
    REQUIRE(cli("bench " + cfg_ns.string() + " -o " + oe.string(),
                "SPEEDSIM_SEED=9")
                .code == 0);
    REQUIRE(cli("bench " + cfg_ns.string() + " -o " + of.string() + " --seed 9")
                .code == 0);
    CHECK(contains(slurp(oe / "report.json"), "\"seed\": 9"));
    CHECK(slurp(oe / "report.json") == slurp(of / "report.json"));
}

TEST_CASE("bench: --set overrides dotted config paths") {
    const fs::path cfg = scratch() / "setcfg.json";
    spit(cfg, kPwcvConfig);
    const fs::path out = scratch() / "set_out";
    REQUIRE(cli("bench " + cfg.string() + " -o " + out.string() +
                " --set machine.lanes=8")
                .code == 0);
    CHECK(contains(slurp(out / "report.json"), "\"lanes\": 8"));
}

TEST_CASE("sweep: matmul grid scales monotonically in every axis") {
    const fs::path cfg = scratch() / "grid.json";
    spit(cfg, R"({
      "axes": {"lanes": [2, 4, 8], "tile_r": [2, 4, 8], "tile_c": [2, 4, 8]},
      "machine": {"bus_bytes": 64},
      "seed": 7,
      "precisions": ["int16"],
      "strategy": "auto",
      "operator": {"mm": {"m": 64, "k": 64, "n": 64}}
    })");
    const fs::path out = scratch() / "grid_out";
    CmdResult r = cli("sweep " + cfg.string() + " -o " + out.string());
    CHECK(r.code == 0);
    CHECK(contains(r.out, "27 rows"));
    CHECK(contains(slurp(out / "sweep.json"), "\"kind\": \"sweep\""));

    const auto rows = csv_rows(out / "sweep.csv");
    REQUIRE(rows.size() == 27);
    CHECK(rows[0] ==
          std::vector<std::string>{"2", "2", "2", "mm64x64x64", "MM", "int16",
                                   "17898", "524288", "29.2931", "32768", "579",
                                   "11", "3.661638"});

    struct Point {
        int l, tr, tc;
        double opc, proxy;
        uint64_t cycles;
    };
    std::vector<Point> pts;
    for (const auto& row : rows) {
        REQUIRE(row.size() == 13);
        pts.push_back({std::stoi(row[0]), std::stoi(row[1]), std::stoi(row[2]),
                       std::stod(row[8]), std::stod(row[12]),
                       std::stoull(row[6])});
        const Point& p = pts.back();
        CHECK(p.proxy ==
              doctest::Approx(p.opc / (p.l * p.tr * p.tc)).epsilon(1e-4));
    }
    // Growing any one dimension never loses throughput.
    for (const Point& a : pts)
        for (const Point& b : pts)
            if (a.l <= b.l && a.tr <= b.tr && a.tc <= b.tc)
                CHECK(a.opc <= b.opc + 1e-9);
    // Square tile scaling at fixed lane count shortens the run.
    for (int l : {2, 4, 8}) {
        uint64_t prev = UINT64_MAX;
        for (const Point& p : pts)
            if (p.l == l && p.tr == p.tc) {
                CHECK(p.cycles <= prev);
                prev = p.cycles;
            }
    }
}

TEST_CASE("sweep: a single point reproduces the bench row") {
    const char* op =
        R"({"name": "pw64", "conv": {"ic": 64, "ih": 16, "iw": 16, "oc": 64, "kh": 1, "kw": 1}, "strategy": "FF"})";
    const fs::path scfg = scratch() / "one.json";
    spit(scfg, std::string(R"({
      "axes": {"lanes": [4], "tile_r": [2], "tile_c": [2]},
      "seed": 7, "precisions": ["int16"], "strategy": "auto",
      "operator": )") + op + "\n}");
    const fs::path bcfg = scratch() / "one_bench.json";
    spit(bcfg, std::string(R"({
      "machine": {"lanes": 4, "tile_r": 2, "tile_c": 2},
      "seed": 7, "precisions": ["int16"],
      "operators": [)") + op + "]\n}");

    const fs::path so = scratch() / "one_sweep";
    const fs::path bo = scratch() / "one_bench";
    REQUIRE(cli("sweep " + scfg.string() + " -o " + so.string()).code == 0);
    REQUIRE(cli("bench " + bcfg.string() + " -o " + bo.string()).code == 0);

    const auto srows = csv_rows(so / "sweep.csv");
    REQUIRE(srows.size() == 1);
    for (const auto& brow : csv_rows(bo / "report.csv")) {
        if (brow[1] != "FF") continue;  // skip the baseline row
        const std::vector<std::string> shared(srows[0].begin() + 3,
                                              srows[0].end() - 1);
        CHECK(shared == brow);
    }
}

TEST_CASE("sweep: non-power-of-two axis value is rejected") {
    const fs::path cfg = scratch() / "badaxis.json";
    spit(cfg, R"({
      "axes": {"lanes": [3]},
      "operator": {"mm": {"m": 8, "k": 8, "n": 8}}
    })");
    CmdResult r = cli("sweep " + cfg.string());
    CHECK(r.code == 4);
    CHECK(contains(r.out, "invalid axis value 3"));
}

TEST_CASE("report: re-render is byte-identical and lists check verdicts") {
    const fs::path cfg = scratch() / "rr.json";
    spit(cfg, kPwcvConfig);
    const fs::path out = scratch() / "rr_out";
    REQUIRE(cli("bench " + cfg.string() + " -o " + out.string()).code == 0);

    const fs::path csv = scratch() / "rr.csv";
    const fs::path md = scratch() / "rr.md";
    CHECK(cli("report " + (out / "report.json").string() + " --csv " +
              csv.string() + " --md " + md.string())
              .code == 0);
    CHECK(slurp(csv) == slurp(out / "report.csv"));
    const std::string m = slurp(md);
    CHECK(contains(m, "# bench report"));
    CHECK(contains(m, "| pw64 | FF | int16 |"));
    CHECK(contains(m, "- PASS"));
    CHECK(!contains(m, "- FAIL"));
}

TEST_CASE("bench: a bundled suite runs end to end") {
    const fs::path cfg = scratch() / "suite.json";
    spit(cfg, R"({"suite": "vit_tiny_mini",
                  "machine": {"lanes": 4, "tile_r": 2, "tile_c": 2},
                  "seed": 7})");
    const fs::path out = scratch() / "suite_out";
    CmdResult r = cli("bench " + cfg.string() + " -o " + out.string());
    CHECK(r.code == 0);
    CHECK(contains(r.out, "0 failed"));
    CHECK(csv_rows(out / "report.csv").size() >= 16);
}

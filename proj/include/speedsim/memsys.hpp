#pragma once

#include <cstdint>
#include <vector>

#include "speedsim/errors.hpp"

namespace speedsim {

enum class MemDir : uint8_t { Read = 0, Write = 1 };

// One external-memory transaction, as written to the access log.
struct AccessRecord {
    uint64_t cycle = 0;
    MemDir dir = MemDir::Read;
    uint32_t addr = 0;
    uint32_t len = 0;

    bool operator==(const AccessRecord&) const = default;
};

// Byte-addressable external memory with exact traffic accounting. Simulated
// traffic goes through read()/write() and is counted; the host harness uses
// poke()/peek() to fill inputs and collect outputs without touching the
// counters.
class ExternalMemory {
public:
    static constexpr size_t kDefaultSize = 64ull << 20;  // 64 MiB

    explicit ExternalMemory(size_t size_bytes = kDefaultSize);

    size_t size() const { return mem_.size(); }

    void read(uint32_t addr, uint32_t len, void* dst, uint64_t cycle = 0);
    void write(uint32_t addr, uint32_t len, const void* src, uint64_t cycle = 0);

    // Unaccounted host access.
    void poke(uint32_t addr, const void* src, size_t len);
    void peek(uint32_t addr, void* dst, size_t len) const;

    uint64_t bytes_read() const { return bytes_read_; }
    uint64_t bytes_written() const { return bytes_written_; }
    uint64_t total_bytes() const { return bytes_read_ + bytes_written_; }
    void reset_counters();

    void set_logging(bool on) { logging_ = on; }
    const std::vector<AccessRecord>& log() const { return log_; }

private:
    void check_range(uint32_t addr, size_t len) const;

    std::vector<uint8_t> mem_;
    uint64_t bytes_read_ = 0;
    uint64_t bytes_written_ = 0;
    bool logging_ = false;
    std::vector<AccessRecord> log_;
};

// The three VRF port groups contended for by the tensor-unit stage engine.
// The load/store unit reaches the VRF over a dedicated path and never claims
// one of these.
enum class VrfPort : uint8_t { Request = 0, Accumulate = 1, Writeback = 2 };

const char* to_string(VrfPort p);

// Cycle-scoped claim tracker for the port groups. The scheduler plans port
// usage ahead of time; the ledger is the runtime invariant check that no two
// users ever hold the same group in the same cycle.
class VrfPortLedger {
public:
    void begin(uint64_t cycle);
    bool try_claim(VrfPort p);
    void claim(VrfPort p);  // VrfPortConflict if already taken this cycle

private:
    uint64_t cycle_ = 0;
    bool taken_[3] = {false, false, false};
};

// Vector register file for all lanes: 32 registers x 512 bytes per lane
// (VLEN = 4096 bits). Byte address inside a lane is reg * 512 + offset.
// Vector elements are striped element i -> lane i % lanes at in-lane offset
// (i / lanes) * element_bytes.
class Vrf {
public:
    static constexpr int kRegs = 32;
    static constexpr int kRegBytes = 512;
    static constexpr int kLaneBytes = kRegs * kRegBytes;

    explicit Vrf(int lanes);

    int lanes() const { return lanes_; }

    static uint32_t addr_of(int reg, int offset);

    // Raw per-lane byte access (tensor-unit operand tiles).
    void write_lane(int lane, uint32_t addr, const void* src, uint32_t len);
    void read_lane(int lane, void* dst, uint32_t addr, uint32_t len) const;

    // Striped element access (baseline vector ops and result stores).
    void store_elem(int reg, uint32_t idx, int elem_bytes, uint32_t value);
    uint32_t load_elem(int reg, uint32_t idx, int elem_bytes) const;

    void clear();

private:
    uint8_t* lane_ptr(int lane, uint32_t addr, uint32_t len);
    const uint8_t* lane_ptr(int lane, uint32_t addr, uint32_t len) const;

    int lanes_;
    std::vector<uint8_t> data_;  // lanes_ * kLaneBytes
};

}  // namespace speedsim

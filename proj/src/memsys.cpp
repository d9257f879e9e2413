#include "speedsim/memsys.hpp"

#include <algorithm>
#include <cstring>
#include <utility>

namespace speedsim {

ExternalMemory::ExternalMemory(size_t size_bytes) : mem_(size_bytes, 0) {}

void ExternalMemory::check_range(uint32_t addr, size_t len) const {
    if (len > mem_.size() || addr > mem_.size() - len)
        throw MemoryFault("access [" + std::to_string(addr) + ", " +
                          std::to_string(addr + static_cast<uint64_t>(len)) +
                          ") outside memory of " + std::to_string(mem_.size()) + " bytes");
}

void ExternalMemory::read(uint32_t addr, uint32_t len, void* dst, uint64_t cycle) {
    check_range(addr, len);
    std::memcpy(dst, mem_.data() + addr, len);
    bytes_read_ += len;
    if (logging_) log_.push_back({cycle, MemDir::Read, addr, len});
}

void ExternalMemory::write(uint32_t addr, uint32_t len, const void* src, uint64_t cycle) {
    check_range(addr, len);
    std::memcpy(mem_.data() + addr, src, len);
    bytes_written_ += len;
    if (logging_) log_.push_back({cycle, MemDir::Write, addr, len});
}

void ExternalMemory::poke(uint32_t addr, const void* src, size_t len) {
    check_range(addr, len);
    std::memcpy(mem_.data() + addr, src, len);
}

void ExternalMemory::peek(uint32_t addr, void* dst, size_t len) const {
    check_range(addr, len);
    std::memcpy(dst, mem_.data() + addr, len);
}

void ExternalMemory::reset_counters() {
    bytes_read_ = 0;
    bytes_written_ = 0;
    log_.clear();
}

const char* to_string(VrfPort p) {
    switch (p) {
        case VrfPort::Request: return "request";
        case VrfPort::Accumulate: return "accumulate";
        case VrfPort::Writeback: return "writeback";
    }
    return "?";
}

void VrfPortLedger::begin(uint64_t cycle) {
    cycle_ = cycle;
    taken_[0] = taken_[1] = taken_[2] = false;
}

bool VrfPortLedger::try_claim(VrfPort p) {
    bool& slot = taken_[static_cast<int>(p)];
    if (slot) return false;
    slot = true;
    return true;
}

void VrfPortLedger::claim(VrfPort p) {
    if (!try_claim(p))
        throw VrfPortConflict(std::string(to_string(p)) + " port claimed twice in cycle " +
                              std::to_string(cycle_));
}

Vrf::Vrf(int lanes) : lanes_(lanes), data_(static_cast<size_t>(lanes) * kLaneBytes, 0) {
    if (lanes < 1) throw ConfigError("lane count must be >= 1");
}

uint32_t Vrf::addr_of(int reg, int offset) {
    if (reg < 0 || reg >= kRegs) throw VrfFault("register v" + std::to_string(reg));
    if (offset < 0 || offset >= kRegBytes)
        throw VrfFault("offset " + std::to_string(offset) + " outside register");
    return static_cast<uint32_t>(reg * kRegBytes + offset);
}

uint8_t* Vrf::lane_ptr(int lane, uint32_t addr, uint32_t len) {
    return const_cast<uint8_t*>(std::as_const(*this).lane_ptr(lane, addr, len));
}

const uint8_t* Vrf::lane_ptr(int lane, uint32_t addr, uint32_t len) const {
    if (lane < 0 || lane >= lanes_) throw VrfFault("lane " + std::to_string(lane));
    if (len > kLaneBytes || addr > static_cast<uint32_t>(kLaneBytes) - len)
        throw VrfFault("lane access [" + std::to_string(addr) + ", " +
                       std::to_string(addr + len) + ") outside register file");
    return data_.data() + static_cast<size_t>(lane) * kLaneBytes + addr;
}

void Vrf::write_lane(int lane, uint32_t addr, const void* src, uint32_t len) {
    std::memcpy(lane_ptr(lane, addr, len), src, len);
}

void Vrf::read_lane(int lane, void* dst, uint32_t addr, uint32_t len) const {
    std::memcpy(dst, lane_ptr(lane, addr, len), len);
}

void Vrf::store_elem(int reg, uint32_t idx, int elem_bytes, uint32_t value) {
    int lane = static_cast<int>(idx % static_cast<uint32_t>(lanes_));
    uint32_t off = (idx / static_cast<uint32_t>(lanes_)) * static_cast<uint32_t>(elem_bytes);
    if (off + static_cast<uint32_t>(elem_bytes) > kRegBytes)
        throw VrfFault("element " + std::to_string(idx) + " overflows v" + std::to_string(reg));
    write_lane(lane, addr_of(reg, static_cast<int>(off)), &value, static_cast<uint32_t>(elem_bytes));
}

uint32_t Vrf::load_elem(int reg, uint32_t idx, int elem_bytes) const {
    int lane = static_cast<int>(idx % static_cast<uint32_t>(lanes_));
    uint32_t off = (idx / static_cast<uint32_t>(lanes_)) * static_cast<uint32_t>(elem_bytes);
    if (off + static_cast<uint32_t>(elem_bytes) > kRegBytes)
        throw VrfFault("element " + std::to_string(idx) + " overflows v" + std::to_string(reg));
    uint32_t value = 0;
    read_lane(lane, &value, addr_of(reg, static_cast<int>(off)), static_cast<uint32_t>(elem_bytes));
    return value;
}

void Vrf::clear() { std::fill(data_.begin(), data_.end(), 0); }

}  // namespace speedsim

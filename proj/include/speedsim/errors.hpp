#pragma once

#include <stdexcept>
#include <string>

namespace speedsim {

// Base class for every error the simulator raises on purpose. Callers that
// want a blanket catch (the CLI) use this; tests catch the concrete types.
struct SimError : std::runtime_error {
    explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

// isa
struct EncodingError : SimError { using SimError::SimError; };
struct IllegalInstruction : SimError { using SimError::SimError; };
struct AssemblyError : SimError {
    AssemblyError(int line, const std::string& msg)
        : SimError("line " + std::to_string(line) + ": " + msg), line(line) {}
    int line;
};

// configuration (machine config, CSR decode, run config)
struct ConfigError : SimError { using SimError::SimError; };

// dataflow planning
struct StrategyError : SimError { using SimError::SimError; };
struct ScheduleError : SimError { using SimError::SimError; };
struct LoweringError : SimError { using SimError::SimError; };

// memory system
struct MemoryFault : SimError { using SimError::SimError; };
struct VrfFault : SimError { using SimError::SimError; };
struct VrfPortConflict : SimError { using SimError::SimError; };

// machine execution
struct ExecutionError : SimError { using SimError::SimError; };
struct StateError : SimError { using SimError::SimError; };

// bench / baseline
struct UnsupportedPrecision : SimError { using SimError::SimError; };
struct SuiteNotFound : SimError { using SimError::SimError; };

}  // namespace speedsim

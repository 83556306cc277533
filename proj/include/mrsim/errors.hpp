#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mrsim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidParameter : Error { using Error::Error; };
struct EnvelopeUndersampled : Error { using Error::Error; };
struct TimingInfeasible : Error { using Error::Error; };
struct SpinBudgetExceeded : Error { using Error::Error; };
struct OutOfGrid : Error { using Error::Error; };
struct IncommensurateMoments : Error { using Error::Error; };
struct TrajectoryMismatch : Error { using Error::Error; };
struct FitDiverged : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

// Text-format errors carry a 1-based position.
struct ParseError : Error {
    ParseError(const std::string& msg, int line, int column)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + msg),
          line(line), column(column) {}
    int line;
    int column;
};

struct UnitError : ParseError {
    using ParseError::ParseError;
};

struct WorkerPanic : Error {
    WorkerPanic(std::size_t block, const std::string& what)
        : Error("worker failed on block " + std::to_string(block) + ": " + what), block(block) {}
    std::size_t block;
};

}  // namespace mrsim

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pacnr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

/// Malformed or truncated input file. `offset` is the byte position where parsing stopped.
struct ParseError : Error {
    ParseError(std::string path, std::uint64_t offset, const std::string& what)
        : Error(path + ": byte " + std::to_string(offset) + ": " + what), path(std::move(path)), offset(offset) {}
    std::string path;
    std::uint64_t offset;
};

struct IoError : Error {
    IoError(std::string path, const std::string& what) : Error(path + ": " + what), path(std::move(path)) {}
    std::string path;
};

struct DivergenceError : Error {
    DivergenceError(std::size_t epoch, double lr, const std::string& what)
        : Error("training diverged at epoch " + std::to_string(epoch) + " (learning rate " + std::to_string(lr) +
                "): " + what),
          epoch(epoch), learning_rate(lr) {}
    std::size_t epoch;
    double learning_rate;
};

}  // namespace pacnr

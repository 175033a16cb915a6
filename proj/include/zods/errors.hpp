#pragma once

#include <stdexcept>
#include <string>

namespace zods {

// Nonfinite values produced where finite ones are required.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged or violated a training-time contract.
class training_error : public std::runtime_error {
public:
    explicit training_error(const std::string& what) : std::runtime_error(what) {}
};

// A code path attempted something the black-box contract forbids.
class contract_violation : public std::logic_error {
public:
    explicit contract_violation(const std::string& what) : std::logic_error(what) {}
};

// Malformed on-disk artifact (dataset or checkpoint).
class format_error : public std::runtime_error {
public:
    format_error(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset(byte_offset) {}
    std::size_t offset;
};

// Bad configuration file or unknown key.
class config_error : public std::runtime_error {
public:
    config_error(const std::string& what, int line_number)
        : std::runtime_error("config line " + std::to_string(line_number) + ": " + what),
          line(line_number) {}
    explicit config_error(const std::string& what) : std::runtime_error(what), line(-1) {}
    int line;
};

} // namespace zods

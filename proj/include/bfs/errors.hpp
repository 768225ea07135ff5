#pragma once

#include <stdexcept>
#include <string>

namespace bfs {

// Base class for everything thrown by this library.
class error : public std::runtime_error {
public:
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid values or parameters; maps to the "numerical" exit class.
class domain_error : public error {
public:
    explicit domain_error(const std::string& msg) : error(msg) {}
};

// Input that is structurally valid but unusable (flat spectrum, empty set).
class degenerate_input_error : public domain_error {
public:
    explicit degenerate_input_error(const std::string& msg) : domain_error(msg) {}
};

// Spectrum does not match the grid a model was trained on.
class grid_contract_error : public domain_error {
public:
    explicit grid_contract_error(const std::string& msg) : domain_error(msg) {}
};

// File and format problems; maps to the "data" exit class.
class data_error : public error {
public:
    explicit data_error(const std::string& msg) : error(msg) {}
};

class bad_magic_error : public data_error {
public:
    explicit bad_magic_error(const std::string& msg) : data_error(msg) {}
};

class truncated_file_error : public data_error {
public:
    explicit truncated_file_error(const std::string& msg) : data_error(msg) {}
};

class dimension_error : public data_error {
public:
    explicit dimension_error(const std::string& msg) : data_error(msg) {}
};

// Bad run configuration (seed collisions, inconsistent flags); usage exit class.
class config_error : public error {
public:
    explicit config_error(const std::string& msg) : error(msg) {}
};

// Conditions the caller may choose to tolerate (e.g. an SNR estimation region
// that brushes the peak). Thrown like any error; catchable separately.
class warning_error : public error {
public:
    explicit warning_error(const std::string& msg) : error(msg) {}
};

} // namespace bfs

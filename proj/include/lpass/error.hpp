#pragma once

#include <stdexcept>
#include <string>

namespace lpass {

// All recoverable failures in the toolkit surface as this type; the CLI
// turns it into a single diagnostic line and a nonzero exit status.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace lpass

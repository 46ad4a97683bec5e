#pragma once

#include <stdexcept>
#include <string>

namespace pesa {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Writes to "<path>.tmp" then renames, so readers never observe partial files.
void atomic_write_file(const std::string& path, const std::string& bytes);

std::string read_file(const std::string& path);

}  // namespace pesa

#pragma once

#include <stdexcept>
#include <string>

namespace graphloc {

// Single exception type for every contract violation in the library. The
// message always names the offending entity (node id, edge, file, parameter).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace graphloc

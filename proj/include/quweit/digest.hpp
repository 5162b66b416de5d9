#pragma once

#include <string>

namespace quweit {

/// SHA-256 of a byte string, as lowercase hex.
std::string sha256_hex(const std::string& payload);

}  // namespace quweit

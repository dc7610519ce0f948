#ifndef ODIP_CORE_HASH_H_
#define ODIP_CORE_HASH_H_

#include <cstdint>
#include <string>
#include <string_view>

namespace odip {

// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::string_view data);

// Fixed-width lowercase hex, 16 digits.
std::string HexDigest(std::uint64_t value);

}  // namespace odip

#endif  // ODIP_CORE_HASH_H_

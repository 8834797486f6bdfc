#ifndef ACLEARN_TYPES_HPP
#define ACLEARN_TYPES_HPP

#include <cstdint>
#include <limits>

namespace aclearn {

using VarId = std::uint32_t;
using ValueIndex = std::uint32_t;
using NodeId = std::uint32_t;
// Identifier of one multinomial leaf distribution of some decision-tree CPD.
using DistId = std::uint32_t;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

// Value masks are 64-bit words, so a variable has at most 64 states.
inline constexpr std::uint32_t kMaxArity = 64;

}  // namespace aclearn

#endif  // ACLEARN_TYPES_HPP

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qsense {

using NodeId = int;      // 0-based node index
using SlotId = int;      // 0-based chunk slot within a node
using ChunkId = int;     // global code-chunk identity, 0..N*alpha-1
using RequestId = std::uint64_t;

/// Physical chunk coordinate (node i, slot j). Footprints use global
/// ChunkId; the placement map ties the two together.
struct ChunkRef {
    NodeId node = -1;
    SlotId slot = -1;

    friend auto operator<=>(const ChunkRef&, const ChunkRef&) = default;
};

enum class ReqKind { Read, Write, Repair };

inline const char* to_string(ReqKind k) {
    switch (k) {
    case ReqKind::Read: return "read";
    case ReqKind::Write: return "write";
    case ReqKind::Repair: return "repair";
    }
    return "?";
}

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Validation / configuration errors (CLI exit code 2).
struct ParamViolation : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct CapacityExceeded : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct UnstableQueue : Error { using Error::Error; };
struct NonPositiveRate : Error { using Error::Error; };
struct IndexOutOfRange : Error { using Error::Error; };
struct Unplaced : Error { using Error::Error; };

// Protocol-internal violations: these signal a coordinator bug, not bad
// input (CLI exit code 1).
struct IllegalLock : Error { using Error::Error; };
struct NotHeld : Error { using Error::Error; };
struct DuplicateVote : Error { using Error::Error; };
struct UnknownRequest : Error { using Error::Error; };

} // namespace qsense

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qsense/common.hpp"

namespace qsense {

/// Regenerating-code parameters. A file is split into k native chunks,
/// encoded into code chunks stored alpha per node across N nodes; a failed
/// node is rebuilt from beta chunks of each of d helpers; one file update
/// changes q code chunks.
struct CodeParams {
    int N = 0;       ///< node count
    int n = 0;       ///< code-chunk count claimed by the code
    int k = 0;       ///< reconstruction degree
    int d = 0;       ///< repair degree
    int alpha = 0;   ///< chunks stored per node
    int beta = 0;    ///< chunks downloaded per helper node
    int q = 0;       ///< chunks updated per file change
    std::optional<std::uint64_t> file_size_M;  ///< bytes, metadata only

    /// Total chunk count; the authoritative storage size.
    int total_chunks() const { return N * alpha; }
};

/// Quorum sizes in chunk votes: a request may execute once it has
/// collected this many votes.
struct QuorumValues {
    int r = 0;    ///< read quorum
    int w = 0;    ///< write quorum
    int rep = 0;  ///< repair quorum
};

/// Gifford-style exclusion diagnostics. The regenerating-code quorums need
/// not satisfy these classical constraints; this is informational only.
struct GiffordReport {
    long long r = 0;
    long long w = 0;
    long long total_votes = 0;
    bool read_write_exclusion = false;  ///< r + w > total
    bool write_write_exclusion = false; ///< 2w > total
};

/// Which code chunks change when a native chunk changes: one row per
/// native chunk, each row a nonempty sorted subset of {0..N*alpha-1}.
class FootprintMatrix {
public:
    /// Every row is every chunk (any file change touches all storage).
    static FootprintMatrix dense(const CodeParams& p);

    /// Each row is q distinct chunks drawn uniformly; deterministic for a
    /// fixed seed.
    static FootprintMatrix uniform_random(const CodeParams& p, std::uint64_t seed);

    /// Caller-supplied rows; validated against p.
    static FootprintMatrix explicit_rows(const CodeParams& p,
                                         std::vector<std::vector<ChunkId>> rows);

    int native_count() const { return static_cast<int>(rows_.size()); }
    int chunk_count() const { return chunk_count_; }

    const std::vector<ChunkId>& row(int native_idx) const;

    const std::vector<std::vector<ChunkId>>& rows() const { return rows_; }

    void write_csv(std::ostream& out) const;
    static FootprintMatrix read_csv(const CodeParams& p, std::istream& in);

private:
    FootprintMatrix(std::vector<std::vector<ChunkId>> rows, int chunk_count);

    std::vector<std::vector<ChunkId>> rows_;
    int chunk_count_ = 0;
};

/// Returns p unchanged if every invariant holds, otherwise throws
/// ParamViolation naming the violated inequality.
CodeParams validate_params(const CodeParams& p);

/// r = k*alpha (all chunks of any k nodes), w = q, rep = d*beta.
QuorumValues quorum_values(const CodeParams& p);

/// Evaluates the classical r+w>N and 2w>N constraints against the given
/// total vote count.
GiffordReport gifford_check(const QuorumValues& qv, long long total_votes);

} // namespace qsense

#include "qsense/code_model.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "qsense/rng.hpp"

namespace qsense {

CodeParams validate_params(const CodeParams& p) {
    auto fail = [](const std::string& ineq) {
        throw ParamViolation("code parameter violation: " + ineq);
    };
    if (!(0 < p.k)) fail("0 < k");
    if (!(p.k < p.n)) fail("k < n");
    if (!(p.k <= p.d)) fail("k <= d");
    if (!(p.d < p.N)) fail("d < N");
    if (!(0 < p.beta)) fail("0 < beta");
    if (!(p.beta <= p.alpha)) fail("beta <= alpha");
    if (!(0 < p.q)) fail("0 < q");
    if (!(p.q <= p.N * p.alpha)) fail("q <= N*alpha");
    if (p.alpha == 1 && p.n != p.N) fail("n = N when alpha = 1");
    return p;
}

QuorumValues quorum_values(const CodeParams& p) {
    return QuorumValues{p.k * p.alpha, p.q, p.d * p.beta};
}

GiffordReport gifford_check(const QuorumValues& qv, long long total_votes) {
    GiffordReport rep;
    rep.r = qv.r;
    rep.w = qv.w;
    rep.total_votes = total_votes;
    rep.read_write_exclusion = rep.r + rep.w > total_votes;
    rep.write_write_exclusion = 2 * rep.w > total_votes;
    return rep;
}

FootprintMatrix::FootprintMatrix(std::vector<std::vector<ChunkId>> rows, int chunk_count)
    : rows_(std::move(rows)), chunk_count_(chunk_count) {}

FootprintMatrix FootprintMatrix::dense(const CodeParams& p) {
    const int c = p.total_chunks();
    std::vector<ChunkId> all(c);
    std::iota(all.begin(), all.end(), 0);
    return FootprintMatrix(std::vector<std::vector<ChunkId>>(p.k, all), c);
}

FootprintMatrix FootprintMatrix::uniform_random(const CodeParams& p, std::uint64_t seed) {
    const int c = p.total_chunks();
    RngStream rng(seed, static_cast<std::uint64_t>(Stream::Footprint));
    std::vector<std::vector<ChunkId>> rows;
    rows.reserve(p.k);
    std::vector<ChunkId> pool(c);
    for (int u = 0; u < p.k; ++u) {
        std::iota(pool.begin(), pool.end(), 0);
        // partial Fisher-Yates: first q entries become the row
        for (int i = 0; i < p.q; ++i) {
            const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(c - i)));
            std::swap(pool[i], pool[j]);
        }
        std::vector<ChunkId> row(pool.begin(), pool.begin() + p.q);
        std::sort(row.begin(), row.end());
        rows.push_back(std::move(row));
    }
    return FootprintMatrix(std::move(rows), c);
}

FootprintMatrix FootprintMatrix::explicit_rows(const CodeParams& p,
                                               std::vector<std::vector<ChunkId>> rows) {
    const int c = p.total_chunks();
    if (static_cast<int>(rows.size()) != p.k) {
        throw ParamViolation("footprint must have exactly k = " + std::to_string(p.k) +
                             " rows, got " + std::to_string(rows.size()));
    }
    for (auto& row : rows) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        if (row.empty()) throw ParamViolation("footprint row must be nonempty");
        if (row.front() < 0 || row.back() >= c) {
            throw ParamViolation("footprint chunk id out of range 0.." + std::to_string(c - 1));
        }
    }
    return FootprintMatrix(std::move(rows), c);
}

const std::vector<ChunkId>& FootprintMatrix::row(int native_idx) const {
    if (native_idx < 0 || native_idx >= native_count()) {
        throw IndexOutOfRange("native chunk index " + std::to_string(native_idx) +
                              " out of range 0.." + std::to_string(native_count() - 1));
    }
    return rows_[static_cast<std::size_t>(native_idx)];
}

void FootprintMatrix::write_csv(std::ostream& out) const {
    out << "# qsense-footprint v1\n";
    out << "native,chunks...\n";
    for (int u = 0; u < native_count(); ++u) {
        out << u;
        for (ChunkId c : rows_[static_cast<std::size_t>(u)]) out << ',' << c;
        out << '\n';
    }
}

FootprintMatrix FootprintMatrix::read_csv(const CodeParams& p, std::istream& in) {
    std::vector<std::vector<ChunkId>> rows(static_cast<std::size_t>(p.k));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("native,", 0) == 0) continue;
        std::istringstream ss(line);
        std::string field;
        if (!std::getline(ss, field, ',')) continue;
        const int u = std::stoi(field);
        if (u < 0 || u >= p.k) {
            throw ParamViolation("footprint csv: native index " + field +
                                 " out of range 0.." + std::to_string(p.k - 1));
        }
        std::vector<ChunkId> row;
        while (std::getline(ss, field, ',')) row.push_back(std::stoi(field));
        rows[static_cast<std::size_t>(u)] = std::move(row);
    }
    return explicit_rows(p, std::move(rows));
}

} // namespace qsense

#include "qsense/trace.hpp"

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace qsense {

namespace {
constexpr std::array<const char*, 16> kNames = {
    "arrival", "solicit", "vote",   "deny",    "grant",    "stale",
    "start",   "complete", "release", "cancel", "promote", "demote",
    "deadlock", "bits",   "starve", "wdt",
};
}

const char* to_string(TraceEvent ev) { return kNames[static_cast<std::size_t>(ev)]; }

TraceEvent trace_event_from(const std::string& s) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (s == kNames[i]) return static_cast<TraceEvent>(i);
    }
    throw ConfigError("unknown trace event '" + s + "'");
}

std::string format_double(double v) {
    // shortest round-trip formatting keeps files byte-stable across runs
    std::array<char, 32> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), p);
}

void write_trace_row(std::ostream& out, const TraceRow& r) {
    out << format_double(r.time) << ',' << to_string(r.event) << ',';
    if (r.has_request) out << r.request;
    out << ',';
    if (r.has_kind) out << to_string(r.kind);
    out << ',';
    if (r.node >= 0) out << r.node;
    out << ',';
    if (r.slot >= 0) out << r.slot;
    out << ',' << r.detail << '\n';
}

CsvSink::CsvSink(std::ostream& out) : out_(out) {
    out_ << "# qsense-trace v1\n";
    out_ << "time,event,request,kind,node,chunk,detail\n";
}

void CsvSink::row(const TraceRow& r) {
    ++count_;
    write_trace_row(out_, r);
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
    std::vector<TraceRow> rows;
    std::string line;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# qsense-trace", 0) == 0) saw_header = true;
            continue;
        }
        if (line.rfind("time,", 0) == 0) continue;
        std::istringstream ss(line);
        std::array<std::string, 7> f;
        for (std::size_t i = 0; i < 6; ++i) {
            if (!std::getline(ss, f[i], ',')) {
                throw ConfigError("malformed trace row: " + line);
            }
        }
        std::getline(ss, f[6]);  // detail may be empty
        TraceRow r;
        r.time = std::stod(f[0]);
        r.event = trace_event_from(f[1]);
        r.has_request = !f[2].empty();
        if (r.has_request) r.request = std::stoull(f[2]);
        r.has_kind = !f[3].empty();
        if (r.has_kind) {
            if (f[3] == "read") r.kind = ReqKind::Read;
            else if (f[3] == "write") r.kind = ReqKind::Write;
            else if (f[3] == "repair") r.kind = ReqKind::Repair;
            else throw ConfigError("unknown request kind '" + f[3] + "'");
        }
        r.node = f[4].empty() ? -1 : std::stoi(f[4]);
        r.slot = f[5].empty() ? -1 : std::stoi(f[5]);
        r.detail = f[6];
        rows.push_back(std::move(r));
    }
    if (!saw_header && !rows.empty()) {
        throw ConfigError("trace file lacks the qsense-trace schema header");
    }
    return rows;
}

} // namespace qsense

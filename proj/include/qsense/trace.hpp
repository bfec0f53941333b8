#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsense/common.hpp"

namespace qsense {

enum class TraceEvent {
    Arrival,
    Solicit,
    Vote,
    Deny,
    Grant,
    Stale,
    Start,
    Complete,
    Release,
    Cancel,
    Promote,
    Demote,
    Deadlock,
    Bits,
    Starve,
    Wdt,
};

const char* to_string(TraceEvent ev);
TraceEvent trace_event_from(const std::string& s);

/// One row of the trace CSV: time,event,request,kind,node,chunk,detail.
/// node/chunk are -1 when not applicable; detail is ';'-separated k=v.
struct TraceRow {
    double time = 0.0;
    TraceEvent event = TraceEvent::Arrival;
    RequestId request = 0;
    bool has_request = true;
    ReqKind kind = ReqKind::Read;
    bool has_kind = true;
    NodeId node = -1;
    SlotId slot = -1;
    std::string detail;
};

class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void row(const TraceRow& r) = 0;
    std::uint64_t rows_written() const { return count_; }

protected:
    std::uint64_t count_ = 0;
};

class NullSink final : public TraceSink {
public:
    void row(const TraceRow&) override { ++count_; }
};

class MemorySink final : public TraceSink {
public:
    void row(const TraceRow& r) override {
        ++count_;
        rows.push_back(r);
    }
    std::vector<TraceRow> rows;
};

/// Streams rows as CSV with a schema-version header.
class CsvSink final : public TraceSink {
public:
    explicit CsvSink(std::ostream& out);
    void row(const TraceRow& r) override;

private:
    std::ostream& out_;
};

std::string format_double(double v);
void write_trace_row(std::ostream& out, const TraceRow& r);
std::vector<TraceRow> read_trace_csv(std::istream& in);

} // namespace qsense

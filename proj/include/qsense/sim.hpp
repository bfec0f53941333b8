#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qsense/code_model.hpp"
#include "qsense/common.hpp"
#include "qsense/coordinator.hpp"
#include "qsense/placement.hpp"
#include "qsense/rng.hpp"
#include "qsense/routing.hpp"
#include "qsense/scheduler.hpp"
#include "qsense/trace.hpp"

namespace qsense {

/// Poisson arrival / exponential service rates (requests per unit time).
struct WorkloadParams {
    double lambda_r = 0.0;
    double lambda_w = 0.0;
    double lambda_rep = 0.0;  ///< optional extension stream, default off
    double mu_r = 1.0;
    double mu_w = 1.0;

    void validate() const {
        if (lambda_r < 0 || lambda_w < 0 || lambda_rep < 0) {
            throw ParamViolation("arrival rates must be >= 0");
        }
        if (mu_r <= 0 || mu_w <= 0) {
            throw ParamViolation("completion rates must be > 0");
        }
    }
};

/// One entry of a scripted scenario: deterministic arrivals, manual vote
/// grants (for engineering specific interleavings), and activation.
struct ScriptOp {
    enum class Kind { Read, Write, Repair, Grant, Activate };
    double time = 0.0;
    Kind kind = Kind::Read;
    int native = -1;                            ///< write: native chunk
    std::optional<std::vector<NodeId>> nodes;   ///< read: forced targets
    bool manual = false;                        ///< arrive without soliciting
    int ref = -1;     ///< grant/activate: index into script-created requests
    NodeId node = -1; ///< grant: node
    SlotId slot = -1; ///< grant: slot, -1 = every slot of the node
};

struct SimConfig {
    CodeParams code;

    enum class FootprintMode { Dense, Uniform, Explicit };
    FootprintMode footprint_mode = FootprintMode::Dense;
    std::uint64_t footprint_seed = 0;
    std::vector<std::vector<ChunkId>> footprint_rows;  ///< Explicit mode

    enum class TopoShape { Path, Ring, Explicit };
    TopoShape topo_shape = TopoShape::Path;
    std::vector<std::pair<NodeId, NodeId>> topo_edges;

    SlotPolicy slot_policy;
    DeadlockConfig deadlock;
    WorkloadParams workload;

    double message_delay = 0.0;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    bool integrity_checks = false;  ///< full cross-check after every event
    std::vector<ScriptOp> script;

    FootprintMatrix make_footprint() const;
    Topology make_topology() const;
};

/// Everything measured during a run. Derived incrementally from the trace
/// row stream, so replaying a stored trace reproduces it exactly.
struct Metrics {
    std::uint64_t arrivals[3] = {0, 0, 0};      // by ReqKind
    std::uint64_t completions[3] = {0, 0, 0};
    double latency_sum[3] = {0, 0, 0};
    std::uint64_t demotions = 0;
    std::uint64_t deadlock_rounds = 0;
    std::uint64_t stale_votes = 0;
    std::uint64_t denials = 0;
    std::uint64_t starvations = 0;
    std::uint64_t grants = 0;
    std::uint64_t releases = 0;
    double end_time = 0.0;
    std::map<int, double> in_system_time;  ///< n -> total time at n in system

    std::map<int, double> in_system_pmf() const;
    double mean_latency(ReqKind k) const;

    /// Flat name -> value table, sorted by name (CSV emission order).
    std::map<std::string, double> rows() const;
    void write_csv(std::ostream& out) const;
};

/// Trace-row decorator that accumulates Metrics while forwarding rows.
class MetricsSink final : public TraceSink {
public:
    explicit MetricsSink(TraceSink& inner) : inner_(&inner) {}
    void row(const TraceRow& r) override;
    const Metrics& metrics() const { return metrics_; }
    Metrics take() { return std::move(metrics_); }

private:
    TraceSink* inner_;
    Metrics metrics_;
    std::map<RequestId, double> open_arrivals_;
    int in_system_ = 0;
    double last_change_ = 0.0;
};

/// Rebuilds Metrics from a stored trace; identical to the live metrics of
/// the run that produced it.
Metrics metrics_from_trace(const std::vector<TraceRow>& rows);

/// Places any chunk id in 0..total-1 that the greedy assignment left out
/// (chunks outside every footprint group) into the free slots, in order.
void complete_placement(PlacementMap& pm, int total_chunks);

/// Runs the full discrete-event simulation. Deterministic: identical
/// (config, seed) inputs give identical trace row streams.
Metrics run_simulation(const SimConfig& cfg, TraceSink& sink);

/// Empirical completion experiment behind Figure 5: N0 backlogged
/// requests, no arrivals, service rate mu; pmf[m][ti] estimates the
/// probability that m requests remain at t_grid[ti].
struct BacklogResult {
    std::vector<double> t_grid;
    std::vector<std::vector<double>> pmf;  // (N0+1) x |t_grid|
    int replications = 0;
};
BacklogResult backlog_experiment(int N0, double mu, const std::vector<double>& t_grid,
                                 int replications, std::uint64_t seed);

/// Exponential inter-arrival sample; the building block of the Poisson
/// arrival streams.
double sample_interarrival(double rate, RngStream& rng);

} // namespace qsense

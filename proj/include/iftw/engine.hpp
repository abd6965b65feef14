#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "iftw/block_table.hpp"
#include "iftw/geometry.hpp"
#include "iftw/messages.hpp"
#include "iftw/protocol.hpp"

namespace iftw {

struct NonTermination : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Deterministic event queue: events pop in (time, lane, insertion seq)
/// order. Lane 0 is reserved for slot boundaries so that deliveries of a
/// finished slot always settle before protocol timers stamped on the same
/// tick.
class EventQueue {
  public:
    void schedule(std::int64_t t, std::function<void()> fn, int lane = 1);
    /// Runs every event with time <= t. Returns the number processed.
    std::size_t run_until(std::int64_t t);
    bool empty() const { return heap_.empty(); }
    std::int64_t now() const { return clock_; }

  private:
    struct Ev {
        std::int64_t t;
        int lane;
        std::uint64_t seq;
        std::shared_ptr<std::function<void()>> fn;
        bool operator>(const Ev& o) const {
            if (t != o.t) return t > o.t;
            if (lane != o.lane) return lane > o.lane;
            return seq > o.seq;
        }
    };
    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> heap_;
    std::int64_t clock_ = 0;
    std::uint64_t next_seq_ = 0;
};

struct TraceRecord {
    std::int64_t time = 0;
    int node = -1;  // -1: engine-level record
    std::string phase;
    std::string action;
    std::string detail;

    bool operator==(const TraceRecord&) const = default;
};

/// Append-only run log. One record per line, tab separated:
/// time, node, phase, action, detail.
struct Trace {
    std::vector<TraceRecord> records;

    std::string to_tsv() const;
    static Trace from_tsv(const std::string& text);
};

enum class NodePhase { Normal, Preparing, Detecting, Reconfiguring, Idle };

std::string to_string(NodePhase p);

struct AntennaView {
    bool omni = false;
    int aligned_to = -1;
    bool emitting = false;
};

struct DeliveryDecision {
    int receiver = -1;
    bool delivered = false;
    std::string reason;
};

/// Channel rule: a directional message reaches its target iff the segment is
/// unblocked and the target is omni or aligned to the sender; a multicast
/// reaches every node within three indices under the same segment and
/// antenna gates. Non-delivery is an outcome, not an error.
std::vector<DeliveryDecision> deliver(
    const Message& msg, const Topology& topo,
    const std::vector<Obstacle>& active_obstacles,
    const std::map<int, AntennaView>& antennas);

enum class Outcome { NoBlockage, Recovered, Unreachable, NonTermination };

std::string to_string(Outcome o);

/// One leader's pass through the protocol (a run can contain several when
/// deferred leaders restart).
struct BtdRound {
    int leader = -1;
    std::int64_t t0 = 0;
    std::int64_t npt = 0;
    std::int64_t std_tick = 0;
    std::int64_t dtl = 0;
    std::optional<std::int64_t> classify_tick;
    BlockageVerdict detected;
    std::optional<PrmPayload> prm;
    bool deferred = false;
};

struct ScenarioResult {
    Outcome outcome = Outcome::NoBlockage;
    std::vector<BtdRound> rounds;
    BlockageVerdict oracle;
    std::optional<std::int64_t> recovery_tick;
    bool agreement = true;
    std::vector<int> idle_nodes;
    std::vector<int> final_chain;
    std::int64_t end_tick = 0;

    std::optional<std::int64_t> first_onset() const;
    /// Typed entries across all rounds, the protocol side of the agreement
    /// comparison.
    std::vector<std::pair<BlockageType, int>> detected_typed() const;
};

struct SimOptions {
    bool record_trace = false;
    std::optional<std::int64_t> deadline_ticks;  // absolute override
};

class Simulation {
  public:
    Simulation(const TopologyConfig& cfg, std::vector<Obstacle> obstacles,
               SimOptions opts = {});
    ~Simulation();
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    ScenarioResult run();
    const Trace& trace() const;
    const Topology& topology() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ScenarioResult run_scenario(const TopologyConfig& cfg, const Obstacle& obs,
                            SimOptions opts = {});

}  // namespace iftw

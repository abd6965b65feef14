#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "iftw/block_table.hpp"
#include "iftw/geometry.hpp"
#include "iftw/messages.hpp"

namespace iftw {

struct IndexOutOfRange : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct InconsistentTable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Nodes preparation time for leader k in an N-node chain, in ticks.
/// Case split: the two base stations' ends collapse to one-sided waits.
std::int64_t compute_npt(int k, int n_nodes, std::int64_t slot_ticks);

enum class SlotReply { Ack, Nack };

/// Transmitter-side blockage onset for one data slot: silence or three
/// consecutive NACKs without a success mean the link failed; the onset time
/// is the end of the slot. At most 1 + 2 retransmissions are considered.
std::optional<std::int64_t> detect_blockage_onset(
    const std::vector<SlotReply>& replies, std::int64_t slot_end);

enum class PrepReceptionKind { Data, Lus, Lbs, Null };

struct PrepReception {
    std::int64_t at = 0;  // slot end tick
    PrepReceptionKind kind = PrepReceptionKind::Null;
};

struct PrevLinkDecision {
    std::vector<std::pair<Link, LinkStatus>> statuses;
    bool defer = false;
    std::int64_t defer_at = 0;
    // When deferring, one of these two upstream links is down.
    std::vector<Link> suspect_pair;
};

/// Table-driven inference over what the leader heard from its upstream
/// neighbour during the preparation wait. `upstream_links` is the chain seen
/// leftwards from the leader, nearest first. Row r closes at t0 + (2r-1)
/// slots: data/LUS clears the next two upstream links, the first silence or
/// LBS marks one of them down and defers leadership.
PrevLinkDecision decide_previous_links(const std::vector<PrepReception>& rx,
                                       std::int64_t t0, std::int64_t slot_ticks,
                                       const std::vector<Link>& upstream_links);

std::int64_t default_dtl(std::int64_t delta, std::int64_t control_slot_ticks);

/// Assemble the detection-preparation payload for leader k. Windows follow
/// the fixed participant order [k, k-2, k-1, k+1, k+2, k+3] restricted to
/// existing nodes; dropped participants shift later windows earlier.
BtdpPayload make_btdp(int k, std::int64_t t0, std::int64_t npt,
                      std::int64_t control_slot_ticks, std::int64_t delta,
                      std::int64_t dtl, const Topology& topo);

enum class ProbeRole { Alternates, TxLinks };

/// Links a participant probes in its window, ascending by target:
/// the leader and left nodes probe their diagonal alternates, right nodes
/// probe every outgoing link.
std::vector<Link> probe_set(int node, ProbeRole role, const Topology& topo);

/// How many probe handshakes fit in one window. Each handshake occupies four
/// control slots; one control slot at the end of the window is reserved for
/// the table multicast.
int window_probe_capacity(std::int64_t delta, std::int64_t control_slot_ticks);

/// Right-node rule: a node whose probed outgoing links all failed marks every
/// inbound candidate into itself as blocked. Returns the links it reset.
std::vector<Link> reset_inbound_candidates(BlockLinkTable& table, int node,
                                           const Topology& topo);

/// End-of-detection classification from the merged table of region k.
/// Unchecked entries count as blocked. Throws InconsistentTable if the
/// table claims the onset link itself is clear.
BlockageVerdict classify_from_table(const BlockLinkTable& table, int k,
                                    const Topology& topo);

struct PathSelection {
    std::optional<PrmPayload> prm;
    /// Node forced idle by the verdict (type IV) or by unreachability.
    std::optional<int> idle_node;
};

/// Pick the substitute link: among clear links spanning the blocked cut and
/// avoiding any type-IV node, minimise the skipped span, then prefer the
/// source closest to the leader. Rescheduling entries appear when an
/// even-span substitute flips downstream transmit slots.
PathSelection select_path(const BlockLinkTable& table, int k,
                          const BlockageVerdict& verdict, const Topology& topo,
                          std::int64_t std_tick);

}  // namespace iftw

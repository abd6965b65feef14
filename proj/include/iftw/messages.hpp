#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iftw/block_table.hpp"
#include "iftw/geometry.hpp"

namespace iftw {

/// Detection order: one probing window per participant, disjoint, all of
/// length `interval`, in the fixed order leader, left nodes, right nodes.
struct DetectionOrder {
    std::vector<std::pair<int, std::int64_t>> windows;  // (node, start tick)
    std::int64_t interval = 0;

    std::optional<std::int64_t> window_start(int node) const;
    std::int64_t last_window_end() const;
};

/// Payload of the detection-preparation message: who leads, which link
/// failed, when detection starts, how long it runs, and the probing order.
struct BtdpPayload {
    int nid = -1;            // leader index
    Link blid;               // blocked original link
    std::int64_t std_tick = 0;
    std::int64_t dtl = 0;
    DetectionOrder order;
};

/// Path reconfiguration: the substitute link(s) plus new transmit slots for
/// nodes whose schedule the substitution breaks.
struct PrmPayload {
    std::vector<Link> new_path;
    std::optional<std::vector<std::pair<int, int>>> reschedule;
    int nid = -1;             // issuing leader, dedup key with std_tick
    std::int64_t std_tick = 0;

    std::pair<int, std::int64_t> dedup_key() const { return {nid, std_tick}; }
};

enum class MsgKind { Data, Ack, Nack, Sts, Lus, Lbs, Btdp, Ds, Prm, TableShare };

std::string to_string(MsgKind k);

/// Stop-transmit notice carried piggyback: which original link failed and
/// when its leader observed the failure.
struct StsInfo {
    int origin_k = -1;
    std::int64_t t0 = 0;
    bool operator==(const StsInfo&) const = default;
};

constexpr int kMulticast = -1;

struct Message {
    MsgKind kind = MsgKind::Data;
    int from = -1;
    int to = kMulticast;
    bool directional = true;

    std::int64_t seq = 0;                       // Data
    MsgKind ack_of = MsgKind::Data;             // Ack/Nack
    std::optional<StsInfo> sts;                 // piggyback
    std::shared_ptr<const BtdpPayload> btdp;    // Btdp, TableShare
    std::shared_ptr<const BlockLinkTable> table;  // TableShare
    std::shared_ptr<const PrmPayload> prm;      // Prm

    std::string describe() const;
};

}  // namespace iftw

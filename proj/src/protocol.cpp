#include "iftw/protocol.hpp"

#include <algorithm>
#include <set>

namespace iftw {

std::int64_t compute_npt(int k, int n_nodes, std::int64_t slot_ticks) {
    if (n_nodes < 2) throw IndexOutOfRange("need at least two nodes");
    if (k < 0 || k >= n_nodes) throw IndexOutOfRange("node index out of range");
    const std::int64_t left = (k + 1) / 2 * 2 - 1;  // ceil(k/2)*2 - 1
    if (k == 0) return static_cast<std::int64_t>(n_nodes - 2) * slot_ticks;
    if (k >= n_nodes - 2) return left * slot_ticks;
    const std::int64_t right = n_nodes - k - 2;
    return std::max(left, right) * slot_ticks;
}

std::optional<std::int64_t> detect_blockage_onset(
    const std::vector<SlotReply>& replies, std::int64_t slot_end) {
    int attempts = 0;
    for (const SlotReply r : replies) {
        if (r == SlotReply::Ack) return std::nullopt;
        if (++attempts == 3) break;  // initial send plus two retransmissions
    }
    return slot_end;
}

PrevLinkDecision decide_previous_links(const std::vector<PrepReception>& rx,
                                       std::int64_t t0, std::int64_t slot_ticks,
                                       const std::vector<Link>& upstream_links) {
    PrevLinkDecision out;
    const int rows = (static_cast<int>(upstream_links.size()) + 1) / 2;
    for (int r = 1; r <= rows; ++r) {
        const std::int64_t at = t0 + (2 * r - 1) * slot_ticks;
        PrepReceptionKind kind = PrepReceptionKind::Null;
        for (const auto& e : rx)
            if (e.at == at) kind = e.kind;

        std::vector<Link> pair;
        for (int i = 2 * r - 2; i < 2 * r; ++i)
            if (i < static_cast<int>(upstream_links.size()))
                pair.push_back(upstream_links[static_cast<size_t>(i)]);

        if (kind == PrepReceptionKind::Data || kind == PrepReceptionKind::Lus) {
            for (const Link& l : pair)
                out.statuses.emplace_back(l, LinkStatus::Clear);
        } else {
            out.defer = true;
            out.defer_at = at;
            out.suspect_pair = pair;
            return out;
        }
    }
    return out;
}

std::int64_t default_dtl(std::int64_t delta, std::int64_t control_slot_ticks) {
    return 6 * delta + 2 * control_slot_ticks;
}

BtdpPayload make_btdp(int k, std::int64_t t0, std::int64_t npt,
                      std::int64_t control_slot_ticks, std::int64_t delta,
                      std::int64_t dtl, const Topology& topo) {
    BtdpPayload p;
    p.nid = k;
    p.blid = Link{k, k + 1};
    p.std_tick = t0 + npt + 2 * control_slot_ticks;
    p.dtl = dtl;
    p.order.interval = delta;
    std::int64_t t = p.std_tick;
    for (int n : {k, k - 2, k - 1, k + 1, k + 2, k + 3}) {
        if (!topo.has_node(n)) continue;
        p.order.windows.emplace_back(n, t);
        t += delta;
    }
    return p;
}

std::vector<Link> probe_set(int node, ProbeRole role, const Topology& topo) {
    std::vector<Link> out;
    const int first = role == ProbeRole::TxLinks ? node + 1 : node + 2;
    for (int j = first; j <= node + 3; ++j)
        if (auto l = topo.link_between(node, j)) out.push_back(*l);
    return out;
}

int window_probe_capacity(std::int64_t delta, std::int64_t control_slot_ticks) {
    return static_cast<int>(delta / (4 * control_slot_ticks));
}

std::vector<Link> reset_inbound_candidates(BlockLinkTable& table, int node,
                                           const Topology& topo) {
    std::vector<Link> reset;
    for (int j = 1; j <= 3; ++j) {
        if (auto l = topo.link_between(node - j, node)) {
            table.set(*l, LinkStatus::Blocked);
            reset.push_back(*l);
        }
    }
    return reset;
}

BlockageVerdict classify_from_table(const BlockLinkTable& table, int k,
                                    const Topology& topo) {
    const Link original{k, k + 1};
    if (table.status(original) == LinkStatus::Clear)
        throw InconsistentTable("onset link recorded clear in block-link table");

    const RegionLinks rl = region_links(topo, k);
    auto blocked = [&](const Link& l) {
        return table.coerced_status(l) == LinkStatus::Blocked;
    };

    const bool iv_left =
        !rl.tx_alternates.empty() &&
        std::all_of(rl.tx_alternates.begin(), rl.tx_alternates.end(), blocked);
    const bool iv_right =
        !rl.rx_alternates.empty() &&
        std::all_of(rl.rx_alternates.begin(), rl.rx_alternates.end(), blocked);

    BlockageVerdict verdict;
    std::set<Link> claimed;
    auto emit = [&](BlockageType t, int node, std::vector<Link> links) {
        VerdictEntry e{t, node, {}};
        for (const Link& l : links)
            if (claimed.insert(l).second) e.evidence.push_back(l);
        verdict.entries.push_back(std::move(e));
    };

    if (iv_left) emit(BlockageType::IV, k, rl.tx_alternates);
    if (iv_right) emit(BlockageType::IV, k + 1, rl.rx_alternates);
    if (!iv_left && topo.has_link(k, k + 3) && blocked({k, k + 3}))
        emit(BlockageType::II, k, {{k, k + 3}});
    if (!iv_right && topo.has_link(k - 2, k + 1) && blocked({k - 2, k + 1}))
        emit(BlockageType::II, k + 1, {{k - 2, k + 1}});
    if (rl.crossing && blocked(*rl.crossing))
        emit(BlockageType::III, k, {*rl.crossing});
    if (verdict.entries.empty()) emit(BlockageType::I, k, {});

    verdict.entries.front().evidence.insert(
        verdict.entries.front().evidence.begin(), original);
    return verdict;
}

PathSelection select_path(const BlockLinkTable& table, int k,
                          const BlockageVerdict& verdict, const Topology& topo,
                          std::int64_t std_tick) {
    std::set<int> dead;
    for (const auto& e : verdict.entries)
        if (e.type == BlockageType::IV) dead.insert(e.affected_node);

    std::optional<Link> best;
    for (const auto& [l, s] : table.entries()) {
        if (s != LinkStatus::Clear) continue;
        if (l.kind() == LinkKind::Original) continue;
        if (!(l.from <= k && l.to >= k + 1)) continue;  // must span the cut
        if (dead.count(l.from) || dead.count(l.to)) continue;
        if (!best) {
            best = l;
            continue;
        }
        const int span = l.to - l.from, best_span = best->to - best->from;
        if (span < best_span || (span == best_span && l.from > best->from))
            best = l;
    }

    PathSelection out;
    for (const auto& e : verdict.entries)
        if (e.type == BlockageType::IV) out.idle_node = e.affected_node;

    if (!best) return out;  // unreachable: no clear substitute spans the cut

    PrmPayload prm;
    prm.nid = k;
    prm.std_tick = std_tick;
    prm.new_path = {*best};
    // An even-span substitute delivers into its far end on the same slot
    // parity that node used to transmit on; every node from there on flips.
    if ((best->to - best->from) % 2 == 0) {
        std::vector<std::pair<int, int>> res;
        for (int j = best->to; j < topo.node_count(); ++j)
            res.emplace_back(j, (j + 1) % 2);
        prm.reschedule = std::move(res);
    }
    out.prm = std::move(prm);
    return out;
}

}  // namespace iftw

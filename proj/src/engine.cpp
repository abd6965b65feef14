#include "iftw/engine.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace iftw {

void EventQueue::schedule(std::int64_t t, std::function<void()> fn, int lane) {
    heap_.push({t, lane, next_seq_++,
                std::make_shared<std::function<void()>>(std::move(fn))});
}

std::size_t EventQueue::run_until(std::int64_t t) {
    std::size_t n = 0;
    while (!heap_.empty() && heap_.top().t <= t) {
        Ev e = heap_.top();
        heap_.pop();
        clock_ = e.t;
        (*e.fn)();
        ++n;
    }
    return n;
}

std::string Trace::to_tsv() const {
    std::ostringstream os;
    for (const auto& r : records)
        os << r.time << '\t' << r.node << '\t' << r.phase << '\t' << r.action
           << '\t' << r.detail << '\n';
    return os.str();
}

Trace Trace::from_tsv(const std::string& text) {
    Trace t;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        TraceRecord r;
        std::size_t p0 = line.find('\t');
        std::size_t p1 = line.find('\t', p0 + 1);
        std::size_t p2 = line.find('\t', p1 + 1);
        std::size_t p3 = line.find('\t', p2 + 1);
        if (p0 == std::string::npos || p1 == std::string::npos ||
            p2 == std::string::npos || p3 == std::string::npos)
            throw std::runtime_error("malformed trace line: " + line);
        r.time = std::stoll(line.substr(0, p0));
        r.node = std::stoi(line.substr(p0 + 1, p1 - p0 - 1));
        r.phase = line.substr(p1 + 1, p2 - p1 - 1);
        r.action = line.substr(p2 + 1, p3 - p2 - 1);
        r.detail = line.substr(p3 + 1);
        t.records.push_back(std::move(r));
    }
    return t;
}

std::string to_string(NodePhase p) {
    switch (p) {
        case NodePhase::Normal: return "normal";
        case NodePhase::Preparing: return "preparing";
        case NodePhase::Detecting: return "detecting";
        case NodePhase::Reconfiguring: return "reconfiguring";
        case NodePhase::Idle: return "idle";
    }
    return "?";
}

std::string to_string(Outcome o) {
    switch (o) {
        case Outcome::NoBlockage: return "no_blockage";
        case Outcome::Recovered: return "recovered";
        case Outcome::Unreachable: return "unreachable";
        case Outcome::NonTermination: return "non_termination";
    }
    return "?";
}

namespace {

bool segment_clear(const Topology& topo, const Link& l,
                   const std::vector<Obstacle>& active) {
    for (const Obstacle& o : active)
        if (link_blocked(topo, l, o)) return false;
    return true;
}

bool hears(const AntennaView& a, int sender) {
    return a.omni || a.aligned_to == sender;
}

}  // namespace

std::vector<DeliveryDecision> deliver(
    const Message& msg, const Topology& topo,
    const std::vector<Obstacle>& active_obstacles,
    const std::map<int, AntennaView>& antennas) {
    std::vector<DeliveryDecision> out;
    auto consider = [&](int r) {
        DeliveryDecision d{r, false, ""};
        auto it = antennas.find(r);
        const AntennaView av = it == antennas.end() ? AntennaView{} : it->second;
        auto link = topo.link_between(msg.from, r);
        if (!link) {
            d.reason = "no_path";
        } else if (!segment_clear(topo, *link, active_obstacles)) {
            d.reason = "blocked";
        } else if (av.emitting) {
            d.reason = "busy";
        } else if (!hears(av, msg.from)) {
            d.reason = "deaf";
        } else {
            d.delivered = true;
        }
        out.push_back(std::move(d));
    };
    if (msg.to == kMulticast) {
        for (int r = msg.from - 3; r <= msg.from + 3; ++r)
            if (r != msg.from && topo.has_node(r)) consider(r);
    } else {
        consider(msg.to);
    }
    return out;
}

std::optional<std::int64_t> ScenarioResult::first_onset() const {
    if (rounds.empty()) return std::nullopt;
    std::int64_t t = rounds.front().t0;
    for (const auto& r : rounds) t = std::min(t, r.t0);
    return t;
}

std::vector<std::pair<BlockageType, int>> ScenarioResult::detected_typed()
    const {
    std::vector<std::pair<BlockageType, int>> out;
    for (const auto& r : rounds)
        for (const auto& e : r.detected.entries)
            out.emplace_back(e.type, e.affected_node);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Comparison key shared with the oracle side; duplicates collapse so that a
// type seen from two adjacent regions counts once.
static std::vector<std::pair<BlockageType, int>> unique_typed(
    const BlockageVerdict& v) {
    auto out = v.typed_set();
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// ---------------------------------------------------------------------------

struct Simulation::Impl {
    Topology topo;
    TopologyConfig cfg;
    std::vector<Obstacle> obstacles;
    SimOptions opts;

    EventQueue q;
    Trace trace;
    std::int64_t ts, tsp, delta;
    int n_nodes;

    struct SlotTx {
        int from, to;
        MsgKind kind;
        std::int64_t seq;
        std::optional<StsInfo> sts;
        bool delivered = false;
    };

    struct NodeRt {
        int idx = -1;
        NodePhase phase = NodePhase::Normal;
        bool omni = false;
        int aligned_to = -1;
        std::int64_t emitting_at = -1;

        bool stopped_data = false;
        bool idle = false;
        bool awaiting_refill = false;
        bool received_data = false;
        std::map<int, std::int64_t> known_sts;  // origin -> t0
        bool sts_forward_pending = false;
        int sts_forward_origin = -1;
        bool omni_after_slot = false;
        bool relay_lbs = false;

        bool have_fresh = false;
        std::int64_t fresh_seq = -1;
        std::int64_t next_seq = 0;

        std::optional<std::int64_t> onset_t0;
        int onset_epoch = 0;
        bool deferred = false;
        std::int64_t npt = 0;
        int round_idx = -1;
        struct PrepEntry {
            std::int64_t at;
            MsgKind kind;
            bool upstream_sts;
        };
        std::vector<PrepEntry> prep_log;

        std::vector<int> chain;
        int tx_parity = 0;

        std::shared_ptr<const BtdpPayload> sched;
        BlockLinkTable table;
        std::set<std::pair<int, std::int64_t>> sched_seen;
        std::set<std::pair<int, std::int64_t>> prm_seen;
        std::set<std::pair<int, std::int64_t>> remcast_done;
        std::set<std::pair<int, std::int64_t>> btdp_fwd_done;
        std::shared_ptr<const PrmPayload> prm;
        std::set<std::pair<int, std::int64_t>> fwd_left_done, fwd_right_done;

        int chain_pos() const {
            auto it = std::find(chain.begin(), chain.end(), idx);
            return it == chain.end() ? -1
                                     : static_cast<int>(it - chain.begin());
        }
        int chain_prev() const {
            const int p = chain_pos();
            return p > 0 ? chain[static_cast<size_t>(p - 1)] : -1;
        }
        int chain_next() const {
            const int p = chain_pos();
            return p >= 0 && p + 1 < static_cast<int>(chain.size())
                       ? chain[static_cast<size_t>(p + 1)]
                       : -1;
        }
        bool on_chain() const { return chain_pos() >= 0; }
    };

    std::vector<NodeRt> nodes;
    std::vector<SlotTx> slot_txs;
    std::int64_t cur_slot_start = 0;

    std::vector<BtdRound> rounds;
    std::vector<std::int64_t> sink_rx;
    std::int64_t horizon = 0;
    int onset_count = 0;
    bool overflow = false;

    Impl(const TopologyConfig& c, std::vector<Obstacle> obs, SimOptions o)
        : topo(build_topology(c)), cfg(c), obstacles(std::move(obs)), opts(o) {
        ts = cfg.slot_ticks;
        tsp = cfg.control_slot_ticks;
        delta = cfg.detection_interval_ticks;
        n_nodes = topo.node_count();
        nodes.resize(static_cast<size_t>(n_nodes));
        std::vector<int> full_chain;
        for (int i = 0; i < n_nodes; ++i) full_chain.push_back(i);
        for (int i = 0; i < n_nodes; ++i) {
            nodes[static_cast<size_t>(i)].idx = i;
            nodes[static_cast<size_t>(i)].chain = full_chain;
            nodes[static_cast<size_t>(i)].tx_parity = i % 2;
        }
    }

    NodeRt& nd(int i) { return nodes.at(static_cast<size_t>(i)); }

    // ---- trace helpers ----
    void rec(std::int64_t t, int node, const std::string& action,
             const std::string& detail) {
        if (!opts.record_trace) return;
        const std::string phase =
            node >= 0 ? to_string(nd(node).phase) : std::string("-");
        trace.records.push_back({t, node, phase, action, detail});
    }

    std::vector<Obstacle> active_obstacles(std::int64_t t) const {
        std::vector<Obstacle> out;
        for (const Obstacle& o : obstacles)
            if (o.appear_tick <= t) out.push_back(o);
        return out;
    }

    bool link_clear(const Link& l, std::int64_t t) const {
        return segment_clear(topo, l, active_obstacles(t));
    }

    std::map<int, AntennaView> antenna_views(std::int64_t now) const {
        std::map<int, AntennaView> out;
        for (const NodeRt& n : nodes)
            out[n.idx] = {n.omni, n.aligned_to, n.emitting_at == now};
        return out;
    }

    void set_omni(std::int64_t t, int i, bool omni) {
        NodeRt& n = nd(i);
        if (n.omni == omni) return;
        n.omni = omni;
        if (omni) n.aligned_to = -1;
        rec(t, i, "antenna", omni ? "omni" : "directional");
    }

    void align(std::int64_t t, int i, int target) {
        NodeRt& n = nd(i);
        n.omni = false;
        n.aligned_to = target;
        rec(t, i, "align", "N" + std::to_string(target));
    }

    // ---- control-plane messaging ----
    std::vector<DeliveryDecision> send_control(std::int64_t t,
                                               const Message& msg) {
        nd(msg.from).emitting_at = t;
        rec(t, msg.from, "emit", msg.describe());
        auto decisions = deliver(msg, topo, active_obstacles(t),
                                 antenna_views(t));
        for (const auto& d : decisions) {
            if (d.delivered)
                rec(t, d.receiver, "recv", msg.describe());
            else if (msg.to != kMulticast)
                rec(t, d.receiver, "drop", msg.describe() + " " + d.reason);
        }
        return decisions;
    }

    // ---- scheduling-state helpers ----
    std::int64_t default_deadline(std::int64_t t0, std::int64_t npt) const {
        return t0 + npt + 2 * tsp + default_dtl(delta, tsp) +
               (n_nodes + 2) * ts;
    }

    void extend_horizon(std::int64_t cand) {
        if (opts.deadline_ticks) return;  // fixed by caller
        horizon = std::max(horizon, cand);
    }

    // ---- STS adoption ----
    void adopt_sts(std::int64_t t, int i, const StsInfo& s) {
        NodeRt& n = nd(i);
        if (n.known_sts.count(s.origin_k)) return;
        n.known_sts[s.origin_k] = s.t0;
        rec(t, i, "sts", "origin=N" + std::to_string(s.origin_k));
        if (i < s.origin_k) {
            // Left of the blocked link: stop data, go omni, relay duty.
            n.stopped_data = true;
            if (n.phase == NodePhase::Normal) n.phase = NodePhase::Preparing;
            set_omni(t, i, true);
        } else if (i > s.origin_k) {
            if (n.onset_t0 && !n.deferred) return;  // own round in progress
            n.stopped_data = true;
            if (n.chain_next() >= 0 && !n.idle) {
                n.sts_forward_pending = true;
                n.sts_forward_origin = s.origin_k;
            } else {
                set_omni(t, i, true);
            }
            if (n.phase == NodePhase::Normal) n.phase = NodePhase::Preparing;
        }
    }

    // ---- onset (transmitter side) ----
    void onset(std::int64_t t, int i) {
        NodeRt& n = nd(i);
        ++onset_count;
        if (onset_count > 2 * n_nodes) {
            overflow = true;
            return;
        }
        n.onset_t0 = t;
        n.onset_epoch++;
        n.deferred = false;
        n.phase = NodePhase::Preparing;
        n.stopped_data = true;
        n.known_sts[i] = t;
        n.npt = compute_npt(i, n_nodes, ts);
        n.table = BlockLinkTable(topo, i);
        n.table.set({i, i + 1}, LinkStatus::Blocked);
        n.prep_log.clear();
        n.round_idx = static_cast<int>(rounds.size());
        rounds.push_back({i, t, n.npt, 0, 0, std::nullopt, {}, std::nullopt,
                          false});
        rec(t, i, "onset", to_string(Link{i, i + 1}) +
                               " npt=" + std::to_string(n.npt));

        const int epoch = n.onset_epoch;
        const auto upstream = upstream_links(n);
        const int rows = (static_cast<int>(upstream.size()) + 1) / 2;
        for (int r = 1; r <= rows; ++r) {
            const std::int64_t at = t + (2 * r - 1) * ts;
            q.schedule(at, [this, i, epoch, r, at] {
                prep_row(at, i, epoch, r);
            });
        }
        const std::int64_t done_at = t + n.npt;
        q.schedule(done_at, [this, i, epoch, done_at] {
            npt_done(done_at, i, epoch);
        });
        extend_horizon(default_deadline(t, n.npt));
    }

    std::vector<Link> upstream_links(const NodeRt& n) const {
        std::vector<Link> out;
        const auto& c = n.chain;
        int p = n.chain_pos();
        for (int j = p; j > 0; --j)
            out.push_back(
                {std::min(c[static_cast<size_t>(j - 1)], c[static_cast<size_t>(j)]),
                 std::max(c[static_cast<size_t>(j - 1)], c[static_cast<size_t>(j)])});
        return out;
    }

    void receiver_onset(std::int64_t t, int i, int prev) {
        NodeRt& n = nd(i);
        if (n.known_sts.count(prev)) return;
        rec(t, i, "onset_rx", to_string(Link{std::min(prev, i), std::max(prev, i)}));
        n.received_data = false;
        n.relay_lbs = true;
        adopt_sts(t, i, {prev, t});
    }

    // ---- preparation phase ----
    void prep_row(std::int64_t t, int i, int epoch, int row) {
        NodeRt& n = nd(i);
        if (n.onset_epoch != epoch || !n.onset_t0 || n.deferred) return;
        if (n.phase != NodePhase::Preparing) return;

        MsgKind kind = MsgKind::Nack;  // placeholder for "null"
        bool got = false, upstream_sts = false;
        for (const auto& e : n.prep_log)
            if (e.at == t) {
                kind = e.kind;
                got = true;
                upstream_sts = e.upstream_sts;
            }

        const auto upstream = upstream_links(n);
        std::vector<Link> pair;
        for (int j = 2 * row - 2; j < 2 * row; ++j)
            if (j < static_cast<int>(upstream.size()))
                pair.push_back(upstream[static_cast<size_t>(j)]);

        const bool ok = got && !upstream_sts &&
                        (kind == MsgKind::Data || kind == MsgKind::Lus);
        if (ok) {
            for (const Link& l : pair) {
                n.table.set(l, LinkStatus::Clear);
                rec(t, i, "prep_row",
                    "r" + std::to_string(row) + " " + to_string(l) + "=clear");
            }
        } else {
            n.deferred = true;
            rounds[static_cast<size_t>(n.round_idx)].deferred = true;
            set_omni(t, i, true);
            std::string det = "r" + std::to_string(row) + " suspects";
            for (const Link& l : pair) det += " " + to_string(l);
            rec(t, i, "defer", det);
        }
    }

    void npt_done(std::int64_t t, int i, int epoch) {
        NodeRt& n = nd(i);
        if (n.onset_epoch != epoch || !n.onset_t0 || n.deferred) return;
        rec(t, i, "npt_done", "t0'=" + std::to_string(t));
        auto sched = std::make_shared<BtdpPayload>(
            make_btdp(i, *n.onset_t0, n.npt, tsp, delta,
                      default_dtl(delta, tsp), topo));
        rounds[static_cast<size_t>(n.round_idx)].std_tick = sched->std_tick;
        rounds[static_cast<size_t>(n.round_idx)].dtl = sched->dtl;

        adopt_sched(t, i, sched);
        const int prev = n.chain_prev();
        if (prev >= 0) {
            Message m;
            m.kind = MsgKind::Btdp;
            m.from = i;
            m.to = prev;
            m.btdp = sched;
            align(t, i, prev);
            auto dec = send_control(t, m);
            if (!dec.empty() && dec.front().delivered)
                on_btdp(t, prev, m);
        }
        set_omni(t, i, true);

        const int ep = n.onset_epoch;
        const std::int64_t cls = sched->order.last_window_end();
        q.schedule(cls, [this, i, ep, cls] { classify(cls, i, ep); });
    }

    void adopt_sched(std::int64_t t, int i,
                     std::shared_ptr<const BtdpPayload> sp) {
        NodeRt& n = nd(i);
        const std::pair<int, std::int64_t> key{sp->nid, sp->std_tick};
        if (n.sched_seen.count(key)) return;
        n.sched_seen.insert(key);
        n.sched = sp;
        if (n.table.region() != sp->nid) n.table = BlockLinkTable(topo, sp->nid);
        n.table.set(sp->blid, LinkStatus::Blocked);
        if (!n.idle && n.phase != NodePhase::Reconfiguring)
            n.phase = NodePhase::Detecting;

        if (!n.idle) {
            if (auto ws = sp->order.window_start(i); ws && *ws >= t) {
                const std::int64_t w = *ws;
                q.schedule(w, [this, i, key, w] { window_start(w, i, key); });
            }
        }
        // Lane 2: the leftover-node sweep must observe every PRM that lands
        // exactly at STD+DTL first.
        const std::int64_t at = sp->std_tick + sp->dtl;
        q.schedule(
            at, [this, i, key, at] { std_dtl(at, i, key); }, 2);
    }

    // ---- BTDP dissemination ----
    void on_btdp(std::int64_t t, int i, const Message& msg) {
        NodeRt& n = nd(i);
        adopt_sched(t, i, msg.btdp);
        set_omni(t, i, true);
        // Forward down the chain away from the leader.
        const std::pair<int, std::int64_t> key{msg.btdp->nid,
                                               msg.btdp->std_tick};
        if (msg.from == n.chain_next() && n.chain_prev() >= 0 &&
            !n.btdp_fwd_done.count(key)) {
            n.btdp_fwd_done.insert(key);
            auto sp = msg.btdp;
            const int prev = n.chain_prev();
            q.schedule(t + tsp, [this, i, prev, sp] {
                const std::int64_t now = t_of();
                Message m;
                m.kind = MsgKind::Btdp;
                m.from = i;
                m.to = prev;
                m.btdp = sp;
                auto dec = send_control(now, m);
                if (!dec.empty() && dec.front().delivered)
                    on_btdp(now, prev, m);
                set_omni(now, i, true);
            });
        }
    }

    std::int64_t t_of() { return q.now(); }

    // ---- detection windows ----
    struct ProbeCtx {
        int prober, target;
        Link link;
        bool btdp_delivered = false;
        bool success = false;
        bool resolved = false;
    };

    void window_start(std::int64_t w, int i, std::pair<int, std::int64_t> key) {
        NodeRt& n = nd(i);
        if (!n.sched || std::pair<int, std::int64_t>{n.sched->nid,
                                                     n.sched->std_tick} != key)
            return;
        if (n.idle || n.deferred) return;
        n.phase = NodePhase::Detecting;
        const ProbeRole role =
            i > n.sched->nid ? ProbeRole::TxLinks : ProbeRole::Alternates;
        const auto links = probe_set(i, role, topo);
        const int cap = window_probe_capacity(delta, tsp);
        const int run = std::min<int>(cap, static_cast<int>(links.size()));
        rec(w, i, "window", "probes=" + std::to_string(run) + "/" +
                                std::to_string(links.size()));

        for (int p = 0; p < run; ++p) {
            const Link l = links[static_cast<size_t>(p)];
            auto ctx = std::make_shared<ProbeCtx>();
            ctx->prober = i;
            ctx->target = l.from == i ? l.to : l.from;
            ctx->link = l;
            const std::int64_t t0p = w + 4 * p * tsp;
            q.schedule(t0p, [this, ctx, t0p] { probe_begin(t0p, ctx); });
            const std::int64_t tr = t0p + 3 * tsp;
            q.schedule(tr, [this, ctx, tr] { probe_resolve(tr, ctx); });
        }
        const std::int64_t share_at = run > 0 ? w + (4 * run - 1) * tsp : w;
        q.schedule(share_at, [this, i, key, role, share_at] {
            window_share(share_at, i, key, role);
        });
    }

    void probe_begin(std::int64_t t, std::shared_ptr<ProbeCtx> ctx) {
        NodeRt& prober = nd(ctx->prober);
        align(t, ctx->prober, ctx->target);
        Message m;
        m.kind = MsgKind::Btdp;
        m.from = ctx->prober;
        m.to = ctx->target;
        m.btdp = prober.sched;
        auto dec = send_control(t, m);
        if (dec.empty() || !dec.front().delivered) return;

        ctx->btdp_delivered = true;
        adopt_sched(t, ctx->target, prober.sched);
        align(t, ctx->target, ctx->prober);
        // Target answers, probe signal follows, then the target frees its
        // antenna whether or not the probe made it.
        q.schedule(t + tsp, [this, ctx] {
            const std::int64_t now = t_of();
            Message a;
            a.kind = MsgKind::Ack;
            a.ack_of = MsgKind::Btdp;
            a.from = ctx->target;
            a.to = ctx->prober;
            auto d = send_control(now, a);
            if (d.empty() || !d.front().delivered) return;
            q.schedule(now + tsp, [this, ctx] {
                const std::int64_t now2 = t_of();
                Message ds;
                ds.kind = MsgKind::Ds;
                ds.from = ctx->prober;
                ds.to = ctx->target;
                auto d2 = send_control(now2, ds);
                if (d2.empty() || !d2.front().delivered) return;
                ctx->success = true;
                q.schedule(now2 + tsp, [this, ctx] {
                    const std::int64_t now3 = t_of();
                    Message a2;
                    a2.kind = MsgKind::Ack;
                    a2.ack_of = MsgKind::Ds;
                    a2.from = ctx->target;
                    a2.to = ctx->prober;
                    send_control(now3, a2);
                });
            });
        });
        q.schedule(t + 3 * tsp, [this, ctx] {
            set_omni(t_of(), ctx->target, true);
        });
    }

    void probe_resolve(std::int64_t t, std::shared_ptr<ProbeCtx> ctx) {
        if (ctx->resolved) return;
        ctx->resolved = true;
        NodeRt& prober = nd(ctx->prober);
        prober.table.set(ctx->link,
                         ctx->success ? LinkStatus::Clear : LinkStatus::Blocked);
        rec(t, ctx->prober, "probe",
            to_string(ctx->link) + (ctx->success ? "=clear" : "=blocked"));
    }

    void window_share(std::int64_t t, int i, std::pair<int, std::int64_t> key,
                      ProbeRole role) {
        NodeRt& n = nd(i);
        if (!n.sched || std::pair<int, std::int64_t>{n.sched->nid,
                                                     n.sched->std_tick} != key)
            return;
        if (n.idle || n.deferred) return;
        if (role == ProbeRole::TxLinks) {
            const auto tl = probe_set(i, ProbeRole::TxLinks, topo);
            const bool all_blocked =
                !tl.empty() &&
                std::all_of(tl.begin(), tl.end(), [&](const Link& l) {
                    return n.table.status(l) == LinkStatus::Blocked;
                });
            if (all_blocked) {
                const auto reset = reset_inbound_candidates(n.table, i, topo);
                std::string det;
                for (const Link& l : reset) det += to_string(l) + " ";
                rec(t, i, "reset_inbound", det);
            }
        }
        Message m;
        m.kind = MsgKind::TableShare;
        m.from = i;
        m.to = kMulticast;
        m.directional = false;
        m.table = std::make_shared<BlockLinkTable>(n.table);
        m.btdp = n.sched;
        auto dec = send_control(t, m);
        for (const auto& d : dec) {
            if (!d.delivered) continue;
            NodeRt& r = nd(d.receiver);
            r.table.merge(*m.table);
            if (m.btdp) adopt_sched(t, d.receiver, m.btdp);
        }
        set_omni(t, i, true);
    }

    // ---- classification, selection, reconfiguration ----
    void classify(std::int64_t t, int i, int epoch) {
        NodeRt& n = nd(i);
        if (n.onset_epoch != epoch || !n.onset_t0 || n.deferred) return;
        BtdRound& round = rounds[static_cast<size_t>(n.round_idx)];
        round.classify_tick = t;
        try {
            round.detected = classify_from_table(n.table, i, topo);
        } catch (const InconsistentTable& e) {
            rec(t, i, "classify_error", e.what());
            return;
        }
        rec(t, i, "classify", to_string(round.detected));

        auto sel = select_path(n.table, i, round.detected, topo,
                               n.sched->std_tick);
        if (!sel.prm) {
            rec(t, i, "unreachable", "no clear substitute spans the cut");
            return;
        }
        round.prm = sel.prm;
        auto payload = std::make_shared<PrmPayload>(*sel.prm);
        rec(t, i, "path", to_string(payload->new_path.front()) +
                              (payload->reschedule ? " +reschedule" : ""));
        apply_prm(t, i, payload);
        prm_mcast(t, i, payload);
    }

    void apply_prm(std::int64_t t, int i,
                   std::shared_ptr<const PrmPayload> p) {
        NodeRt& n = nd(i);
        if (n.prm_seen.count(p->dedup_key())) return;
        n.prm_seen.insert(p->dedup_key());
        n.prm = p;
        const Link bypass = p->new_path.front();
        // Splice the chain view around the substitute link.
        auto& c = n.chain;
        auto ia = std::find(c.begin(), c.end(), bypass.from);
        auto ib = std::find(c.begin(), c.end(), bypass.to);
        if (ia != c.end() && ib != c.end() && ia < ib)
            c.erase(ia + 1, ib);
        if (p->reschedule)
            for (const auto& [node, par] : *p->reschedule)
                if (node == i) n.tx_parity = par;
        rec(t, i, "prm", to_string(bypass));
        if (n.on_chain()) {
            // A path into this node exists again; it rejoins even if a
            // previous round had written it off.
            n.idle = false;
            n.phase = NodePhase::Reconfiguring;
            n.stopped_data = false;
            n.awaiting_refill = true;
            n.received_data = false;
            n.have_fresh = false;
            n.onset_t0.reset();
            // The reconfiguration supersedes every stop order from the
            // round it closes; fresh blockages re-announce themselves.
            n.known_sts.clear();
            n.sts_forward_pending = false;
            n.relay_lbs = false;
            // Stay all-ears until the first refill unit arrives.
            set_omni(t, i, true);
        }
        if (i == 0 && n.on_chain()) {
            // The source resumes on its own; it has nothing to wait for.
            n.awaiting_refill = false;
            n.phase = NodePhase::Normal;
            set_omni(t, i, false);
        }
    }

    void prm_mcast(std::int64_t t, int i,
                   std::shared_ptr<const PrmPayload> p) {
        NodeRt& n = nd(i);
        if (n.remcast_done.count(p->dedup_key())) return;
        // Re-multicasting covers adjacent nodes the obstacle hides from the
        // leader; beyond that region the message travels along the chain at
        // STD+DTL instead.
        if (std::abs(i - p->nid) > 3) return;
        n.remcast_done.insert(p->dedup_key());
        Message m;
        m.kind = MsgKind::Prm;
        m.from = i;
        m.to = kMulticast;
        m.directional = false;
        m.prm = p;
        auto dec = send_control(t, m);
        for (const auto& d : dec) {
            if (!d.delivered) continue;
            const int r = d.receiver;
            const bool fresh = !nd(r).prm_seen.count(p->dedup_key());
            apply_prm(t, r, p);
            if (fresh)
                q.schedule(t + tsp, [this, r, p] {
                    prm_mcast(t_of(), r, p);
                });
        }
    }

    void prm_chain_forward(std::int64_t t, int i, bool leftward,
                           std::shared_ptr<const PrmPayload> p) {
        NodeRt& n = nd(i);
        auto& done = leftward ? n.fwd_left_done : n.fwd_right_done;
        if (!done.insert(p->dedup_key()).second) return;
        chain_forward_hop(t, i, leftward, p, 0);
    }

    void chain_forward_hop(std::int64_t t, int i, bool leftward,
                           std::shared_ptr<const PrmPayload> p, int attempt) {
        NodeRt& n = nd(i);
        const int next = leftward ? n.chain_prev() : n.chain_next();
        if (next < 0) return;
        Message m;
        m.kind = MsgKind::Prm;
        m.from = i;
        m.to = next;
        m.prm = p;
        auto dec = send_control(t, m);
        if (dec.empty() || !dec.front().delivered) {
            // A mid-emission neighbour hears a resend; one that has already
            // realigned got the message some other way; a blocked segment
            // ends the forward.
            const std::string& why = dec.empty() ? "" : dec.front().reason;
            const bool retry = why == "busy" || (why == "deaf" && attempt < 2);
            if (retry)
                q.schedule(t + tsp, [this, i, leftward, p, attempt] {
                    chain_forward_hop(t_of(), i, leftward, p, attempt + 1);
                });
            return;
        }
        apply_prm(t, next, p);
        prm_mcast(t, next, p);
        q.schedule(t + tsp, [this, next, leftward, p] {
            prm_chain_forward(t_of(), next, leftward, p);
        });
    }

    void std_dtl(std::int64_t t, int i, std::pair<int, std::int64_t> key) {
        NodeRt& n = nd(i);
        if (!n.sched || std::pair<int, std::int64_t>{n.sched->nid,
                                                     n.sched->std_tick} != key)
            return;
        const int leader = key.first;
        if (n.prm && !n.prm->new_path.empty()) {
            const Link bypass = n.prm->new_path.front();
            if (i == bypass.from) prm_chain_forward(t, i, true, n.prm);
            if (i == bypass.to) prm_chain_forward(t, i, false, n.prm);
        }
        if (i != leader) return;
        if (n.round_idx < 0 ||
            rounds[static_cast<size_t>(n.round_idx)].std_tick != key.second)
            return;
        const BtdRound& round = rounds[static_cast<size_t>(n.round_idx)];
        auto idle_node = [&](int a) {
            if (!topo.has_node(a)) return;
            NodeRt& m = nd(a);
            if (m.idle || m.deferred) return;
            m.idle = true;
            m.phase = NodePhase::Idle;
            set_omni(t, a, true);
            rec(t, a, "idle", "no usable path at STD+DTL");
        };
        if (round.prm) {
            // Anyone around the blockage that the reconfiguration left out
            // stays in its present state: off the path, silent.
            for (int a = leader - 3; a <= leader + 3; ++a) {
                if (!topo.has_node(a)) continue;
                const NodeRt& m = nd(a);
                if (m.prm_seen.count(key) > 0 && m.on_chain()) continue;
                idle_node(a);
            }
        } else {
            // No usable substitute at all: the affected nodes go quiet until
            // a path into them exists again.
            for (const auto& e : round.detected.entries)
                idle_node(e.affected_node);
        }
    }

    // ---- slotted data plane ----
    void slot_boundary(std::int64_t t) {
        resolve_slot(t);
        if (t >= horizon) return;
        start_slot(t);
        q.schedule(
            t + ts, [this, t] { slot_boundary(t + ts); }, 0);
    }

    void resolve_slot(std::int64_t t) {
        std::set<int> delivered_from_prev;
        for (SlotTx& tx : slot_txs) {
            NodeRt& rx = nd(tx.to);
            const Link l{std::min(tx.from, tx.to), std::max(tx.from, tx.to)};
            const bool clear = link_clear(l, t);
            const bool hears_it = rx.omni || rx.aligned_to == tx.from ||
                                  rx.chain_prev() == tx.from;
            tx.delivered = clear && hears_it && !rx.idle;
            if (tx.delivered) {
                rec(t, tx.to, "recv",
                    to_string(tx.kind) +
                        (tx.kind == MsgKind::Data
                             ? "#" + std::to_string(tx.seq)
                             : "") +
                        " from N" + std::to_string(tx.from));
                on_slot_rx(t, rx, tx);
                if (rx.chain_prev() == tx.from)
                    delivered_from_prev.insert(tx.to);
                // The in-slot reply carries everything the receiver knows.
                for (const auto& [o, t0] : rx.known_sts)
                    adopt_sts(t, tx.from, {o, t0});
            } else {
                rec(t, tx.to, "drop",
                    to_string(tx.kind) + " from N" + std::to_string(tx.from));
                if (tx.kind == MsgKind::Data && !nd(tx.from).onset_t0)
                    onset(t, tx.from);
            }
        }
        // Expected-but-silent upstream: the receiver-side half of onset for
        // pipeline nodes, a blocked-sign for relays still feeding a leader.
        const std::int64_t par = t >= ts ? ((t - ts) / ts) % 2 : -1;
        for (NodeRt& n : nodes) {
            if (n.idle) continue;
            const int prev = n.chain_prev();
            if (prev < 0 || nd(prev).tx_parity != par) continue;
            if (delivered_from_prev.count(n.idx)) continue;
            if (n.phase == NodePhase::Normal && n.received_data)
                receiver_onset(t, n.idx, prev);
            else if (n.phase == NodePhase::Preparing && n.stopped_data &&
                     !n.known_sts.empty())
                n.relay_lbs = true;
        }
        for (NodeRt& n : nodes) {
            if (n.omni_after_slot) {
                n.omni_after_slot = false;
                set_omni(t, n.idx, true);
            }
        }
        slot_txs.clear();
    }

    void on_slot_rx(std::int64_t t, NodeRt& rx, const SlotTx& tx) {
        const bool from_prev = rx.chain_prev() == tx.from;
        if (from_prev) {
            const bool upstream_sts =
                tx.sts && tx.sts->origin_k < rx.idx;
            rx.prep_log.push_back({t, tx.kind, upstream_sts});
            if (rx.stopped_data && rx.known_sts.size() > 0)
                rx.relay_lbs = !(tx.kind == MsgKind::Data ||
                                 tx.kind == MsgKind::Lus) ||
                               upstream_sts;
        }
        if (tx.kind == MsgKind::Data && from_prev) {
            rx.have_fresh = true;
            rx.fresh_seq = tx.seq;
            rx.received_data = true;
            if (rx.awaiting_refill) {
                rx.awaiting_refill = false;
                rx.phase = NodePhase::Normal;
                set_omni(t, rx.idx, false);
            }
            if (rx.deferred) {
                // Upstream recovered; leadership restarts on the next failure.
                rx.deferred = false;
                rx.onset_t0.reset();
                rx.phase = NodePhase::Normal;
                rx.stopped_data = false;
                set_omni(t, rx.idx, false);
                rec(t, rx.idx, "resume", "data after defer");
            }
            if (rx.idx == n_nodes - 1) {
                sink_rx.push_back(t);
                rec(t, rx.idx, "sink", "#" + std::to_string(tx.seq));
            }
        }
        if (tx.sts) adopt_sts(t, rx.idx, *tx.sts);
    }

    void start_slot(std::int64_t t) {
        cur_slot_start = t;
        const std::int64_t par = (t / ts) % 2;
        for (NodeRt& n : nodes) {
            if (n.idle || n.tx_parity != par) continue;
            const int next = n.chain_next();

            if (n.sts_forward_pending) {
                n.sts_forward_pending = false;
                if (next >= 0 && !n.onset_t0) {
                    SlotTx tx{n.idx, next, MsgKind::Data, n.fresh_seq,
                              StsInfo{n.sts_forward_origin,
                                      n.known_sts[n.sts_forward_origin]}};
                    emit_slot_tx(t, tx);
                    n.omni_after_slot = true;
                    continue;
                }
                set_omni(t, n.idx, true);
                continue;
            }
            if (n.stopped_data) {
                // Left-side relay duty: keep the leader's table rows fed
                // until the preparation wait runs out. Stops once detection
                // takes over.
                std::optional<std::pair<int, std::int64_t>> duty;
                for (const auto& [o, t0] : n.known_sts)
                    if (o > n.idx && (!duty || o < duty->first))
                        duty = std::make_pair(o, t0);
                if (duty && next >= 0 && n.phase == NodePhase::Preparing) {
                    const std::int64_t until =
                        duty->second + compute_npt(duty->first, n_nodes, ts);
                    if (t + ts <= until) {
                        SlotTx tx{n.idx, next,
                                  n.relay_lbs ? MsgKind::Lbs : MsgKind::Lus, 0,
                                  StsInfo{duty->first, duty->second}};
                        emit_slot_tx(t, tx);
                    }
                }
                continue;
            }
            if (next < 0 || !n.on_chain()) continue;
            if (n.idx == 0) {
                SlotTx tx{0, next, MsgKind::Data, n.next_seq++, std::nullopt};
                emit_slot_tx(t, tx);
            } else if (n.have_fresh) {
                SlotTx tx{n.idx, next, MsgKind::Data, n.fresh_seq,
                          std::nullopt};
                n.have_fresh = false;
                emit_slot_tx(t, tx);
            }
        }
    }

    void emit_slot_tx(std::int64_t t, const SlotTx& tx) {
        nd(tx.from).emitting_at = t;
        rec(t, tx.from, "emit",
            to_string(tx.kind) +
                (tx.kind == MsgKind::Data ? "#" + std::to_string(tx.seq) : "") +
                (tx.sts ? "+STS(k=" + std::to_string(tx.sts->origin_k) + ")"
                        : "") +
                " ->N" + std::to_string(tx.to));
        slot_txs.push_back(tx);
    }

    // ---- top level ----
    ScenarioResult run() {
        std::int64_t latest_appear = 0;
        for (const Obstacle& o : obstacles) {
            latest_appear = std::max(latest_appear, o.appear_tick);
            const Obstacle oc = o;
            q.schedule(o.appear_tick, [this, oc] {
                std::ostringstream os;
                os << "(" << oc.center.x << "," << oc.center.y << ") r="
                   << oc.radius;
                rec(t_of(), -1, "obstacle", os.str());
            });
        }
        horizon = opts.deadline_ticks
                      ? *opts.deadline_ticks
                      : latest_appear + (n_nodes + 4) * ts;
        q.schedule(
            0, [this] { slot_boundary(0); }, 0);

        while (true) {
            const std::int64_t h = horizon;
            q.run_until(h);
            if (horizon == h) break;
        }
        return assemble();
    }

    ScenarioResult assemble() {
        ScenarioResult res;
        res.rounds = rounds;
        res.end_tick = q.now();

        std::set<Link> blocked_union;
        for (const Obstacle& o : obstacles)
            for (const Link& l : blocked_links(topo, o)) blocked_union.insert(l);
        res.oracle = classify_oracle(
            topo, std::vector<Link>(blocked_union.begin(), blocked_union.end()));

        for (const NodeRt& n : nodes)
            if (n.idle) res.idle_nodes.push_back(n.idx);
        res.final_chain = nd(0).chain;

        if (overflow) {
            res.outcome = Outcome::NonTermination;
        } else if (rounds.empty()) {
            res.outcome = Outcome::NoBlockage;
        } else {
            const BtdRound* last_prm = nullptr;
            const BtdRound* last_classified = nullptr;
            for (const auto& r : rounds) {
                if (r.prm) last_prm = &r;
                if (r.classify_tick) last_classified = &r;
            }
            if (last_prm) {
                const std::int64_t gate = last_prm->std_tick + last_prm->dtl;
                for (std::int64_t s : sink_rx)
                    if (s >= gate) {
                        res.recovery_tick = s;
                        break;
                    }
            }
            if (res.recovery_tick) {
                res.outcome = Outcome::Recovered;
            } else if (last_classified && !last_classified->prm) {
                res.outcome = Outcome::Unreachable;
            } else {
                res.outcome = Outcome::NonTermination;
            }
        }

        res.agreement = res.detected_typed() == unique_typed(res.oracle);
        return res;
    }
};

Simulation::Simulation(const TopologyConfig& cfg,
                       std::vector<Obstacle> obstacles, SimOptions opts)
    : impl_(std::make_unique<Impl>(cfg, std::move(obstacles), opts)) {}

Simulation::~Simulation() = default;

ScenarioResult Simulation::run() { return impl_->run(); }

const Trace& Simulation::trace() const { return impl_->trace; }

const Topology& Simulation::topology() const { return impl_->topo; }

ScenarioResult run_scenario(const TopologyConfig& cfg, const Obstacle& obs,
                            SimOptions opts) {
    Simulation sim(cfg, {obs}, opts);
    return sim.run();
}

}  // namespace iftw

#include "iftw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace iftw {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Absolute slop when snapping d_l/d0 to an integer node count. User inputs
// like theta = 26.565 deg intend tan(theta) = 0.5 exactly; without the snap
// the rounded angle would drop the last node.
constexpr double kCountSnap = 1e-4;
// Guard band for the strict interference inequality, in degrees.
constexpr double kAngleGuardDeg = 1e-9;

double deg2rad(double d) { return d * kPi / 180.0; }
double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace

void TopologyConfig::validate() const {
    if (!(road_width_m > 0.0)) throw InvalidGeometry("road width must be > 0");
    if (!(road_length_m > 0.0)) throw InvalidGeometry("road length must be > 0");
    if (!(theta_deg > 0.0 && theta_deg < 90.0))
        throw InvalidGeometry("theta must lie in (0, 90) degrees");
    if (!(phi_deg > 0.0 && phi_deg < 180.0))
        throw InvalidGeometry("phi must lie in (0, 180) degrees");
    if (slot_ticks <= 0) throw InvalidGeometry("slot_ticks must be > 0");
    if (control_slot_ticks <= 0 || control_slot_ticks >= slot_ticks)
        throw InvalidGeometry("control_slot_ticks must be in (0, slot_ticks)");
    if (detection_interval_ticks <= 0)
        throw InvalidGeometry("detection_interval_ticks must be > 0");
}

LinkKind Link::kind() const {
    switch (to - from) {
        case 1: return LinkKind::Original;
        case 2: return LinkKind::SkipOne;
        case 3: return LinkKind::SkipTwo;
        default: throw InvalidGeometry("link separation must be 1, 2 or 3");
    }
}

std::string to_string(const Link& l) {
    std::ostringstream os;
    os << "e(" << l.from << "," << l.to << ")";
    return os.str();
}

Topology::Topology(TopologyConfig cfg, std::vector<Node> nodes, double d0)
    : cfg_(cfg), nodes_(std::move(nodes)), d0_(d0) {
    const int n = node_count();
    for (int k = 0; k + 1 < n; ++k) originals_.push_back({k, k + 1});
    for (int k = 0; k + 2 < n; ++k) alternates_.push_back({k, k + 2});
    for (int k = 0; k + 3 < n; ++k) alternates_.push_back({k, k + 3});
}

bool Topology::has_link(int a, int b) const {
    if (a > b) std::swap(a, b);
    const int sep = b - a;
    return has_node(a) && has_node(b) && sep >= 1 && sep <= 3;
}

std::optional<Link> Topology::link_between(int a, int b) const {
    if (a > b) std::swap(a, b);
    if (!has_link(a, b)) return std::nullopt;
    return Link{a, b};
}

std::vector<Link> Topology::all_links() const {
    std::vector<Link> out = originals_;
    out.insert(out.end(), alternates_.begin(), alternates_.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::pair<Vec2, Vec2> Topology::segment(const Link& l) const {
    return {position(l.from), position(l.to)};
}

Topology build_topology(const TopologyConfig& cfg) {
    cfg.validate();
    const double d0 = cfg.road_width_m / std::tan(deg2rad(cfg.theta_deg));
    if (!(d0 > 0.0) || !std::isfinite(d0))
        throw InvalidGeometry("degenerate node spacing");
    const int n =
        static_cast<int>(std::floor(cfg.road_length_m / d0 + kCountSnap)) + 1;
    if (n < 2)
        throw InvalidGeometry("road too short for two nodes at this angle");

    std::vector<Node> nodes;
    nodes.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const bool north = (k % 2) != 0;
        nodes.push_back({k, {k * d0, north ? cfg.road_width_m : 0.0}, north});
    }
    return Topology(cfg, std::move(nodes), d0);
}

InterferenceMargin interference_free_margin(double theta_deg, double phi_deg) {
    if (!(theta_deg > 0.0 && theta_deg < 90.0))
        throw InvalidGeometry("theta must lie in (0, 90) degrees");
    const double margin =
        theta_deg - rad2deg(std::atan(std::tan(deg2rad(theta_deg)) / 3.0));
    return {margin, margin - phi_deg / 2.0 > kAngleGuardDeg};
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double wx = p.x - a.x, wy = p.y - a.y;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
    return std::hypot(dx, dy);
}

bool link_blocked(const Topology& topo, const Link& l, const Obstacle& obs) {
    const auto [a, b] = topo.segment(l);
    return point_segment_distance(obs.center, a, b) <= obs.radius;
}

std::vector<Link> blocked_links(const Topology& topo, const Obstacle& obs) {
    std::vector<Link> out;
    for (const Link& l : topo.all_links())
        if (link_blocked(topo, l, obs)) out.push_back(l);
    return out;
}

std::string to_string(BlockageType t) {
    switch (t) {
        case BlockageType::I: return "I";
        case BlockageType::II: return "II";
        case BlockageType::III: return "III";
        case BlockageType::IV: return "IV";
    }
    return "?";
}

std::vector<Link> RegionLinks::all() const {
    std::vector<Link> out = tx_alternates;
    out.insert(out.end(), rx_alternates.begin(), rx_alternates.end());
    if (crossing) out.push_back(*crossing);
    return out;
}

RegionLinks region_links(const Topology& topo, int k) {
    RegionLinks r;
    for (int j : {k + 2, k + 3})
        if (auto l = topo.link_between(k, j)) r.tx_alternates.push_back(*l);
    for (int i : {k - 2, k - 1})
        if (auto l = topo.link_between(i, k + 1)) r.rx_alternates.push_back(*l);
    r.crossing = topo.link_between(k - 1, k + 2);
    return r;
}

std::vector<std::pair<BlockageType, int>> BlockageVerdict::typed_set() const {
    std::vector<std::pair<BlockageType, int>> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.emplace_back(e.type, e.affected_node);
    std::sort(out.begin(), out.end());
    return out;
}

std::string to_string(const BlockageVerdict& v) {
    std::ostringstream os;
    bool first = true;
    for (const auto& e : v.entries) {
        if (!first) os << "+";
        os << to_string(e.type) << "@N" << e.affected_node;
        first = false;
    }
    if (v.entries.empty()) os << "none";
    if (!v.residual.empty()) os << "(+" << v.residual.size() << " residual)";
    return os.str();
}

namespace {

// Regions an alternate can belong to: every region its x-span covers.
std::vector<int> covered_regions(const Link& alt) {
    std::vector<int> out;
    for (int k = alt.from; k < alt.to; ++k) out.push_back(k);
    return out;
}

}  // namespace

BlockageVerdict classify_oracle(const Topology& topo,
                                const std::vector<Link>& blocked) {
    std::set<Link> blocked_set(blocked.begin(), blocked.end());
    std::set<int> blocked_regions;
    for (const Link& l : blocked)
        if (l.kind() == LinkKind::Original) blocked_regions.insert(l.from);

    // Attribute each blocked alternate to the nearest region whose original
    // link is also blocked; alternates with no such region are residual.
    std::map<int, std::set<Link>> region_evidence;
    BlockageVerdict verdict;
    for (const Link& l : blocked) {
        if (l.kind() == LinkKind::Original) continue;
        int best = -1;
        int best_dist = 0;
        for (int k : covered_regions(l)) {
            if (!blocked_regions.count(k)) continue;
            const int dist = std::abs(l.from + l.to - (2 * k + 1));
            if (best < 0 || dist < best_dist) {
                best = k;
                best_dist = dist;
            }
        }
        if (best < 0)
            verdict.residual.push_back(l);
        else
            region_evidence[best].insert(l);
    }

    for (int k : blocked_regions) {
        const RegionLinks rl = region_links(topo, k);
        const std::set<Link>& ev = region_evidence[k];
        auto in_ev = [&](const Link& l) { return ev.count(l) > 0; };
        const bool iv_left = !rl.tx_alternates.empty() &&
                             std::all_of(rl.tx_alternates.begin(),
                                         rl.tx_alternates.end(), in_ev);
        const bool iv_right = !rl.rx_alternates.empty() &&
                              std::all_of(rl.rx_alternates.begin(),
                                          rl.rx_alternates.end(), in_ev);
        const Link original{k, k + 1};

        std::set<Link> claimed;
        std::vector<VerdictEntry> region_entries;
        auto emit = [&](BlockageType t, int node, std::vector<Link> links) {
            VerdictEntry e{t, node, {}};
            for (const Link& l : links) {
                if (claimed.insert(l).second) e.evidence.push_back(l);
            }
            region_entries.push_back(std::move(e));
        };

        if (iv_left) emit(BlockageType::IV, k, rl.tx_alternates);
        if (iv_right) emit(BlockageType::IV, k + 1, rl.rx_alternates);
        if (!iv_left && topo.has_link(k, k + 3) && in_ev({k, k + 3}))
            emit(BlockageType::II, k, {{k, k + 3}});
        if (!iv_right && topo.has_link(k - 2, k + 1) && in_ev({k - 2, k + 1}))
            emit(BlockageType::II, k + 1, {{k - 2, k + 1}});
        if (rl.crossing && in_ev(*rl.crossing))
            emit(BlockageType::III, k, {*rl.crossing});
        if (region_entries.empty()) emit(BlockageType::I, k, {});

        // The blocked original plus any unclaimed attributed alternates land
        // in the first entry, so every blocked link is reported exactly once.
        region_entries.front().evidence.insert(
            region_entries.front().evidence.begin(), original);
        for (const Link& l : ev)
            if (!claimed.count(l)) region_entries.front().evidence.push_back(l);

        for (auto& e : region_entries) verdict.entries.push_back(std::move(e));
    }
    return verdict;
}

}  // namespace iftw

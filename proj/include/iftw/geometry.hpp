#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace iftw {

struct InvalidGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Static parameters of one simulated deployment. Distances are meters,
/// durations are integer ticks.
struct TopologyConfig {
    double road_width_m = 0.0;
    double road_length_m = 0.0;
    double theta_deg = 0.0;
    double phi_deg = 30.0;
    std::int64_t slot_ticks = 100;
    std::int64_t control_slot_ticks = 4;
    std::int64_t detection_interval_ticks = 32;

    void validate() const;  // throws InvalidGeometry
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

enum class LinkKind { Original, SkipOne, SkipTwo };

/// Undirected hop between two relay indices, from < to. Separation 1 is an
/// original link, 2 and 3 are the diagonal alternates.
struct Link {
    int from = -1;
    int to = -1;

    LinkKind kind() const;
    bool operator==(const Link&) const = default;
    bool operator<(const Link& o) const {
        return from != o.from ? from < o.from : to < o.to;
    }
};

std::string to_string(const Link& l);

struct Node {
    int index = -1;
    Vec2 pos;
    bool north = false;
};

/// Disk obstacle on the road plane. Static once it has appeared.
struct Obstacle {
    Vec2 center;
    double radius = 0.0;
    std::int64_t appear_tick = 0;
};

class Topology {
  public:
    Topology() = default;
    Topology(TopologyConfig cfg, std::vector<Node> nodes, double d0);

    const TopologyConfig& config() const { return cfg_; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    double spacing() const { return d0_; }
    bool has_node(int k) const { return k >= 0 && k < node_count(); }
    const Node& node(int k) const { return nodes_.at(static_cast<size_t>(k)); }
    Vec2 position(int k) const { return node(k).pos; }

    bool has_link(int a, int b) const;
    bool has_link(const Link& l) const { return has_link(l.from, l.to); }
    std::optional<Link> link_between(int a, int b) const;

    const std::vector<Link>& original_links() const { return originals_; }
    const std::vector<Link>& alternative_links() const { return alternates_; }
    std::vector<Link> all_links() const;

    std::pair<Vec2, Vec2> segment(const Link& l) const;

  private:
    TopologyConfig cfg_;
    std::vector<Node> nodes_;
    double d0_ = 0.0;
    std::vector<Link> originals_;
    std::vector<Link> alternates_;
};

/// Lay out the zig-zag relay chain for the given config.
/// Node 0 sits at the origin on the south side; odd indices are on the
/// north side at y = road width. Horizontal spacing is d0 = d_w / tan(theta).
Topology build_topology(const TopologyConfig& cfg);

struct InterferenceMargin {
    double margin_deg = 0.0;
    bool satisfied = false;
};

/// Angular margin theta - arctan(tan(theta)/3) against half the beamwidth.
/// The inequality is strict; a 1e-9 degree guard keeps the boundary stable
/// across platforms.
InterferenceMargin interference_free_margin(double theta_deg, double phi_deg);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

bool link_blocked(const Topology& topo, const Link& l, const Obstacle& obs);

/// All links whose closed segment intersects the closed obstacle disk.
std::vector<Link> blocked_links(const Topology& topo, const Obstacle& obs);

enum class BlockageType { I, II, III, IV };

std::string to_string(BlockageType t);

struct VerdictEntry {
    BlockageType type{};
    int affected_node = -1;
    std::vector<Link> evidence;

    bool operator==(const VerdictEntry&) const = default;
};

/// Decomposition of a blocked link set into per-region typed entries.
/// Alternates that fall in no blocked region are listed as residual.
struct BlockageVerdict {
    std::vector<VerdictEntry> entries;
    std::vector<Link> residual;

    bool single_type() const { return entries.size() == 1; }
    /// (type, affected node) pairs, sorted; the comparison key for
    /// protocol-vs-oracle agreement.
    std::vector<std::pair<BlockageType, int>> typed_set() const;
};

std::string to_string(const BlockageVerdict& v);

/// The five alternates whose state distinguishes the blockage types of the
/// region around original link (k, k+1), restricted to existing links:
/// the TX alternates of N_k, the RX alternates of N_{k+1}, and the crossing
/// diagonal.
struct RegionLinks {
    std::vector<Link> tx_alternates;   // e(k,k+2), e(k,k+3)
    std::vector<Link> rx_alternates;   // e(k-2,k+1), e(k-1,k+1)
    std::optional<Link> crossing;      // e(k-1,k+2)
    std::vector<Link> all() const;
};

RegionLinks region_links(const Topology& topo, int k);

/// Ground-truth classifier over a geometric blocked-link set.
BlockageVerdict classify_oracle(const Topology& topo,
                                const std::vector<Link>& blocked);

}  // namespace iftw

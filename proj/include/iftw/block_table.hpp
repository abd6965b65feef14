#pragma once

#include <map>
#include <string>

#include "iftw/geometry.hpp"

namespace iftw {

enum class LinkStatus { Unchecked, Clear, Blocked };

std::string to_string(LinkStatus s);

/// Shared evidence table over the candidate links around a blocked region:
/// every link e(k+i, k+j) with -2 <= i <= 3 and i+1 <= j <= i+3, clamped to
/// existing nodes. Blocked is absorbing; merging keeps the more informative
/// status per link (Blocked > Clear > Unchecked).
class BlockLinkTable {
  public:
    BlockLinkTable() = default;
    BlockLinkTable(const Topology& topo, int region_k);

    int region() const { return region_k_; }
    bool contains(const Link& l) const { return entries_.count(l) > 0; }
    LinkStatus status(const Link& l) const;
    /// Status with the end-of-detection rule applied: anything never checked
    /// counts as blocked.
    LinkStatus coerced_status(const Link& l) const;

    void set(const Link& l, LinkStatus s);
    void merge(const BlockLinkTable& other);

    const std::map<Link, LinkStatus>& entries() const { return entries_; }
    std::string summary() const;

  private:
    int region_k_ = -1;
    std::map<Link, LinkStatus> entries_;
};

}  // namespace iftw

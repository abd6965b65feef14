#include "iftw/block_table.hpp"

#include <sstream>

namespace iftw {

namespace {

int rank(LinkStatus s) {
    switch (s) {
        case LinkStatus::Unchecked: return 0;
        case LinkStatus::Clear: return 1;
        case LinkStatus::Blocked: return 2;
    }
    return 0;
}

}  // namespace

std::string to_string(LinkStatus s) {
    switch (s) {
        case LinkStatus::Unchecked: return "unchecked";
        case LinkStatus::Clear: return "clear";
        case LinkStatus::Blocked: return "blocked";
    }
    return "?";
}

BlockLinkTable::BlockLinkTable(const Topology& topo, int region_k)
    : region_k_(region_k) {
    for (int i = -2; i <= 3; ++i) {
        for (int j = i + 1; j <= i + 3; ++j) {
            if (auto l = topo.link_between(region_k + i, region_k + j))
                entries_.emplace(*l, LinkStatus::Unchecked);
        }
    }
}

LinkStatus BlockLinkTable::status(const Link& l) const {
    auto it = entries_.find(l);
    return it == entries_.end() ? LinkStatus::Unchecked : it->second;
}

LinkStatus BlockLinkTable::coerced_status(const Link& l) const {
    const LinkStatus s = status(l);
    return s == LinkStatus::Unchecked ? LinkStatus::Blocked : s;
}

void BlockLinkTable::set(const Link& l, LinkStatus s) {
    auto it = entries_.find(l);
    if (it == entries_.end()) return;  // outside the candidate domain
    if (rank(s) > rank(it->second)) it->second = s;
    // Downgrades are dropped: Blocked is absorbing and a probe result never
    // erases earlier evidence.
}

void BlockLinkTable::merge(const BlockLinkTable& other) {
    if (region_k_ < 0) region_k_ = other.region_k_;
    for (const auto& [l, s] : other.entries_) {
        auto it = entries_.find(l);
        if (it == entries_.end())
            entries_.emplace(l, s);
        else if (rank(s) > rank(it->second))
            it->second = s;
    }
}

std::string BlockLinkTable::summary() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [l, s] : entries_) {
        if (s == LinkStatus::Unchecked) continue;
        if (!first) os << " ";
        os << to_string(l) << "=" << (s == LinkStatus::Clear ? "1" : "inf");
        first = false;
    }
    if (first) os << "empty";
    return os.str();
}

}  // namespace iftw

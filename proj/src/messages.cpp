#include "iftw/messages.hpp"

#include <sstream>

namespace iftw {

std::optional<std::int64_t> DetectionOrder::window_start(int node) const {
    for (const auto& [n, t] : windows)
        if (n == node) return t;
    return std::nullopt;
}

std::int64_t DetectionOrder::last_window_end() const {
    if (windows.empty()) return 0;
    return windows.back().second + interval;
}

std::string to_string(MsgKind k) {
    switch (k) {
        case MsgKind::Data: return "DATA";
        case MsgKind::Ack: return "ACK";
        case MsgKind::Nack: return "NACK";
        case MsgKind::Sts: return "STS";
        case MsgKind::Lus: return "LUS";
        case MsgKind::Lbs: return "LBS";
        case MsgKind::Btdp: return "BTDP";
        case MsgKind::Ds: return "DS";
        case MsgKind::Prm: return "PRM";
        case MsgKind::TableShare: return "TABLE";
    }
    return "?";
}

std::string Message::describe() const {
    std::ostringstream os;
    os << to_string(kind);
    if (kind == MsgKind::Data) os << "#" << seq;
    if (sts) os << "+STS(k=" << sts->origin_k << ")";
    if (kind == MsgKind::Ack) os << "(" << to_string(ack_of) << ")";
    os << " " << from << "->";
    if (to == kMulticast)
        os << "*";
    else
        os << to;
    return os.str();
}

}  // namespace iftw

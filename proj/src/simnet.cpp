#include "teleos/simnet.hpp"

#include <cmath>
#include <sstream>

#include "teleos/codec.hpp"

namespace teleos::simnet {

const char* message_kind_name(MessageKind k) {
    switch (k) {
        case MessageKind::RawTelemetry: return "raw-telemetry";
        case MessageKind::Insight: return "insight";
        case MessageKind::ModelUpdate: return "model-update";
        case MessageKind::Control: return "control";
    }
    return "?";
}

std::optional<MessageKind> message_kind_from_name(std::string_view s) {
    if (s == "raw-telemetry") return MessageKind::RawTelemetry;
    if (s == "insight") return MessageKind::Insight;
    if (s == "model-update") return MessageKind::ModelUpdate;
    if (s == "control") return MessageKind::Control;
    return std::nullopt;
}

const char* trace_event_type_name(TraceEventType t) {
    switch (t) {
        case TraceEventType::Send: return "send";
        case TraceEventType::Deliver: return "deliver";
        case TraceEventType::Blocked: return "blocked";
    }
    return "?";
}

Timestamp delivery_time(const SimMessage& msg, const LinkSpec& link, Timestamp now) {
    if (link.base_latency_ms < 0) throw SimError("link latency must be >= 0");
    if (!(link.bandwidth_mbps > 0)) throw SimError("link bandwidth must be > 0");
    const double transfer_ms =
        static_cast<double>(msg.size_bytes) * 8.0 / (link.bandwidth_mbps * 1000.0);
    const double mult = link.congestion.multiplier_at(now);
    const double total = (link.base_latency_ms + transfer_ms) * mult;
    return now + static_cast<Timestamp>(std::ceil(total));
}

bool crosses_boundary(const SimMessage& msg) { return msg.src != msg.dst; }

std::vector<Violation> audit_trace(const std::vector<TraceEvent>& trace) {
    std::vector<Violation> out;
    for (const auto& ev : trace) {
        if (ev.type == TraceEventType::Deliver) continue;  // count each attempt once
        if (ev.kind == MessageKind::RawTelemetry && ev.src != ev.dst)
            out.push_back({ev.ts, ev.src, ev.dst, ev.size_bytes});
    }
    return out;
}

std::string export_trace(const std::vector<TraceEvent>& trace) {
    std::ostringstream os;
    for (const auto& ev : trace) {
        os << ev.ts << ' ' << trace_event_type_name(ev.type) << ' ' << ev.src << ' ' << ev.dst
           << ' ' << message_kind_name(ev.kind) << ' ' << ev.size_bytes << ' '
           << to_hex(ev.payload_digest) << '\n';
    }
    return os.str();
}

Digest trace_digest(const std::vector<TraceEvent>& trace) {
    return sha256(export_trace(trace));
}

EventId Network::schedule(Timestamp delay, std::function<void()> fn) {
    if (delay < 0) throw SimError("event delay must be >= 0");
    return schedule_at(clock_ + delay, std::move(fn));
}

EventId Network::schedule_at(Timestamp ts, std::function<void()> fn) {
    if (ts < clock_) throw SimError("cannot schedule an event in the past");
    const uint64_t seq = next_seq_++;
    queue_.push(Pending{ts, seq, std::move(fn)});
    return seq;
}

bool Network::advance() {
    if (queue_.empty()) return false;
    Pending ev = queue_.top();
    queue_.pop();
    clock_ = ev.ts;  // monotone: ts >= clock_ enforced at scheduling
    ++processed_;
    ev.fn();
    return true;
}

void Network::run_until(Timestamp ts) {
    while (!queue_.empty() && queue_.top().ts <= ts) advance();
    clock_ = std::max(clock_, ts);
}

void Network::run_all() {
    while (advance()) {
    }
}

const LinkSpec& Network::link_of(const std::string& node) const {
    auto it = links_.find(node);
    if (it == links_.end()) throw SimError("no link configured for node " + node);
    return it->second;
}

std::optional<Timestamp> Network::transmit(const SimMessage& msg,
                                           std::function<void(Timestamp)> on_deliver) {
    // Classification is by declared kind; the monitor never inspects content.
    if (msg.kind == MessageKind::RawTelemetry && crosses_boundary(msg)) {
        trace_.push_back({clock_, TraceEventType::Blocked, msg.src, msg.dst, msg.kind,
                          msg.size_bytes, msg.payload_digest});
        violations_.push_back({clock_, msg.src, msg.dst, msg.size_bytes});
        return std::nullopt;
    }
    const LinkSpec& link = link_of(msg.src == kCoordinator ? msg.dst : msg.src);
    const Timestamp at = delivery_time(msg, link, clock_);
    trace_.push_back({clock_, TraceEventType::Send, msg.src, msg.dst, msg.kind, msg.size_bytes,
                      msg.payload_digest});
    SimMessage copy = msg;
    schedule_at(at, [this, copy, at, cb = std::move(on_deliver)] {
        trace_.push_back({at, TraceEventType::Deliver, copy.src, copy.dst, copy.kind,
                          copy.size_bytes, copy.payload_digest});
        if (cb) cb(at);
    });
    return at;
}

federation::Transport Network::transport() {
    federation::Transport t;
    t.send_model_update = [this](const OperatorId& src, const std::string& dst, size_t size,
                                 const Digest& digest, Timestamp) -> std::optional<Timestamp> {
        SimMessage msg{src.id, dst, MessageKind::ModelUpdate, size, digest};
        return transmit(msg);
    };
    t.now = [this] { return now(); };
    t.run_until = [this](Timestamp ts) { run_until(ts); };
    return t;
}

}  // namespace teleos::simnet

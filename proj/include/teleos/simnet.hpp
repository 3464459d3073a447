#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "teleos/crypto.hpp"
#include "teleos/domain.hpp"
#include "teleos/federation.hpp"

namespace teleos::simnet {

inline constexpr const char* kCoordinator = "coordinator";

enum class MessageKind { RawTelemetry, Insight, ModelUpdate, Control };

const char* message_kind_name(MessageKind k);
std::optional<MessageKind> message_kind_from_name(std::string_view s);

struct SimMessage {
    std::string src;  // operator id or "coordinator"
    std::string dst;
    MessageKind kind = MessageKind::Control;
    size_t size_bytes = 0;
    Digest payload_digest{};
};

struct LinkSpec {
    double base_latency_ms = 1.0;  // >= 0
    double bandwidth_mbps = 100.0; // > 0
    federation::CongestionSchedule congestion;
};

struct SimError : std::runtime_error {
    explicit SimError(const std::string& what) : std::runtime_error(what) {}
};

// (base latency + transfer time) scaled by the congestion multiplier active
// at send time, rounded up to whole virtual ms:
//   transfer_ms = size_bytes * 8 / (bandwidth_mbps * 1000)
Timestamp delivery_time(const SimMessage& msg, const LinkSpec& link, Timestamp now);

// Raw telemetry must never cross an operator boundary; everything else may.
bool crosses_boundary(const SimMessage& msg);

enum class TraceEventType { Send, Deliver, Blocked };

const char* trace_event_type_name(TraceEventType t);

struct TraceEvent {
    Timestamp ts = 0;
    TraceEventType type = TraceEventType::Send;
    std::string src;
    std::string dst;
    MessageKind kind = MessageKind::Control;
    size_t size_bytes = 0;
    Digest payload_digest{};
};

struct Violation {
    Timestamp ts = 0;
    std::string src;
    std::string dst;
    size_t size_bytes = 0;
};

// Recomputes sovereignty violations from the raw trace, ignoring the
// outcome column the live run recorded. The independent side of the
// dual-accounting check.
std::vector<Violation> audit_trace(const std::vector<TraceEvent>& trace);

// Line format: ts type src dst kind size digest_hex
std::string export_trace(const std::vector<TraceEvent>& trace);
Digest trace_digest(const std::vector<TraceEvent>& trace);

using EventId = uint64_t;

// Deterministic single-threaded discrete-event loop. Events fire in
// (time, insertion sequence) order; the clock never moves backward.
class Network {
public:
    EventId schedule(Timestamp delay, std::function<void()> fn);
    EventId schedule_at(Timestamp ts, std::function<void()> fn);

    // Runs the next event; false when the queue is empty.
    bool advance();
    void run_until(Timestamp ts);  // processes every event with ts <= given
    void run_all();

    Timestamp now() const { return clock_; }
    uint64_t processed_events() const { return processed_; }

    void set_link(const std::string& node, LinkSpec link) { links_[node] = std::move(link); }
    const LinkSpec& link_of(const std::string& node) const;

    // Sovereignty-checked transmission on the sender's link. A blocked
    // message is dropped (recorded, no delivery, no retry). Returns the
    // delivery timestamp for accepted messages.
    std::optional<Timestamp> transmit(const SimMessage& msg,
                                      std::function<void(Timestamp)> on_deliver = nullptr);

    const std::vector<TraceEvent>& trace() const { return trace_; }
    const std::vector<Violation>& violations() const { return violations_; }

    // Transport facade for the federation round driver.
    federation::Transport transport();

private:
    struct Pending {
        Timestamp ts;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Pending& o) const {
            return ts != o.ts ? ts > o.ts : seq > o.seq;
        }
    };

    std::priority_queue<Pending, std::vector<Pending>, std::greater<>> queue_;
    Timestamp clock_ = 0;
    uint64_t next_seq_ = 0;
    uint64_t processed_ = 0;
    std::map<std::string, LinkSpec> links_;
    std::vector<TraceEvent> trace_;
    std::vector<Violation> violations_;
};

}  // namespace teleos::simnet

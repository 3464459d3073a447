#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "teleos/domain.hpp"

namespace teleos::telemetry {

enum class Domain { Ran, Core, Transport, Oss, Bss };
enum class Kind { Kpi, Alarm, Log, TopologyEdge };

const char* domain_name(Domain d);
const char* kind_name(Kind k);
std::optional<Domain> domain_from_name(std::string_view s);
std::optional<Kind> kind_from_name(std::string_view s);

struct KpiPoint {
    Timestamp ts = 0;
    double value = 0.0;

    bool operator==(const KpiPoint&) const = default;
};

struct KpiWindow {
    std::string key;
    std::vector<KpiPoint> points;  // strictly increasing timestamps

    size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    std::vector<double> values() const;

    bool operator==(const KpiWindow&) const = default;
};

// One normalized observation. Numeric values are always in canonical units:
// latency in ms, throughput in mbps, ratios in [0,1], counts dimensionless.
struct TelemetryRecord {
    OperatorId op;
    Domain domain = Domain::Ran;
    Kind kind = Kind::Kpi;
    std::string key;
    Timestamp ts = 0;
    double value = 0.0;     // kpi / topology-edge capacity
    std::string text;       // alarm / log payloads
    std::string unit;       // canonical unit tag of `value`
    SchemaRef schema;

    bool operator==(const TelemetryRecord&) const = default;
};

enum class NodeType { Cell, Router, CoreFunction };

struct TopologyGraph {
    struct Node {
        std::string id;
        NodeType type;
    };
    struct Edge {
        std::string a;
        std::string b;
        double capacity_mbps;
    };
    std::vector<Node> nodes;
    std::vector<Edge> edges;
};

struct GeneratorSpec {
    double base = 0.0;
    double trend = 0.0;
    double season_amplitude = 0.0;
    int season_period = 1;   // >= 1
    double noise_sigma = 0.0;
    int length = 1;          // >= 1
    uint64_t seed = 0;
};

struct TelemetryError : std::runtime_error {
    explicit TelemetryError(const std::string& what) : std::runtime_error(what) {}
};

struct IngestViolationError : std::runtime_error {
    std::vector<ContractViolation> violations;
    explicit IngestViolationError(std::vector<ContractViolation> v);
};

// value_t = base + trend*t + season_amplitude*sin(2*pi*t/season_period)
//           + gaussian(0, noise_sigma)
// with the gaussian stream drawn from CounterRng(seed) (draw t uses uniform
// counter positions 2t and 2t+1). Timestamps are the step index.
KpiWindow generate_kpi_series(const GeneratorSpec& spec);

struct AnomalyInjection {
    KpiWindow series;
    std::vector<size_t> indices;  // ground truth, sorted
};

// Shifts ceil(rate*length) distinct seeded positions upward by
// amplitude_sigmas * noise_sigma (or by amplitude_sigmas alone when
// noise_sigma == 0). Returns the modified series and the ground truth.
AnomalyInjection inject_anomalies(const KpiWindow& series, double rate, double amplitude_sigmas,
                                  double noise_sigma, uint64_t seed);

// Connected seeded graph: a random spanning tree plus extra random edges up
// to ~n*avg_degree/2 total. No self-loops, no duplicate edges.
TopologyGraph generate_topology(int n, double avg_degree, uint64_t seed);

// Registers the built-in per-kind record schemas (kpi-record, alarm-record,
// log-record, topology-edge-record, all 1.0) used by ingest.
void register_builtin_schemas(SchemaRegistry& reg);
SchemaRef builtin_schema_for(Kind k);

// Raw observation as delivered by a source system, before normalization.
struct RawRecord {
    std::string operator_id;
    std::string region;
    std::string domain;
    std::string kind;
    std::string key;
    Timestamp ts = 0;
    double value = 0.0;
    std::string text;
};

// source_unit_hints maps the raw "value" field to its source unit; ingest
// converts to canonical units (s -> ms, kbps -> mbps, percent -> ratio) and
// validates the normalized record against the built-in schema for its kind.
TelemetryRecord ingest(const RawRecord& raw, const std::map<std::string, std::string>& source_unit_hints,
                       const SchemaRegistry& reg);

// Per-operator store. Reads are shared, writes exclusive; points are kept in
// timestamp order regardless of insertion order.
class TelemetryStore {
public:
    void insert(const TelemetryRecord& rec);

    // Half-open [from, to); throws on from > to. Empty window allowed.
    KpiWindow query_window(const std::string& key, Timestamp from, Timestamp to) const;

    std::vector<std::string> keys() const;
    size_t record_count() const;

    const std::optional<TopologyGraph>& topology() const { return topology_; }
    void set_topology(TopologyGraph g) { topology_ = std::move(g); }

private:
    mutable std::shared_mutex mu_;
    std::map<std::string, std::vector<KpiPoint>> series_;
    std::vector<TelemetryRecord> non_kpi_;
    size_t count_ = 0;
    std::optional<TopologyGraph> topology_;
};

// Line format (single space separated, fixed order):
//   op_id region domain kind key timestamp value_or_text unit schema_name schema_version
// Numbers use shortest round-trip decimal form; empty region/unit export as
// "-"; text payloads are percent-escaped so a record never spans lines.
std::string export_record(const TelemetryRecord& rec);
TelemetryRecord import_record(std::string_view line);  // throws TelemetryError

}  // namespace teleos::telemetry

#include "teleos/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>

#include "teleos/prng.hpp"

namespace teleos::telemetry {

const char* domain_name(Domain d) {
    switch (d) {
        case Domain::Ran: return "ran";
        case Domain::Core: return "core";
        case Domain::Transport: return "transport";
        case Domain::Oss: return "oss";
        case Domain::Bss: return "bss";
    }
    return "?";
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::Kpi: return "kpi";
        case Kind::Alarm: return "alarm";
        case Kind::Log: return "log";
        case Kind::TopologyEdge: return "topology-edge";
    }
    return "?";
}

std::optional<Domain> domain_from_name(std::string_view s) {
    if (s == "ran") return Domain::Ran;
    if (s == "core") return Domain::Core;
    if (s == "transport") return Domain::Transport;
    if (s == "oss") return Domain::Oss;
    if (s == "bss") return Domain::Bss;
    return std::nullopt;
}

std::optional<Kind> kind_from_name(std::string_view s) {
    if (s == "kpi") return Kind::Kpi;
    if (s == "alarm") return Kind::Alarm;
    if (s == "log") return Kind::Log;
    if (s == "topology-edge") return Kind::TopologyEdge;
    return std::nullopt;
}

std::vector<double> KpiWindow::values() const {
    std::vector<double> out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(p.value);
    return out;
}

IngestViolationError::IngestViolationError(std::vector<ContractViolation> v)
    : std::runtime_error("ingest validation failed (" + std::to_string(v.size()) + " violations)"),
      violations(std::move(v)) {}

KpiWindow generate_kpi_series(const GeneratorSpec& spec) {
    if (spec.length < 1) throw TelemetryError("generator length must be >= 1");
    if (spec.season_period < 1) throw TelemetryError("season_period must be >= 1");
    if (spec.noise_sigma < 0) throw TelemetryError("noise_sigma must be >= 0");

    CounterRng rng(spec.seed);
    KpiWindow out;
    out.points.reserve(spec.length);
    for (int t = 0; t < spec.length; ++t) {
        double v = spec.base + spec.trend * t +
                   spec.season_amplitude *
                       std::sin(2.0 * std::numbers::pi * t / spec.season_period);
        // Draw unconditionally so the stream position is independent of sigma.
        double g = rng.next_gaussian();
        v += spec.noise_sigma * g;
        out.points.push_back({static_cast<Timestamp>(t), v});
    }
    return out;
}

AnomalyInjection inject_anomalies(const KpiWindow& series, double rate, double amplitude_sigmas,
                                  double noise_sigma, uint64_t seed) {
    if (!(rate > 0.0 && rate < 1.0)) throw TelemetryError("anomaly rate must be in (0, 1)");
    const size_t n = series.points.size();
    if (n == 0) throw TelemetryError("cannot inject into an empty series");

    const size_t count = static_cast<size_t>(std::ceil(rate * static_cast<double>(n)));
    CounterRng rng(seed);
    std::set<size_t> picked;
    while (picked.size() < count) picked.insert(static_cast<size_t>(rng.next_u64() % n));

    const double shift = amplitude_sigmas * (noise_sigma > 0.0 ? noise_sigma : 1.0);
    AnomalyInjection out;
    out.series = series;
    out.indices.assign(picked.begin(), picked.end());
    for (size_t i : out.indices) out.series.points[i].value += shift;
    return out;
}

TopologyGraph generate_topology(int n, double avg_degree, uint64_t seed) {
    if (n < 2) throw TelemetryError("topology needs at least 2 nodes");
    if (avg_degree < 1.0) throw TelemetryError("avg_degree must be >= 1");

    CounterRng rng(seed);
    TopologyGraph g;
    g.nodes.reserve(n);
    for (int i = 0; i < n; ++i) {
        NodeType t = (i == 0) ? NodeType::CoreFunction
                              : (i % 5 == 0 ? NodeType::Router : NodeType::Cell);
        g.nodes.push_back({"n" + std::to_string(i), t});
    }

    auto capacity = [&rng] { return 100.0 + rng.next_unit() * 900.0; };

    std::set<std::pair<int, int>> used;
    auto add_edge = [&](int a, int b) {
        auto key = std::minmax(a, b);
        if (a == b || used.count(key)) return false;
        used.insert(key);
        g.edges.push_back({g.nodes[a].id, g.nodes[b].id, capacity()});
        return true;
    };

    // Spanning tree first, so connectivity holds by construction.
    for (int i = 1; i < n; ++i) add_edge(i, static_cast<int>(rng.next_u64() % i));

    const size_t max_edges = static_cast<size_t>(n) * (n - 1) / 2;
    size_t target = std::max<size_t>(
        n - 1, static_cast<size_t>(std::llround(n * avg_degree / 2.0)));
    target = std::min(target, max_edges);
    while (g.edges.size() < target) {
        int a = static_cast<int>(rng.next_u64() % n);
        int b = static_cast<int>(rng.next_u64() % n);
        add_edge(a, b);
    }
    return g;
}

namespace {

SchemaDef make_record_schema(const char* name, bool numeric_value) {
    SchemaDef def;
    def.name = name;
    def.version = {1, 0};
    def.fields = {
        {"operator", SemType::String, true, ""},
        {"domain", SemType::String, true, ""},
        {"kind", SemType::String, true, ""},
        {"key", SemType::String, true, ""},
        {"timestamp", SemType::Timestamp, true, ""},
    };
    if (numeric_value)
        def.fields.push_back({"value", SemType::Number, true, ""});
    else
        def.fields.push_back({"text", SemType::String, true, ""});
    return def;
}

}  // namespace

void register_builtin_schemas(SchemaRegistry& reg) {
    reg.register_schema(make_record_schema("kpi-record", true));
    reg.register_schema(make_record_schema("alarm-record", false));
    reg.register_schema(make_record_schema("log-record", false));
    reg.register_schema(make_record_schema("topology-edge-record", true));
}

SchemaRef builtin_schema_for(Kind k) {
    switch (k) {
        case Kind::Kpi: return {"kpi-record", {1, 0}};
        case Kind::Alarm: return {"alarm-record", {1, 0}};
        case Kind::Log: return {"log-record", {1, 0}};
        case Kind::TopologyEdge: return {"topology-edge-record", {1, 0}};
    }
    return {"kpi-record", {1, 0}};
}

namespace {

struct UnitConversion {
    double factor;
    const char* canonical;
};

// Source unit -> canonical unit. Everything downstream assumes canonical.
std::optional<UnitConversion> conversion_for(std::string_view unit) {
    if (unit == "s") return UnitConversion{1000.0, "ms"};
    if (unit == "ms") return UnitConversion{1.0, "ms"};
    if (unit == "kbps") return UnitConversion{1.0 / 1000.0, "mbps"};
    if (unit == "mbps") return UnitConversion{1.0, "mbps"};
    if (unit == "percent") return UnitConversion{1.0 / 100.0, "dimensionless"};
    if (unit == "ratio" || unit == "dimensionless") return UnitConversion{1.0, "dimensionless"};
    if (unit == "count") return UnitConversion{1.0, "count"};
    return std::nullopt;
}

}  // namespace

TelemetryRecord ingest(const RawRecord& raw, const std::map<std::string, std::string>& source_unit_hints,
                       const SchemaRegistry& reg) {
    auto kind = kind_from_name(raw.kind);
    if (!kind) throw TelemetryError("unknown kind: " + raw.kind);
    auto domain = domain_from_name(raw.domain);
    if (!domain) throw TelemetryError("unknown domain: " + raw.domain);
    if (raw.operator_id.empty()) throw TelemetryError("raw record names no operator");
    if (raw.key.empty()) throw TelemetryError("raw record names no key");
    if (raw.ts < 0) throw TelemetryError("timestamp must be >= 0");

    TelemetryRecord rec;
    rec.op = {raw.operator_id, raw.region};
    rec.domain = *domain;
    rec.kind = *kind;
    rec.key = raw.key;
    rec.ts = raw.ts;
    rec.schema = builtin_schema_for(*kind);
    // Numeric kinds carry value only, text kinds carry text only.
    if (*kind == Kind::Kpi || *kind == Kind::TopologyEdge)
        rec.value = raw.value;
    else
        rec.text = raw.text;

    if (auto it = source_unit_hints.find("value"); it != source_unit_hints.end()) {
        auto conv = conversion_for(it->second);
        if (!conv) throw TelemetryError("unknown source unit: " + it->second);
        rec.value = raw.value * conv->factor;
        rec.unit = conv->canonical;
    }

    Payload p{
        {"operator", Value::text(rec.op.id)},
        {"domain", Value::text(domain_name(rec.domain))},
        {"kind", Value::text(kind_name(rec.kind))},
        {"key", Value::text(rec.key)},
        {"timestamp", Value::timestamp(rec.ts)},
    };
    if (rec.kind == Kind::Kpi || rec.kind == Kind::TopologyEdge)
        p.emplace("value", Value::number(rec.value));
    else
        p.emplace("text", Value::text(rec.text));

    auto violations = validate_payload(reg, rec.schema, p);
    if (!violations.empty()) throw IngestViolationError(std::move(violations));
    return rec;
}

void TelemetryStore::insert(const TelemetryRecord& rec) {
    std::unique_lock lock(mu_);
    ++count_;
    if (rec.kind == Kind::Kpi) {
        auto& pts = series_[rec.key];
        KpiPoint p{rec.ts, rec.value};
        // Ordered by timestamp, not arrival; a second sample at the same
        // timestamp replaces the first so windows stay strictly increasing.
        auto it = std::lower_bound(pts.begin(), pts.end(), p,
                                   [](const KpiPoint& a, const KpiPoint& b) { return a.ts < b.ts; });
        if (it != pts.end() && it->ts == p.ts)
            it->value = p.value;
        else
            pts.insert(it, p);
    } else {
        non_kpi_.push_back(rec);
    }
}

KpiWindow TelemetryStore::query_window(const std::string& key, Timestamp from, Timestamp to) const {
    if (from > to) throw TelemetryError("query range has from > to");
    std::shared_lock lock(mu_);
    KpiWindow out;
    out.key = key;
    auto it = series_.find(key);
    if (it == series_.end()) return out;
    const auto& pts = it->second;
    auto lo = std::lower_bound(pts.begin(), pts.end(), from,
                               [](const KpiPoint& p, Timestamp t) { return p.ts < t; });
    auto hi = std::lower_bound(pts.begin(), pts.end(), to,
                               [](const KpiPoint& p, Timestamp t) { return p.ts < t; });
    out.points.assign(lo, hi);
    return out;
}

std::vector<std::string> TelemetryStore::keys() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : series_) out.push_back(k);
    return out;
}

size_t TelemetryStore::record_count() const {
    std::shared_lock lock(mu_);
    return count_;
}

namespace {

// Keeps records one-per-line and space-free.
std::string escape_text(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '%': out += "%25"; break;
            case ' ': out += "%20"; break;
            case '\n': out += "%0a"; break;
            case '\r': out += "%0d"; break;
            case '\t': out += "%09"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape_text(std::string_view s) {
    std::string out;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '%' && i + 2 < s.size()) {
            auto hex = from_hex(s.substr(i + 1, 2));
            if (!hex) throw TelemetryError("bad escape in text field");
            out += static_cast<char>((*hex)[0]);
            i += 2;
        } else {
            out += s[i];
        }
    }
    return out;
}

}  // namespace

std::string export_record(const TelemetryRecord& rec) {
    std::ostringstream os;
    os << rec.op.id << ' ' << (rec.op.region.empty() ? "-" : rec.op.region) << ' '
       << domain_name(rec.domain) << ' ' << kind_name(rec.kind) << ' ' << rec.key << ' ' << rec.ts
       << ' ';
    if (rec.kind == Kind::Kpi || rec.kind == Kind::TopologyEdge)
        os << format_double(rec.value);
    else
        os << escape_text(rec.text);
    os << ' ' << (rec.unit.empty() ? "-" : rec.unit) << ' ' << rec.schema.name << ' '
       << rec.schema.version.str();
    return os.str();
}

TelemetryRecord import_record(std::string_view line) {
    auto parts = split(line, ' ');
    if (parts.size() != 10) throw TelemetryError("record line must have 10 fields");
    TelemetryRecord rec;
    rec.op.id = std::string(parts[0]);
    rec.op.region = parts[1] == "-" ? "" : std::string(parts[1]);
    auto domain = domain_from_name(parts[2]);
    auto kind = kind_from_name(parts[3]);
    if (!domain || !kind) throw TelemetryError("bad domain/kind token");
    rec.domain = *domain;
    rec.kind = *kind;
    rec.key = std::string(parts[4]);
    auto ts = parse_decimal_u64(parts[5]);
    if (!ts) throw TelemetryError("bad timestamp");
    rec.ts = static_cast<Timestamp>(*ts);
    if (rec.kind == Kind::Kpi || rec.kind == Kind::TopologyEdge) {
        auto v = parse_double(parts[6]);
        if (!v) throw TelemetryError("bad value");
        rec.value = *v;
    } else {
        rec.text = unescape_text(parts[6]);
    }
    rec.unit = parts[7] == "-" ? "" : std::string(parts[7]);
    rec.schema.name = std::string(parts[8]);
    auto ver = split(parts[9], '.');
    if (ver.size() != 2) throw TelemetryError("bad schema version");
    auto major = parse_decimal_u64(ver[0]);
    auto minor = parse_decimal_u64(ver[1]);
    if (!major || !minor) throw TelemetryError("bad schema version");
    rec.schema.version = {static_cast<uint32_t>(*major), static_cast<uint32_t>(*minor)};
    return rec;
}

}  // namespace teleos::telemetry

#include <doctest.h>

#include <algorithm>
#include <set>

#include "teleos/agents.hpp"
#include "teleos/kernel.hpp"
#include "teleos/prng.hpp"

using namespace teleos;
using namespace teleos::kernel;

namespace {

struct Fixture {
    SchemaRegistry schemas;
    ledger::Ledger audit{keypair_from_u64(0x10)};
    Timestamp clock = 0;
    Kernel k{schemas, audit, [this] { return clock; }};
    OperatorId op_a{"op-a", "eu"};
    OperatorId op_b{"op-b", "us"};
    telemetry::TelemetryStore store_a;
    telemetry::TelemetryStore store_b;

    Fixture() {
        telemetry::register_builtin_schemas(schemas);
        agents::register_agent_schemas(schemas);
        k.attach_store(op_a, &store_a);
        k.attach_store(op_b, &store_b);
        fill(store_a, "latency_ms", 120.0);
        fill(store_a, "alarm_rate", 2.0);
        fill(store_b, "latency_ms", 95.0);
    }

    void fill(telemetry::TelemetryStore& store, const std::string& key, double base) {
        for (int t = 0; t < 60; ++t) {
            telemetry::TelemetryRecord rec;
            rec.op = &store == &store_a ? op_a : op_b;
            rec.kind = telemetry::Kind::Kpi;
            rec.key = key;
            rec.ts = t;
            rec.value = base + 0.1 * t;
            rec.schema = telemetry::builtin_schema_for(telemetry::Kind::Kpi);
            store.insert(rec);
        }
    }

    // A minimal deterministic agent: reads its own series, echoes a count.
    std::string register_probe(const std::string& id, uint64_t key_seed,
                               std::vector<DataScope> scopes,
                               int* run_counter = nullptr, bool fail = false) {
        auto keys = keypair_from_u64(key_seed);
        AgentDescriptor d;
        d.agent_id = id;
        d.kind = AgentKind::AnomalyDetector;
        d.version = {1, 0};
        d.input_schema = {"anomaly-input", {1, 0}};
        d.output_schema = {"anomaly-report", {1, 0}};
        d.scopes = std::move(scopes);
        d.publisher_key = keys.pub;
        sign_descriptor(d, keys.secret);
        auto impl = [run_counter, fail](const Payload& input, AgentContext& ctx) -> Payload {
            if (run_counter) ++*run_counter;
            if (fail) throw AgentError("induced fault");
            auto key = input.at("key").str;
            auto window = ctx.read_self(telemetry::Kind::Kpi, key, 0, 1000);
            return Payload{
                {"key", Value::text(key)},
                {"anomaly_count", Value::integer(0)},
                {"anomaly_timestamps", Value::number_list({})},
                {"max_score", Value::number(static_cast<double>(window.size()))},
                {"window", Value::integer(20)},
                {"threshold", Value::number(3.5)},
            };
        };
        return k.register_agent(d, impl, op_a, keys.secret);
    }
};

}  // namespace

TEST_CASE("valid registration lands one ledger entry") {
    Fixture f;
    const size_t before = f.audit.size();
    f.register_probe("probe", 0x21, {{"self", telemetry::Kind::Kpi, "latency*"}});
    CHECK(f.k.has_agent("probe"));
    REQUIRE(f.audit.size() == before + 1);
    CHECK(f.audit.entries().back().type == ledger::EntryType::Registration);
}

TEST_CASE("a flipped signature byte is rejected") {
    Fixture f;
    auto keys = keypair_from_u64(0x22);
    AgentDescriptor d;
    d.agent_id = "badsig";
    d.kind = AgentKind::ExperiencePredictor;
    d.version = {1, 0};
    d.input_schema = {"experience-input", {1, 0}};
    d.output_schema = {"experience-score", {1, 0}};
    d.publisher_key = keys.pub;
    sign_descriptor(d, keys.secret);
    d.signature[5] ^= 0x10;
    CHECK_THROWS_AS(
        f.k.register_agent(d, [](const Payload&, AgentContext&) { return Payload{}; }, f.op_a,
                           keys.secret),
        InvalidSignatureError);
}

TEST_CASE("duplicate registration is rejected") {
    Fixture f;
    f.register_probe("dup", 0x23, {{"self", telemetry::Kind::Kpi, "latency*"}});
    CHECK_THROWS_AS(f.register_probe("dup", 0x23, {{"self", telemetry::Kind::Kpi, "latency*"}}),
                    DuplicateAgentError);
}

TEST_CASE("a data-reading kind must declare scopes") {
    Fixture f;
    CHECK_THROWS_AS(f.register_probe("scopeless", 0x3f, {}), KernelError);
    CHECK_FALSE(f.k.has_agent("scopeless"));
}

TEST_CASE("unknown schema references are rejected") {
    Fixture f;
    auto keys = keypair_from_u64(0x24);
    AgentDescriptor d;
    d.agent_id = "noschema";
    d.kind = AgentKind::ExperiencePredictor;
    d.version = {1, 0};
    d.input_schema = {"not-registered", {9, 9}};
    d.output_schema = {"experience-score", {1, 0}};
    d.publisher_key = keys.pub;
    sign_descriptor(d, keys.secret);
    CHECK_THROWS_AS(
        f.k.register_agent(d, [](const Payload&, AgentContext&) { return Payload{}; }, f.op_a,
                           keys.secret),
        UnknownSchemaError);
}

TEST_CASE("mediated read honors scopes") {
    Fixture f;
    f.register_probe("reader", 0x25, {{"self", telemetry::Kind::Kpi, "latency*"}});

    auto window = f.k.mediated_read("reader", {f.op_a, telemetry::Kind::Kpi, "latency_ms", 0, 100});
    CHECK(window.size() == 60);

    // Another operator's data.
    CHECK_THROWS_AS(
        f.k.mediated_read("reader", {f.op_b, telemetry::Kind::Kpi, "latency_ms", 0, 100}),
        AuthorizationDeniedError);
    // Kind outside the scope.
    CHECK_THROWS_AS(
        f.k.mediated_read("reader", {f.op_a, telemetry::Kind::Alarm, "latency_ms", 0, 100}),
        AuthorizationDeniedError);
    // Key outside the pattern.
    CHECK_THROWS_AS(
        f.k.mediated_read("reader", {f.op_a, telemetry::Kind::Kpi, "alarm_rate", 0, 100}),
        AuthorizationDeniedError);

    // Every denial audited.
    size_t denials = 0;
    for (const auto& e : f.audit.entries())
        if (e.type == ledger::EntryType::AuthorizationDenied) ++denials;
    CHECK(denials == 3);

    // Authorization soundness: replay the access log against the scopes.
    for (const auto& rec : f.k.access_log())
        CHECK(rec.granted == f.k.scope_allows(rec.agent_id, rec.request));
}

TEST_CASE("publish sequences are per topic and monotonic") {
    Fixture f;
    f.register_probe("pub", 0x26, {{"self", telemetry::Kind::Kpi, "latency*"}});
    auto insight = f.k.invoke("pub", {{"key", Value::text("latency_ms")}});
    CHECK(f.k.publish("metrics/x", insight) == 1);
    CHECK(f.k.publish("metrics/x", insight) == 2);
    CHECK(f.k.publish("metrics/y", insight) == 1);
}

TEST_CASE("publish validates against the producer output schema") {
    Fixture f;
    f.register_probe("pub2", 0x27, {{"self", telemetry::Kind::Kpi, "latency*"}});
    auto insight = f.k.invoke("pub2", {{"key", Value::text("latency_ms")}});
    insight.payload.erase("anomaly_count");
    CHECK_THROWS_AS(f.k.publish("metrics/x", insight), OutputViolationError);
}

TEST_CASE("fan-out delivers identical ordered lists to all subscribers") {
    Fixture f;
    f.register_probe("pub3", 0x28, {{"self", telemetry::Kind::Kpi, "latency*"}});
    auto insight = f.k.invoke("pub3", {{"key", Value::text("latency_ms")}});

    auto s1 = f.k.subscribe("metrics/*");
    auto s2 = f.k.subscribe("metrics/cell7");
    for (int i = 0; i < 5; ++i) f.k.publish("metrics/cell7", insight);

    const auto& q1 = f.k.delivered(s1);
    const auto& q2 = f.k.delivered(s2);
    REQUIRE(q1.size() == 5);
    REQUIRE(q2.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(q1[i].sequence == i + 1);
        CHECK(q2[i].sequence == i + 1);
    }
}

TEST_CASE("no replay for late subscribers and literal match is exact") {
    Fixture f;
    f.register_probe("pub4", 0x29, {{"self", telemetry::Kind::Kpi, "latency*"}});
    auto insight = f.k.invoke("pub4", {{"key", Value::text("latency_ms")}});

    f.k.publish("sla/report", insight);
    auto sub = f.k.subscribe("sla/report");
    CHECK(f.k.delivered(sub).empty());  // published before subscribing

    f.k.publish("sla/reportX", insight);  // literal pattern must not match
    CHECK(f.k.delivered(sub).empty());
    f.k.publish("sla/report", insight);
    CHECK(f.k.delivered(sub).size() == 1);
}

TEST_CASE("topic pattern grammar") {
    CHECK(topic_pattern_valid("anomaly/cell7"));
    CHECK(topic_pattern_valid("anomaly/*"));
    CHECK(topic_pattern_valid("*"));
    CHECK_FALSE(topic_pattern_valid(""));
    CHECK_FALSE(topic_pattern_valid("a//b"));
    CHECK_FALSE(topic_pattern_valid("a/*x"));
    CHECK_FALSE(topic_pattern_valid("a/*/b"));

    CHECK(topic_matches("anomaly/*", "anomaly/cell7"));
    CHECK(topic_matches("anomaly/*", "anomaly/cell7/sub"));
    CHECK_FALSE(topic_matches("anomaly/*", "anomaly"));
    CHECK_FALSE(topic_matches("anomaly/*", "sla/report"));
    CHECK(topic_matches("*", "anything"));
    CHECK_FALSE(topic_matches("sla/report", "sla/reportX"));
    Fixture f;
    CHECK_THROWS_AS(f.k.subscribe("bad/*/pattern"), MalformedPatternError);
}

TEST_CASE("invoke validates input before the agent runs") {
    Fixture f;
    int runs = 0;
    f.register_probe("guarded", 0x2a, {{"self", telemetry::Kind::Kpi, "latency*"}}, &runs);
    CHECK_THROWS_AS(f.k.invoke("guarded", Payload{}), InputViolationError);
    CHECK(runs == 0);
    f.k.invoke("guarded", {{"key", Value::text("latency_ms")}});
    CHECK(runs == 1);
}

TEST_CASE("identical inputs give identical payloads and input digests") {
    Fixture f;
    f.register_probe("det", 0x2b, {{"self", telemetry::Kind::Kpi, "latency*"}});
    Payload input{{"key", Value::text("latency_ms")}};
    auto a = f.k.invoke("det", input);
    auto b = f.k.invoke("det", input);
    CHECK(a.payload == b.payload);
    CHECK(a.input_digest == b.input_digest);
    CHECK(a.input_digest == payload_digest(input));
}

TEST_CASE("insights re-verify from the audit surface") {
    Fixture f;
    f.register_probe("audited", 0x2c, {{"self", telemetry::Kind::Kpi, "latency*"}});
    Payload input{{"key", Value::text("latency_ms")}};
    f.k.invoke("audited", input);
    f.k.invoke("audited", input);

    REQUIRE_FALSE(f.k.insight_log().empty());
    for (const auto& ins : f.k.insight_log()) {
        const auto& d = f.k.descriptor(ins.agent_id);
        CHECK(verify_digest(insight_digest(ins), ins.signature, d.publisher_key));
        bool matched = false;
        for (const auto& inv : f.k.invocation_log())
            if (inv.input_digest == ins.input_digest && payload_digest(inv.input) == ins.input_digest)
                matched = true;
        CHECK(matched);
    }
}

TEST_CASE("agent failure surfaces as a typed error and is audited") {
    Fixture f;
    f.register_probe("flaky", 0x2d, {{"self", telemetry::Kind::Kpi, "latency*"}}, nullptr, true);
    const size_t before = f.audit.size();
    CHECK_THROWS_AS(f.k.invoke("flaky", {{"key", Value::text("latency_ms")}}),
                    AgentExecutionError);
    bool violation_logged = false;
    for (size_t i = before; i < f.audit.size(); ++i)
        if (f.audit.entries()[i].type == ledger::EntryType::Violation) violation_logged = true;
    CHECK(violation_logged);
}

TEST_CASE("health transitions follow the consecutive-error rule") {
    Fixture f;
    int runs = 0;
    auto keys = keypair_from_u64(0x2e);
    AgentDescriptor d;
    d.agent_id = "moody";
    d.kind = AgentKind::AnomalyDetector;
    d.version = {1, 0};
    d.input_schema = {"anomaly-input", {1, 0}};
    d.output_schema = {"anomaly-report", {1, 0}};
    d.scopes = {{"self", telemetry::Kind::Kpi, "latency*"}};
    d.publisher_key = keys.pub;
    sign_descriptor(d, keys.secret);
    bool fail_now = false;
    f.k.register_agent(
        d,
        [&fail_now, &runs](const Payload& input, AgentContext&) -> Payload {
            ++runs;
            if (fail_now) throw AgentError("scripted");
            return Payload{
                {"key", input.at("key")},
                {"anomaly_count", Value::integer(0)},
                {"anomaly_timestamps", Value::number_list({})},
                {"max_score", Value::number(0.0)},
                {"window", Value::integer(20)},
                {"threshold", Value::number(3.5)},
            };
        },
        f.op_a, keys.secret);

    Payload input{{"key", Value::text("latency_ms")}};
    CHECK(f.k.health_check("moody").status == HealthState::Healthy);
    CHECK(f.k.health_check("moody").last_invocation == -1);

    fail_now = true;
    for (int i = 0; i < 2; ++i) CHECK_THROWS(f.k.invoke("moody", input));
    CHECK(f.k.health_check("moody").status == HealthState::Degraded);
    fail_now = false;
    f.k.invoke("moody", input);  // success resets
    CHECK(f.k.health_check("moody").status == HealthState::Healthy);

    fail_now = true;
    for (int i = 0; i < 3; ++i) CHECK_THROWS(f.k.invoke("moody", input));
    CHECK(f.k.health_check("moody").status == HealthState::Failed);
    CHECK(f.k.health_check("moody").total_errors == 5);
    CHECK_THROWS_AS(f.k.health_check("ghost"), UnknownAgentError);
}

TEST_CASE("workflow chain triggers exactly one consumer invocation") {
    Fixture f;
    int detector_runs = 0, monitor_runs = 0;
    f.register_probe("chain-det", 0x2f, {{"self", telemetry::Kind::Kpi, "latency*"}},
                     &detector_runs);
    // The consumer is a second probe agent with a compatible input schema.
    auto keys = keypair_from_u64(0x30);
    AgentDescriptor d;
    d.agent_id = "chain-mon";
    d.kind = AgentKind::SlaMonitor;
    d.version = {1, 0};
    d.input_schema = {"sla-input", {1, 0}};
    d.output_schema = {"sla-report", {1, 0}};
    d.scopes = {{"self", telemetry::Kind::Kpi, "latency*"}};
    d.publisher_key = keys.pub;
    sign_descriptor(d, keys.secret);
    f.k.register_agent(
        d,
        [&monitor_runs](const Payload& input, AgentContext&) -> Payload {
            ++monitor_runs;
            return Payload{
                {"key", input.at("key")},
                {"compliant", Value::boolean(true)},
                {"observed_within_fraction", Value::number(1.0)},
                {"breach_forecast", Value::boolean(false)},
                {"horizon_breach_fraction", Value::number(0.0)},
            };
        },
        f.op_a, keys.secret);

    WorkflowSpec spec;
    spec.nodes = {"chain-det", "chain-mon"};
    spec.edges = {{f.k.topic_of("chain-det"), "chain-mon", {}}};
    f.k.compose_workflow(spec);

    f.k.invoke("chain-det", {{"key", Value::text("latency_ms")}});
    CHECK(detector_runs == 1);
    CHECK(monitor_runs == 1);  // exactly one triggered invocation
}

TEST_CASE("a diamond workflow triggers at most one invocation per edge") {
    Fixture f;
    std::map<std::string, int> runs;
    auto add = [&](const std::string& id, uint64_t seed) {
        f.register_probe(id, seed, {{"self", telemetry::Kind::Kpi, "latency*"}}, &runs[id]);
    };
    add("dia-a", 0x60);
    add("dia-b", 0x61);
    add("dia-c", 0x62);
    add("dia-d", 0x63);

    WorkflowSpec spec;
    spec.nodes = {"dia-a", "dia-b", "dia-c", "dia-d"};
    spec.edges = {
        {f.k.topic_of("dia-a"), "dia-b", {}},
        {f.k.topic_of("dia-a"), "dia-c", {}},
        {f.k.topic_of("dia-b"), "dia-d", {}},
        {f.k.topic_of("dia-c"), "dia-d", {}},
    };
    f.k.compose_workflow(spec);

    f.k.invoke("dia-a", {{"key", Value::text("latency_ms")}});
    CHECK(runs["dia-a"] == 1);
    CHECK(runs["dia-b"] == 1);
    CHECK(runs["dia-c"] == 1);
    CHECK(runs["dia-d"] == 2);  // one per incoming edge
    const int triggered = runs["dia-b"] + runs["dia-c"] + runs["dia-d"];
    CHECK(triggered <= static_cast<int>(spec.edges.size()));

    // A second stimulus gets a fresh cascade.
    f.k.invoke("dia-a", {{"key", Value::text("latency_ms")}});
    CHECK(runs["dia-d"] == 4);
}

TEST_CASE("invoke auto-publishes on the agent topic for subscribers") {
    Fixture f;
    f.register_probe("beacon", 0x64, {{"self", telemetry::Kind::Kpi, "latency*"}});
    auto sub = f.k.subscribe("anomaly-detector/*");
    auto insight = f.k.invoke("beacon", {{"key", Value::text("latency_ms")}});
    REQUIRE(f.k.delivered(sub).size() == 1);
    CHECK(f.k.delivered(sub)[0].topic == "anomaly-detector/beacon");
    CHECK(f.k.delivered(sub)[0].insight.payload == insight.payload);
}

TEST_CASE("workflow cycles are rejected with the cycle listed") {
    Fixture f;
    f.register_probe("cyc-a", 0x31, {{"self", telemetry::Kind::Kpi, "latency*"}});
    f.register_probe("cyc-b", 0x32, {{"self", telemetry::Kind::Kpi, "latency*"}});
    WorkflowSpec spec;
    spec.nodes = {"cyc-a", "cyc-b"};
    spec.edges = {
        {f.k.topic_of("cyc-a"), "cyc-b", {}},
        {f.k.topic_of("cyc-b"), "cyc-a", {}},
    };
    try {
        f.k.compose_workflow(spec);
        FAIL("cycle accepted");
    } catch (const WorkflowCycleError& e) {
        std::set<std::string> names(e.cycle.begin(), e.cycle.end());
        CHECK(names == std::set<std::string>{"cyc-a", "cyc-b"});
    }
}

TEST_CASE("edges outside the declared node set are rejected") {
    Fixture f;
    f.register_probe("in-set", 0x34, {{"self", telemetry::Kind::Kpi, "latency*"}});
    f.register_probe("outsider", 0x35, {{"self", telemetry::Kind::Kpi, "latency*"}});
    WorkflowSpec spec;
    spec.nodes = {"in-set"};
    spec.edges = {{f.k.topic_of("in-set"), "outsider", {}}};
    CHECK_THROWS_AS(f.k.compose_workflow(spec), KernelError);
}

TEST_CASE("an empty edge set is a valid workflow") {
    Fixture f;
    f.register_probe("lone", 0x33, {{"self", telemetry::Kind::Kpi, "latency*"}});
    WorkflowSpec spec;
    spec.nodes = {"lone"};
    CHECK(f.k.compose_workflow(spec) > 0);
    f.k.invoke("lone", {{"key", Value::text("latency_ms")}});  // no cascade, no throw
}

// Property: per-topic delivery order equals publish order for every
// subscriber under randomized interleavings.
TEST_CASE("delivery order equals publish order under random interleavings") {
    CounterRng rng(555);
    for (int trial = 0; trial < 30; ++trial) {
        Fixture f;
        f.register_probe("mix", 0x40, {{"self", telemetry::Kind::Kpi, "latency*"}});
        auto insight = f.k.invoke("mix", {{"key", Value::text("latency_ms")}});

        std::vector<std::string> topics{"t/a", "t/b", "t/c"};
        auto wide = f.k.subscribe("t/*");
        auto narrow = f.k.subscribe("t/b");

        std::map<std::string, std::vector<uint64_t>> published;
        const int publishes = 20;
        for (int i = 0; i < publishes; ++i) {
            const auto& topic = topics[rng.next_u64() % topics.size()];
            published[topic].push_back(f.k.publish(topic, insight));
        }

        std::map<std::string, std::vector<uint64_t>> seen;
        for (const auto& del : f.k.delivered(wide)) seen[del.topic].push_back(del.sequence);
        CHECK(seen == published);

        std::vector<uint64_t> narrow_seen;
        for (const auto& del : f.k.delivered(narrow)) narrow_seen.push_back(del.sequence);
        CHECK(narrow_seen == published["t/b"]);
    }
}

// Property: workflow cycle detection agrees with an independent
// topological-sort oracle on random graphs.
TEST_CASE("cycle detection matches a kahn topological sort oracle") {
    CounterRng rng(777);
    for (int trial = 0; trial < 60; ++trial) {
        const int n = 3 + static_cast<int>(rng.next_u64() % 5);
        Fixture f;
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) {
            std::string id = "g" + std::to_string(i);
            f.register_probe(id, 0x50 + i, {{"self", telemetry::Kind::Kpi, "latency*"}});
            ids.push_back(id);
        }
        WorkflowSpec spec;
        spec.nodes = ids;
        std::vector<std::pair<int, int>> arcs;
        const int edges = static_cast<int>(rng.next_u64() % (2 * n));
        for (int e = 0; e < edges; ++e) {
            int a = static_cast<int>(rng.next_u64() % n);
            int b = static_cast<int>(rng.next_u64() % n);
            if (a == b) continue;
            arcs.push_back({a, b});
            spec.edges.push_back({f.k.topic_of(ids[a]), ids[b], {}});
        }

        // Kahn's algorithm: the graph is a DAG iff all nodes drain.
        std::vector<int> indegree(n, 0);
        std::map<int, std::vector<int>> adj;
        for (auto [a, b] : arcs) {
            adj[a].push_back(b);
            ++indegree[b];
        }
        std::vector<int> queue;
        for (int i = 0; i < n; ++i)
            if (indegree[i] == 0) queue.push_back(i);
        int drained = 0;
        while (!queue.empty()) {
            int cur = queue.back();
            queue.pop_back();
            ++drained;
            for (int next : adj[cur])
                if (--indegree[next] == 0) queue.push_back(next);
        }
        const bool is_dag = drained == n;

        bool accepted = true;
        try {
            f.k.compose_workflow(spec);
        } catch (const WorkflowCycleError&) {
            accepted = false;
        }
        CHECK(accepted == is_dag);
    }
}

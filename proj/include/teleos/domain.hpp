#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "teleos/codec.hpp"
#include "teleos/crypto.hpp"

namespace teleos {

using Timestamp = int64_t;  // virtual milliseconds since scenario epoch 0

struct OperatorId {
    std::string id;
    std::string region;

    bool operator==(const OperatorId& o) const { return id == o.id; }
    auto operator<=>(const OperatorId& o) const { return id <=> o.id; }
};

enum class SemType { Number, Integer, String, Boolean, Timestamp, ListOfNumber };

const char* sem_type_name(SemType t);
std::optional<SemType> sem_type_from_name(std::string_view name);

// Closed unit vocabulary; the empty tag means "no unit declared".
bool is_known_unit(std::string_view unit);

// A single payload value: a tagged union plus an optional unit tag. Values
// are immutable once built through the factories.
struct Value {
    SemType type = SemType::Number;
    double num = 0.0;
    int64_t i64 = 0;
    std::string str;
    bool flag = false;
    std::vector<double> list;
    std::string unit;  // empty = unspecified; checked only when both sides declare one

    static Value number(double v, std::string unit = "");
    static Value integer(int64_t v);
    static Value text(std::string v);
    static Value boolean(bool v);
    static Value timestamp(Timestamp v);
    static Value number_list(std::vector<double> v);

    bool operator==(const Value& o) const;
};

// Field ordering of std::map doubles as the canonical payload field order.
using Payload = std::map<std::string, Value>;

struct SchemaVersion {
    uint32_t major = 1;
    uint32_t minor = 0;

    bool operator==(const SchemaVersion&) const = default;
    auto operator<=>(const SchemaVersion&) const = default;
    std::string str() const { return std::to_string(major) + "." + std::to_string(minor); }
};

struct SchemaField {
    std::string name;
    SemType type = SemType::Number;
    bool required = true;
    std::string unit;

    bool operator==(const SchemaField&) const = default;
};

struct SchemaDef {
    std::string name;
    SchemaVersion version;
    std::vector<SchemaField> fields;  // declaration order is significant

    bool operator==(const SchemaDef&) const = default;
    const SchemaField* find_field(std::string_view field_name) const;
};

struct SchemaRef {
    std::string name;
    SchemaVersion version;

    bool operator==(const SchemaRef&) const = default;
    auto operator<=>(const SchemaRef&) const = default;
    std::string str() const { return name + "@" + version.str(); }
};

enum class ViolationReason { Missing, WrongType, WrongUnit, UnknownField };

const char* violation_reason_name(ViolationReason r);

struct ContractViolation {
    std::string field;
    ViolationReason reason;

    bool operator==(const ContractViolation&) const = default;
};

struct SchemaConflictError : std::runtime_error {
    explicit SchemaConflictError(const SchemaRef& ref)
        : std::runtime_error("schema already registered with different body: " + ref.str()) {}
};

struct UnknownSchemaError : std::runtime_error {
    explicit UnknownSchemaError(const SchemaRef& ref)
        : std::runtime_error("unknown schema: " + ref.str()) {}
};

struct MalformedSchemaError : std::runtime_error {
    explicit MalformedSchemaError(const std::string& what) : std::runtime_error(what) {}
};

enum class BreakingKind {
    FieldRemoved,
    FieldRetyped,
    FieldUnitChanged,
    FieldMadeRequired,
    RequiredFieldAdded,
    MajorVersionChanged,
    VersionNotIncreased,
};

const char* breaking_kind_name(BreakingKind k);

struct BreakingChange {
    BreakingKind kind;
    std::string field;  // empty for version-level changes

    bool operator==(const BreakingChange&) const = default;
};

struct CompatibilityResult {
    bool compatible = false;
    std::vector<BreakingChange> changes;
};

// Read-mostly registry: lookups take a shared lock, registrations exclusive.
class SchemaRegistry {
public:
    // Idempotent for byte-identical definitions; conflicting re-registration
    // of an existing (name, version) throws SchemaConflictError.
    SchemaRef register_schema(const SchemaDef& def);

    SchemaDef get(const SchemaRef& ref) const;  // throws UnknownSchemaError
    bool contains(const SchemaRef& ref) const;
    std::vector<SchemaRef> list() const;

    // Canonical text form: one schema per block, keys sorted, stable across
    // runs. Suitable for export alongside scenario reports.
    std::string export_text() const;

private:
    mutable std::shared_mutex mu_;
    std::map<std::pair<std::string, SchemaVersion>, SchemaDef> defs_;
};

// ok == empty vector. Violations are sorted by field name (then reason) so
// identical inputs always produce identical output.
std::vector<ContractViolation> validate_payload(const SchemaDef& schema, const Payload& p);
std::vector<ContractViolation> validate_payload(const SchemaRegistry& reg, const SchemaRef& ref,
                                                const Payload& p);

// Compatibility rule: a new revision is compatible iff it keeps every old
// field (same type, unit, and no optional->required flip), adds only optional
// fields, stays on the same major version, and does not decrease the version.
// Any field addition must come with a minor version increase. Throws on name
// mismatch.
CompatibilityResult check_compatibility(const SchemaDef& older, const SchemaDef& newer);

// Canonical encoding of a payload: field count, then per field (sorted by
// name) the name, type tag, unit, and value. Basis for input digests.
void encode_payload(Encoder& enc, const Payload& p);
Digest payload_digest(const Payload& p);

}  // namespace teleos

#include "teleos/domain.hpp"

#include <algorithm>
#include <set>
#include <mutex>
#include <sstream>

namespace teleos {

const char* sem_type_name(SemType t) {
    switch (t) {
        case SemType::Number: return "number";
        case SemType::Integer: return "integer";
        case SemType::String: return "string";
        case SemType::Boolean: return "boolean";
        case SemType::Timestamp: return "timestamp";
        case SemType::ListOfNumber: return "list-of-number";
    }
    return "?";
}

std::optional<SemType> sem_type_from_name(std::string_view name) {
    if (name == "number") return SemType::Number;
    if (name == "integer") return SemType::Integer;
    if (name == "string") return SemType::String;
    if (name == "boolean") return SemType::Boolean;
    if (name == "timestamp") return SemType::Timestamp;
    if (name == "list-of-number") return SemType::ListOfNumber;
    return std::nullopt;
}

bool is_known_unit(std::string_view unit) {
    return unit.empty() || unit == "ms" || unit == "mbps" || unit == "percent" ||
           unit == "count" || unit == "dimensionless";
}

Value Value::number(double v, std::string unit) {
    Value out;
    out.type = SemType::Number;
    out.num = v;
    out.unit = std::move(unit);
    return out;
}

Value Value::integer(int64_t v) {
    Value out;
    out.type = SemType::Integer;
    out.i64 = v;
    return out;
}

Value Value::text(std::string v) {
    Value out;
    out.type = SemType::String;
    out.str = std::move(v);
    return out;
}

Value Value::boolean(bool v) {
    Value out;
    out.type = SemType::Boolean;
    out.flag = v;
    return out;
}

Value Value::timestamp(Timestamp v) {
    Value out;
    out.type = SemType::Timestamp;
    out.i64 = v;
    return out;
}

Value Value::number_list(std::vector<double> v) {
    Value out;
    out.type = SemType::ListOfNumber;
    out.list = std::move(v);
    return out;
}

bool Value::operator==(const Value& o) const {
    if (type != o.type || unit != o.unit) return false;
    switch (type) {
        case SemType::Number: return num == o.num;
        case SemType::Integer:
        case SemType::Timestamp: return i64 == o.i64;
        case SemType::String: return str == o.str;
        case SemType::Boolean: return flag == o.flag;
        case SemType::ListOfNumber: return list == o.list;
    }
    return false;
}

const SchemaField* SchemaDef::find_field(std::string_view field_name) const {
    for (const auto& f : fields)
        if (f.name == field_name) return &f;
    return nullptr;
}

const char* violation_reason_name(ViolationReason r) {
    switch (r) {
        case ViolationReason::Missing: return "missing";
        case ViolationReason::WrongType: return "wrong-type";
        case ViolationReason::WrongUnit: return "wrong-unit";
        case ViolationReason::UnknownField: return "unknown-field";
    }
    return "?";
}

const char* breaking_kind_name(BreakingKind k) {
    switch (k) {
        case BreakingKind::FieldRemoved: return "field-removed";
        case BreakingKind::FieldRetyped: return "field-retyped";
        case BreakingKind::FieldUnitChanged: return "field-unit-changed";
        case BreakingKind::FieldMadeRequired: return "field-made-required";
        case BreakingKind::RequiredFieldAdded: return "required-field-added";
        case BreakingKind::MajorVersionChanged: return "major-version-changed";
        case BreakingKind::VersionNotIncreased: return "version-not-increased";
    }
    return "?";
}

namespace {

void check_well_formed(const SchemaDef& def) {
    if (def.name.empty()) throw MalformedSchemaError("schema name must be non-empty");
    std::set<std::string> seen;
    for (const auto& f : def.fields) {
        if (f.name.empty()) throw MalformedSchemaError("schema field name must be non-empty");
        if (!seen.insert(f.name).second)
            throw MalformedSchemaError("duplicate field name: " + f.name);
        if (!is_known_unit(f.unit))
            throw MalformedSchemaError("unknown unit tag '" + f.unit + "' on field " + f.name);
    }
}

}  // namespace

SchemaRef SchemaRegistry::register_schema(const SchemaDef& def) {
    check_well_formed(def);
    SchemaRef ref{def.name, def.version};
    std::unique_lock lock(mu_);
    auto key = std::make_pair(def.name, def.version);
    auto it = defs_.find(key);
    if (it != defs_.end()) {
        if (it->second == def) return ref;  // idempotent
        throw SchemaConflictError(ref);
    }
    defs_.emplace(key, def);
    return ref;
}

SchemaDef SchemaRegistry::get(const SchemaRef& ref) const {
    std::shared_lock lock(mu_);
    auto it = defs_.find(std::make_pair(ref.name, ref.version));
    if (it == defs_.end()) throw UnknownSchemaError(ref);
    return it->second;
}

bool SchemaRegistry::contains(const SchemaRef& ref) const {
    std::shared_lock lock(mu_);
    return defs_.count(std::make_pair(ref.name, ref.version)) > 0;
}

std::vector<SchemaRef> SchemaRegistry::list() const {
    std::shared_lock lock(mu_);
    std::vector<SchemaRef> out;
    for (const auto& [key, def] : defs_) out.push_back(SchemaRef{key.first, key.second});
    return out;
}

std::string SchemaRegistry::export_text() const {
    std::shared_lock lock(mu_);
    std::ostringstream os;
    for (const auto& [key, def] : defs_) {
        os << "schema " << def.name << " " << def.version.str() << "\n";
        auto fields = def.fields;
        std::sort(fields.begin(), fields.end(),
                  [](const SchemaField& a, const SchemaField& b) { return a.name < b.name; });
        for (const auto& f : fields) {
            os << "  field " << f.name << " type=" << sem_type_name(f.type)
               << " required=" << (f.required ? "true" : "false");
            if (!f.unit.empty()) os << " unit=" << f.unit;
            os << "\n";
        }
    }
    return os.str();
}

std::vector<ContractViolation> validate_payload(const SchemaDef& schema, const Payload& p) {
    std::vector<ContractViolation> out;
    for (const auto& f : schema.fields) {
        auto it = p.find(f.name);
        if (it == p.end()) {
            if (f.required) out.push_back({f.name, ViolationReason::Missing});
            continue;
        }
        if (it->second.type != f.type) {
            out.push_back({f.name, ViolationReason::WrongType});
            continue;
        }
        // Unit mismatch only when both schema and value declare one; a bare
        // value passes a unit-tagged field. Conversion is ingest's job.
        if (!f.unit.empty() && !it->second.unit.empty() && f.unit != it->second.unit)
            out.push_back({f.name, ViolationReason::WrongUnit});
    }
    for (const auto& [name, value] : p) {
        if (schema.find_field(name) == nullptr)
            out.push_back({name, ViolationReason::UnknownField});
    }
    std::sort(out.begin(), out.end(), [](const ContractViolation& a, const ContractViolation& b) {
        if (a.field != b.field) return a.field < b.field;
        return static_cast<int>(a.reason) < static_cast<int>(b.reason);
    });
    return out;
}

std::vector<ContractViolation> validate_payload(const SchemaRegistry& reg, const SchemaRef& ref,
                                                const Payload& p) {
    return validate_payload(reg.get(ref), p);
}

CompatibilityResult check_compatibility(const SchemaDef& older, const SchemaDef& newer) {
    if (older.name != newer.name)
        throw MalformedSchemaError("compatibility check across different schema names: " +
                                   older.name + " vs " + newer.name);
    CompatibilityResult res;
    if (newer.version.major != older.version.major)
        res.changes.push_back({BreakingKind::MajorVersionChanged, ""});
    else if (newer.version < older.version)
        res.changes.push_back({BreakingKind::VersionNotIncreased, ""});

    bool added_fields = false;
    for (const auto& of : older.fields) {
        const SchemaField* nf = newer.find_field(of.name);
        if (nf == nullptr) {
            res.changes.push_back({BreakingKind::FieldRemoved, of.name});
            continue;
        }
        if (nf->type != of.type) res.changes.push_back({BreakingKind::FieldRetyped, of.name});
        if (nf->unit != of.unit) res.changes.push_back({BreakingKind::FieldUnitChanged, of.name});
        if (nf->required && !of.required)
            res.changes.push_back({BreakingKind::FieldMadeRequired, of.name});
    }
    for (const auto& nf : newer.fields) {
        if (older.find_field(nf.name) != nullptr) continue;
        added_fields = true;
        if (nf.required) res.changes.push_back({BreakingKind::RequiredFieldAdded, nf.name});
    }
    if (added_fields && newer.version == older.version)
        res.changes.push_back({BreakingKind::VersionNotIncreased, ""});

    res.compatible = res.changes.empty();
    return res;
}

void encode_payload(Encoder& enc, const Payload& p) {
    enc.put_u64(p.size());
    for (const auto& [name, v] : p) {
        enc.put_str(name);
        enc.put_u64(static_cast<uint64_t>(v.type));
        enc.put_str(v.unit);
        switch (v.type) {
            case SemType::Number: enc.put_f64(v.num); break;
            case SemType::Integer:
            case SemType::Timestamp: enc.put_i64(v.i64); break;
            case SemType::String: enc.put_str(v.str); break;
            case SemType::Boolean: enc.put_bool(v.flag); break;
            case SemType::ListOfNumber:
                enc.put_u64(v.list.size());
                for (double x : v.list) enc.put_f64(x);
                break;
        }
    }
}

Digest payload_digest(const Payload& p) {
    Encoder enc;
    encode_payload(enc, p);
    return sha256(enc.bytes());
}

}  // namespace teleos

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "teleos/crypto.hpp"
#include "teleos/domain.hpp"

namespace teleos::ledger {

enum class EntryType {
    Registration,
    Invocation,
    Insight,
    RoundStart,
    UpdateCommitment,
    RoundResult,
    RoundAbort,
    AuthorizationDenied,
    Violation,
};

const char* entry_type_name(EntryType t);
std::optional<EntryType> entry_type_from_name(std::string_view s);

// entry_hash = sha256(canonical(index, timestamp, type token, payload_digest,
// prev_hash)); the signature is Ed25519 over entry_hash. signer is the hex
// encoding of the signer's public key, which makes an exported chain
// self-verifying.
struct LedgerEntry {
    uint64_t index = 0;
    Timestamp ts = 0;
    EntryType type = EntryType::Registration;
    Digest payload_digest{};
    Digest prev_hash{};
    Digest entry_hash{};
    std::string signer;
    Signature signature{};

    bool operator==(const LedgerEntry&) const = default;
};

struct LedgerError : std::runtime_error {
    explicit LedgerError(const std::string& what) : std::runtime_error(what) {}
};

// First entry chains from sha256("GENESIS").
Digest genesis_hash();

Digest compute_entry_hash(const LedgerEntry& e);

struct VerifyResult {
    bool ok = true;
    uint64_t first_bad_index = 0;  // meaningful when !ok

    static VerifyResult pass() { return {true, 0}; }
    static VerifyResult fail(uint64_t idx) { return {false, idx}; }
};

// Appends serialize through the owning event loop; entries are immutable
// after creation. The signer id is the hex public key, which keeps exported
// chains self-verifying.
class Ledger {
public:
    explicit Ledger(KeyPair signer);

    const LedgerEntry& append(std::span<const uint8_t> payload, EntryType type, Timestamp ts);
    const LedgerEntry& append_digest(const Digest& payload_digest, EntryType type, Timestamp ts);

    const std::vector<LedgerEntry>& entries() const { return entries_; }
    size_t size() const { return entries_.size(); }
    const PublicKey& public_key() const { return signer_.pub; }

private:
    KeyPair signer_;
    std::string signer_id_;
    std::vector<LedgerEntry> entries_;
};

// Recomputes every hash, signature, chain link, index, and timestamp
// ordering. Pure function of the entry bytes; entries from any source.
// Runs entry checks in parallel when OpenMP is enabled — the verdict is
// the minimum failing index either way.
VerifyResult verify_chain(const std::vector<LedgerEntry>& entries);

// Signature check over entry_hash only (no chain context).
bool verify_entry(const LedgerEntry& e, const PublicKey& pk);

// Export format, one entry per line, single-space separated:
//   index ts type payload_digest_hex prev_hash_hex entry_hash_hex signer sig_hex
// All hex lowercase. Export requires a chain that verifies.
std::string export_chain(const std::vector<LedgerEntry>& entries);

struct ImportError : std::runtime_error {
    uint64_t line_index;  // 0-based line (== expected entry index) of the failure
    ImportError(uint64_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_index(line) {}
};

// Structural parse only; chain/signature verdicts come from verify_chain.
std::vector<LedgerEntry> import_chain(std::string_view text);

}  // namespace teleos::ledger

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace teleos {

// Thin wrapper over libsodium. Algorithm choices, pinned by test vectors in
// tests/test_crypto.cpp so independent implementations interoperate:
//   - digest:    SHA-256 (FIPS 180-4)
//   - signature: Ed25519 (RFC 8032), always over a 32-byte SHA-256 digest
using Digest = std::array<uint8_t, 32>;
using Signature = std::array<uint8_t, 64>;
using PublicKey = std::array<uint8_t, 32>;
using SecretKey = std::array<uint8_t, 64>;

struct KeyPair {
    PublicKey pub{};
    SecretKey secret{};
};

// Idempotent; every entry point that touches libsodium calls it first.
void crypto_init();

Digest sha256(std::span<const uint8_t> data);
Digest sha256(std::string_view data);

// Deterministic keypair from a 32-byte seed. Scenario keys are derived from
// the scenario seed so runs are reproducible end to end.
KeyPair keypair_from_seed(const std::array<uint8_t, 32>& seed);
KeyPair keypair_from_u64(uint64_t seed);

Signature sign_digest(const Digest& d, const SecretKey& sk);
bool verify_digest(const Digest& d, const Signature& sig, const PublicKey& pk);

std::string digest_hex(const Digest& d);

// First 8 digest bytes as a little-endian u64; handy for deriving stream
// seeds from string identities.
uint64_t digest_prefix_u64(const Digest& d);

}  // namespace teleos

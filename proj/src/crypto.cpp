#include "teleos/crypto.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

#include "teleos/codec.hpp"

namespace teleos {

void crypto_init() {
    static const bool ok = [] { return sodium_init() >= 0; }();
    if (!ok) throw std::runtime_error("libsodium initialization failed");
}

Digest sha256(std::span<const uint8_t> data) {
    crypto_init();
    Digest d;
    crypto_hash_sha256(d.data(), data.data(), data.size());
    return d;
}

Digest sha256(std::string_view data) {
    return sha256(std::span<const uint8_t>(
        reinterpret_cast<const uint8_t*>(data.data()), data.size()));
}

KeyPair keypair_from_seed(const std::array<uint8_t, 32>& seed) {
    crypto_init();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pub.data(), kp.secret.data(), seed.data());
    return kp;
}

KeyPair keypair_from_u64(uint64_t seed) {
    std::array<uint8_t, 32> s{};
    for (int i = 0; i < 8; ++i) s[i] = static_cast<uint8_t>(seed >> (8 * i));
    // Spread the 8 seed bytes over the full width so distinct u64 seeds give
    // unrelated key seeds.
    Digest d = sha256(std::span<const uint8_t>(s.data(), 8));
    return keypair_from_seed(d);
}

Signature sign_digest(const Digest& d, const SecretKey& sk) {
    crypto_init();
    Signature sig;
    crypto_sign_detached(sig.data(), nullptr, d.data(), d.size(), sk.data());
    return sig;
}

bool verify_digest(const Digest& d, const Signature& sig, const PublicKey& pk) {
    crypto_init();
    return crypto_sign_verify_detached(sig.data(), d.data(), d.size(), pk.data()) == 0;
}

std::string digest_hex(const Digest& d) { return to_hex(d); }

uint64_t digest_prefix_u64(const Digest& d) {
    uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= static_cast<uint64_t>(d[i]) << (8 * i);
    return out;
}

}  // namespace teleos

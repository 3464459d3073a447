#include <doctest.h>

#include "teleos/codec.hpp"
#include "teleos/ledger.hpp"
#include "teleos/prng.hpp"
#include "teleos/reference.hpp"

using namespace teleos;
using namespace teleos::ledger;

namespace {

Ledger make_ledger(size_t entries, uint64_t key_seed = 11) {
    Ledger log(keypair_from_u64(key_seed));
    for (size_t i = 0; i < entries; ++i) {
        Encoder enc;
        enc.put_u64(i);
        enc.put_str("event");
        log.append(enc.bytes(), static_cast<EntryType>(i % 9), static_cast<Timestamp>(i * 10));
    }
    return log;
}

}  // namespace

TEST_CASE("genesis entry chains from the GENESIS digest") {
    auto log = make_ledger(1);
    CHECK(log.entries()[0].prev_hash == sha256(std::string_view("GENESIS")));
    CHECK(log.entries()[0].index == 0);
}

TEST_CASE("each entry chains to the previous entry hash") {
    auto log = make_ledger(5);
    for (size_t i = 1; i < log.size(); ++i)
        CHECK(log.entries()[i].prev_hash == log.entries()[i - 1].entry_hash);
}

TEST_CASE("clock regression is rejected") {
    Ledger log(keypair_from_u64(3));
    std::vector<uint8_t> p{1};
    log.append(p, EntryType::Insight, 100);
    CHECK_THROWS_AS(log.append(p, EntryType::Insight, 99), LedgerError);
    log.append(p, EntryType::Insight, 100);  // equal timestamps allowed
}

TEST_CASE("an untampered chain verifies, serial and parallel") {
    auto log = make_ledger(100);
    CHECK(verify_chain(log.entries()).ok);
    CHECK(reference::verify_chain_serial(log.entries()).ok);
    CHECK(verify_chain({}).ok);  // empty chain is valid
}

TEST_CASE("flipping one payload digest byte is caught at that index") {
    auto log = make_ledger(60);
    auto entries = log.entries();
    entries[42].payload_digest[7] ^= 0x40;
    auto verdict = verify_chain(entries);
    REQUIRE_FALSE(verdict.ok);
    CHECK(verdict.first_bad_index == 42);
    auto serial = reference::verify_chain_serial(entries);
    REQUIRE_FALSE(serial.ok);
    CHECK(serial.first_bad_index == 42);
}

TEST_CASE("deleting an entry breaks contiguity at its index") {
    auto log = make_ledger(30);
    auto entries = log.entries();
    entries.erase(entries.begin() + 10);
    auto verdict = verify_chain(entries);
    REQUIRE_FALSE(verdict.ok);
    CHECK(verdict.first_bad_index == 10);
}

TEST_CASE("verify_entry checks the signature against the given key") {
    auto log = make_ledger(2, 21);
    const auto& e = log.entries()[0];
    CHECK(verify_entry(e, log.public_key()));
    CHECK_FALSE(verify_entry(e, keypair_from_u64(22).pub));
    auto mutated = e;
    mutated.entry_hash[0] ^= 0x01;
    CHECK_FALSE(verify_entry(mutated, log.public_key()));
}

TEST_CASE("export/import round trips byte for byte") {
    auto log = make_ledger(25);
    auto text = export_chain(log.entries());
    auto back = import_chain(text);
    REQUIRE(back.size() == log.size());
    for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == log.entries()[i]);
    CHECK(export_chain(back) == text);
    CHECK(verify_chain(back).ok);
}

TEST_CASE("export refuses a broken chain") {
    auto log = make_ledger(5);
    auto entries = log.entries();
    entries[2].ts += 1;  // breaks the hash
    CHECK_THROWS_AS(export_chain(entries), LedgerError);
}

TEST_CASE("a truncated file fails at the truncated line") {
    auto text = export_chain(make_ledger(10).entries());
    auto cut = text.substr(0, text.size() - 30);
    try {
        import_chain(cut);
        FAIL("import accepted a truncated file");
    } catch (const ImportError& e) {
        CHECK(e.line_index == 9);
    }
}

TEST_CASE("a hand-edited hex digit imports but fails verification") {
    auto text = export_chain(make_ledger(12).entries());
    // Edit one digit in line 4's payload digest field.
    auto lines_start = [&](int line) {
        size_t pos = 0;
        for (int i = 0; i < line; ++i) pos = text.find('\n', pos) + 1;
        return pos;
    };
    size_t pos = lines_start(4);
    // Skip "index ts type " to land inside the payload digest.
    for (int spaces = 0; spaces < 3; ++spaces) pos = text.find(' ', pos) + 1;
    text[pos] = text[pos] == 'a' ? 'b' : 'a';
    auto entries = import_chain(text);  // structurally fine
    auto verdict = verify_chain(entries);
    REQUIRE_FALSE(verdict.ok);
    CHECK(verdict.first_bad_index == 4);
}

TEST_CASE("empty input imports as an empty valid chain") {
    auto entries = import_chain("");
    CHECK(entries.empty());
    CHECK(verify_chain(entries).ok);
}

// Every single-bit mutation of a small serialized ledger must be caught by
// import or verify_chain, at the mutated entry's index.
TEST_CASE("exhaustive single-bit tamper detection on a small ledger") {
    auto log = make_ledger(3, 31);
    const std::string text = export_chain(log.entries());

    for (size_t byte_pos = 0; byte_pos < text.size(); ++byte_pos) {
        // The entry index a byte belongs to = newlines before it.
        uint64_t expected_index = 0;
        for (size_t i = 0; i < byte_pos; ++i)
            if (text[i] == '\n') ++expected_index;

        for (int bit = 0; bit < 8; ++bit) {
            std::string tampered = text;
            tampered[byte_pos] = static_cast<char>(tampered[byte_pos] ^ (1 << bit));
            uint64_t reported = 1ull << 62;
            try {
                auto entries = import_chain(tampered);
                auto verdict = verify_chain(entries);
                if (!verdict.ok) reported = verdict.first_bad_index;
            } catch (const ImportError& e) {
                reported = e.line_index;
            }
            REQUIRE_MESSAGE(reported != (1ull << 62),
                            "undetected bit flip at byte ", byte_pos, " bit ", bit);
            REQUIRE_MESSAGE(reported == expected_index, "bit flip at byte ", byte_pos, " bit ",
                            bit, " reported index ", reported, " expected ", expected_index);
        }
    }
}

TEST_CASE("parallel and serial verification agree on random tampering") {
    auto log = make_ledger(50, 41);
    CounterRng rng(1000);
    for (int trial = 0; trial < 60; ++trial) {
        auto entries = log.entries();
        const size_t victim = rng.next_u64() % entries.size();
        auto& e = entries[victim];
        switch (rng.next_u64() % 5) {
            case 0: e.payload_digest[rng.next_u64() % 32] ^= 1 << (rng.next_u64() % 8); break;
            case 1: e.prev_hash[rng.next_u64() % 32] ^= 1 << (rng.next_u64() % 8); break;
            case 2: e.entry_hash[rng.next_u64() % 32] ^= 1 << (rng.next_u64() % 8); break;
            case 3: e.signature[rng.next_u64() % 64] ^= 1 << (rng.next_u64() % 8); break;
            case 4: e.ts += 1 + rng.next_u64() % 100; break;
        }
        auto parallel = verify_chain(entries);
        auto serial = reference::verify_chain_serial(entries);
        REQUIRE_FALSE(parallel.ok);
        REQUIRE_FALSE(serial.ok);
        CHECK(parallel.first_bad_index == serial.first_bad_index);
        CHECK(parallel.first_bad_index == victim);
    }
}

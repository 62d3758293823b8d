#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "trail/ledger.hpp"

using namespace trail;

namespace {

LedgerRecord rec(std::uint64_t coin, WalletId from, WalletId to, std::uint64_t seq = 0,
                 Round round = 0) {
  return LedgerRecord{CoinId{coin}, from, to, seq, Trail{{from.is_sentinel() ? to.shard : from.shard}},
                      round};
}

WalletId w(std::uint32_t s, std::uint32_t i) { return WalletId{{s}, i}; }

// Independent reading of presence: replay the coin's records and track the
// set of wallets that currently hold it.
bool present_by_replay(const std::vector<LedgerRecord>& records, CoinId coin, WalletId wallet) {
  bool inside = false;
  for (const LedgerRecord& r : records) {
    if (r.coin != coin) continue;
    if (r.sWallet == wallet) inside = false;
    if (r.tWallet == wallet) inside = true;
  }
  return inside;
}

}  // namespace

TEST_CASE("presence after a chain of moves") {
  Ledger l;
  l.record(rec(1, WalletId::none(), w(0, 0)));
  CHECK(l.is_present(CoinId{1}, w(0, 0)));
  l.record(rec(1, w(0, 0), w(1, 2), 1));
  CHECK_FALSE(l.is_present(CoinId{1}, w(0, 0)));
  CHECK(l.is_present(CoinId{1}, w(1, 2)));
  CHECK_FALSE(l.is_present(CoinId{2}, w(0, 0)));
  CHECK_THROWS_AS(l.get_trail(CoinId{2}), UnknownCoin);
}

TEST_CASE("is_present agrees with a full replay (oracle)") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Ledger l;
    std::vector<LedgerRecord> all;
    for (int i = 0; i < 40; ++i) {
      const std::uint64_t coin = rng() % 4;
      // Arbitrary moves, including ones that break continuity.
      const WalletId from = rng() % 5 == 0 ? WalletId::none() : w(rng() % 3, rng() % 2);
      const WalletId to = w(rng() % 3, rng() % 2);
      const LedgerRecord r = rec(coin, from, to, i);
      l.record(r);
      all.push_back(r);
    }
    for (std::uint64_t c = 0; c < 4; ++c) {
      for (std::uint32_t s = 0; s < 3; ++s) {
        for (std::uint32_t i = 0; i < 2; ++i) {
          CHECK(l.is_present(CoinId{c}, w(s, i)) == present_by_replay(all, CoinId{c}, w(s, i)));
        }
      }
    }
  }
}

TEST_CASE("record_once skips identical tuples regardless of round") {
  Ledger l;
  CHECK(l.record_once(rec(1, WalletId::none(), w(0, 0), 0, 3)));
  CHECK_FALSE(l.record_once(rec(1, WalletId::none(), w(0, 0), 0, 9)));
  CHECK(l.size() == 1);
  CHECK(l.record_once(rec(1, w(0, 0), w(0, 1), 1)));
}

TEST_CASE("trailing internal moves stop at the last cross-shard record") {
  Ledger l;
  l.record(rec(1, WalletId::none(), w(0, 0)));
  l.record(rec(1, w(0, 0), w(1, 0), 1));
  l.record(rec(1, w(1, 0), w(1, 1), 2));
  l.record(rec(1, w(1, 1), w(1, 0), 3));
  const auto tail = l.trailing_internal_moves(CoinId{1});
  REQUIRE(tail.size() == 2);
  CHECK(tail[0].seq == 2);
  CHECK(tail[1].seq == 3);
}

TEST_CASE("continuity check") {
  std::vector<LedgerRecord> ok{rec(1, WalletId::none(), w(0, 0)), rec(2, WalletId::none(), w(1, 0)),
                               rec(1, w(0, 0), w(1, 1), 1), rec(1, w(1, 1), w(0, 1), 2)};
  CHECK_FALSE(check_ownership_continuity(ok).has_value());

  auto broken = ok;
  broken.push_back(rec(1, w(0, 0), w(2, 0), 3));  // spends from a wallet it already left
  const auto v = check_ownership_continuity(broken);
  REQUIRE(v.has_value());
  CHECK(v->position == 4);
  CHECK(v->coin == CoinId{1});
  CHECK(v->expected == w(0, 1));
  CHECK(v->found == w(0, 0));
}

TEST_CASE("merging ledgers collapses copies and orders by round") {
  Ledger a, b;
  a.record(rec(1, WalletId::none(), w(0, 0), 0, 0));
  a.record(rec(1, w(0, 0), w(1, 0), 1, 5));
  b.record(rec(1, WalletId::none(), w(0, 0), 0, 0));
  b.record(rec(1, w(0, 0), w(1, 0), 1, 4));
  b.record(rec(1, w(1, 0), w(1, 1), 2, 6));
  const std::vector<const Ledger*> both{&a, &b};
  const auto merged = merge_ledgers(both);
  REQUIRE(merged.size() == 3);
  CHECK(merged[1].round == 4);  // earliest copy wins
  CHECK(merged[2].seq == 2);
  CHECK_FALSE(check_ownership_continuity(merged).has_value());
}

TEST_CASE("records of split, merge and mint") {
  Transaction split;
  split.kind = TxKind::split;
  split.coin = CoinId{1};
  split.sWallet = split.tWallet = w(0, 0);
  split.outputs = {CoinId{7}, CoinId{8}};
  const auto rs = transaction_records(split, 3, Trail{{ShardId{0}}}, 2);
  REQUIRE(rs.size() == 3);
  CHECK(rs[0].tWallet == WalletId::retired());
  CHECK(rs[1].sWallet == WalletId::none());
  CHECK(rs[2].coin == CoinId{8});
}

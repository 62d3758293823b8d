#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "trail/domain.hpp"

using namespace trail;

namespace {

bool has(const std::vector<ParamViolation>& v, const std::string& constraint) {
  for (const ParamViolation& p : v) {
    if (p.constraint == constraint) return true;
  }
  return false;
}

Trail trail_of(std::initializer_list<std::uint32_t> ids) {
  Trail t;
  for (std::uint32_t i : ids) t.shards.push_back(ShardId{i});
  return t;
}

}  // namespace

TEST_CASE("parameter validation examples") {
  CHECK(validate_params(Params{1, 1, 4, 4, 5}).empty());
  CHECK(validate_params(Params{2, 1, 7, 4, 10}).empty());
  CHECK(validate_params(Params{7, 2, 22, 7, 50}).empty());
  CHECK(has(validate_params(Params{1, 0, 3, 1, 1}), "s >= 3f+1"));
  CHECK(has(validate_params(Params{0, 1, 1, 3, 5}), "t >= 3F+1"));
  CHECK(has(validate_params(Params{0, 0, 1, 6, 5}), "t <= S"));
  // Every violated constraint is reported, not only the first.
  CHECK(validate_params(Params{2, 2, 6, 6, 4}).size() == 3);
}

TEST_CASE("quorum sizes follow the tolerances") {
  const Params p{2, 1, 7, 4, 10};
  CHECK(p.peer_quorum() == 5);
  CHECK(p.commit_shard_quorum() == 3);
  CHECK(p.prepare_shard_quorum() == 2);
  CHECK(p.network_size() == 70);
}

TEST_CASE("advancing a trail") {
  SUBCASE("new target is prepended") {
    CHECK(advance_trail(trail_of({3, 1}), ShardId{5}, 4) == trail_of({5, 3, 1}));
  }
  SUBCASE("oldest shard drops once the trail is full") {
    CHECK(advance_trail(trail_of({3, 1, 2, 0}), ShardId{5}, 4) == trail_of({5, 3, 1, 2}));
  }
  SUBCASE("a target already on the trail leaves it unchanged") {
    CHECK(advance_trail(trail_of({3, 1, 2}), ShardId{1}, 4) == trail_of({3, 1, 2}));
  }
  SUBCASE("length one keeps only the newest shard") {
    CHECK(advance_trail(trail_of({3}), ShardId{4}, 1) == trail_of({4}));
  }
}

TEST_CASE("advance_trail properties over random walks") {
  std::mt19937_64 rng(7);
  for (std::uint32_t limit = 1; limit <= 7; ++limit) {
    Trail t = trail_of({0});
    for (int step = 0; step < 300; ++step) {
      const ShardId target{static_cast<std::uint32_t>(rng() % 12)};
      const Trail next = advance_trail(t, target, limit);
      CHECK(next.size() <= limit);
      CHECK(next.contains(target));
      // No duplicates.
      for (std::size_t i = 0; i < next.size(); ++i) {
        for (std::size_t j = i + 1; j < next.size(); ++j) CHECK(next.shards[i] != next.shards[j]);
      }
      if (!t.contains(target)) CHECK(next.shards.front() == target);
      t = next;
    }
  }
}

TEST_CASE("external leader rotates from the source along the trail") {
  const Trail t = trail_of({4, 2, 7, 1});
  CHECK(external_leader(t, ShardId{2}, 0) == ShardId{2});
  CHECK(external_leader(t, ShardId{2}, 1) == ShardId{7});
  CHECK(external_leader(t, ShardId{2}, 2) == ShardId{1});
  CHECK(external_leader(t, ShardId{2}, 3) == ShardId{4});
  CHECK(external_leader(t, ShardId{2}, 4) == ShardId{2});
  // Every view in one cycle picks a distinct trail member.
  for (std::uint32_t src : {4u, 2u, 7u, 1u}) {
    std::vector<ShardId> seen;
    for (std::uint64_t v = 0; v < 4; ++v) seen.push_back(external_leader(t, ShardId{src}, v));
    std::sort(seen.begin(), seen.end());
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
  }
}

TEST_CASE("wallet and trail text round trip") {
  for (WalletId w : {WalletId{{3}, 9}, WalletId::none(), WalletId::retired()}) {
    CHECK(parse_wallet(format_wallet(w)) == w);
  }
  const Trail t = trail_of({9, 0, 12});
  CHECK(format_trail(t) == "9|0|12");
  CHECK(parse_trail(format_trail(t)) == t);
  CHECK_THROWS_AS(parse_wallet("3"), ConfigurationError);
  CHECK_THROWS_AS(parse_wallet("a.b"), ConfigurationError);
}

TEST_CASE("wallet directory rejects unknown wallets") {
  const WalletDirectory dir(4, 3);
  CHECK(dir.get_shard(WalletId{{2}, 1}) == ShardId{2});
  CHECK_THROWS_AS(dir.get_shard(WalletId{{4}, 0}), ConfigurationError);
  CHECK_THROWS_AS(dir.get_shard(WalletId{{1}, 3}), ConfigurationError);
  CHECK(dir.total() == 12);
}

TEST_CASE("transaction identity ignores the external view, digest does not") {
  Transaction a;
  a.id = 5;
  a.kind = TxKind::external;
  a.coin = CoinId{3};
  a.sWallet = WalletId{{0}, 1};
  a.tWallet = WalletId{{2}, 0};
  Transaction b = a;
  b.externalView = 2;
  CHECK(a.identity() == b.identity());
  CHECK(a.digest() != b.digest());
  b = a;
  b.id = 6;
  CHECK(a.identity() != b.identity());
  CHECK(is_cross_shard(a));
  Transaction mint;
  mint.kind = TxKind::mint;
  CHECK(mint.consumed().empty());
}

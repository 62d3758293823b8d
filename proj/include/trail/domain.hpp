#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace trail {

using Round = std::int64_t;

// Raised for malformed configuration or lookups of identifiers that the
// bootstrap never created.
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ShardId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(ShardId, ShardId) = default;
};

inline constexpr std::uint32_t kSentinelShard = 0xffffffffu;

struct PeerId {
  ShardId shard;
  std::uint32_t index = 0;
  friend constexpr auto operator<=>(PeerId, PeerId) = default;
};

struct WalletId {
  ShardId shard;
  std::uint32_t index = 0;

  // Source wallet of a freshly minted coin.
  static constexpr WalletId none() { return {{kSentinelShard}, 0}; }
  // Sink wallet of a coin consumed by split or merge.
  static constexpr WalletId retired() { return {{kSentinelShard}, 1}; }

  constexpr bool is_sentinel() const { return shard.value == kSentinelShard; }
  friend constexpr auto operator<=>(WalletId, WalletId) = default;
};

struct CoinId {
  std::uint64_t value = 0;
  friend constexpr auto operator<=>(CoinId, CoinId) = default;
};

struct Params {
  std::uint32_t f = 0;  // faulty peers tolerated per shard
  std::uint32_t F = 0;  // faulty shards tolerated per trail
  std::uint32_t s = 1;  // peers per shard
  std::uint32_t t = 1;  // shards per trail
  std::uint32_t S = 1;  // shards in the system

  std::uint32_t network_size() const { return S * s; }
  std::uint32_t peer_quorum() const { return s - f; }
  std::uint32_t prepare_shard_quorum() const { return t - F - 1; }
  std::uint32_t commit_shard_quorum() const { return t - F; }
  friend bool operator==(const Params&, const Params&) = default;
};

struct ParamViolation {
  std::string constraint;
  std::string detail;
};

// Every violated constraint is reported; an empty result means the
// parameters are usable.
std::vector<ParamViolation> validate_params(const Params& p);

struct Trail {
  std::vector<ShardId> shards;  // most recent holder first

  bool contains(ShardId s) const;
  std::size_t size() const { return shards.size(); }
  bool empty() const { return shards.empty(); }
  std::optional<std::size_t> position(ShardId s) const;
  friend bool operator==(const Trail&, const Trail&) = default;
};

// Trail after the coin moves into `target`: the target is prepended when
// absent, and the oldest shard falls off once the trail would exceed
// `limit` entries. A target already on the trail leaves it unchanged.
Trail advance_trail(const Trail& trail, ShardId target, std::uint32_t limit);

// Leader shard of an external instance in the given view: the source
// shard in view 0, then successive trail members starting after the source.
ShardId external_leader(const Trail& trail, ShardId source, std::uint64_t view);

enum class TxKind : std::uint8_t { external, internal, split, merge, mint, recovery };

const char* to_string(TxKind k);

using TxId = std::uint64_t;

struct Transaction {
  TxId id = 0;  // client request nonce; distinguishes repeated identical moves
  TxKind kind = TxKind::internal;
  CoinId coin;
  std::optional<CoinId> partner;  // second coin of a merge
  WalletId sWallet;
  WalletId tWallet;
  std::vector<CoinId> outputs;  // coins created by split, merge or mint
  Trail committee;              // mint committee; empty otherwise
  std::uint64_t externalView = 0;
  bool honest = true;  // observer-only

  // Identity of the request, shared by every re-proposal of it in later
  // views.
  std::uint64_t identity() const;
  // Identity plus the external view tag.
  std::uint64_t digest() const;
  std::vector<CoinId> consumed() const;
};

using TxPtr = std::shared_ptr<const Transaction>;

bool is_cross_shard(const Transaction& tx);

struct LedgerRecord {
  CoinId coin;
  WalletId sWallet;
  WalletId tWallet;
  std::uint64_t seq = 0;
  Trail trail;
  Round round = 0;  // when this copy was written; excluded from equality

  bool same_tuple(const LedgerRecord& o) const {
    return coin == o.coin && sWallet == o.sWallet && tWallet == o.tWallet && seq == o.seq &&
           trail == o.trail;
  }
  std::uint64_t tuple_hash() const;
};

// Static wallet-to-shard mapping produced by the bootstrap.
class WalletDirectory {
 public:
  WalletDirectory() = default;
  WalletDirectory(std::uint32_t shards, std::uint32_t walletsPerShard)
      : shards_(shards), walletsPerShard_(walletsPerShard) {}

  bool contains(WalletId w) const {
    return w.shard.value < shards_ && w.index < walletsPerShard_;
  }
  ShardId get_shard(WalletId w) const;
  std::uint32_t shards() const { return shards_; }
  std::uint32_t wallets_per_shard() const { return walletsPerShard_; }
  std::uint32_t total() const { return shards_ * walletsPerShard_; }
  std::size_t flat_index(WalletId w) const {
    return static_cast<std::size_t>(w.shard.value) * walletsPerShard_ + w.index;
  }

 private:
  std::uint32_t shards_ = 0;
  std::uint32_t walletsPerShard_ = 0;
};

std::string format_wallet(WalletId w);
std::string format_trail(const Trail& t);
WalletId parse_wallet(const std::string& text);
Trail parse_trail(const std::string& text);

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ (v + 0x9e3779b97f4a7c15ull + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t hash_wallet(WalletId w) {
  return (static_cast<std::uint64_t>(w.shard.value) << 32) | w.index;
}

}  // namespace trail

template <>
struct std::hash<trail::CoinId> {
  std::size_t operator()(trail::CoinId c) const noexcept { return trail::mix64(c.value); }
};

template <>
struct std::hash<trail::WalletId> {
  std::size_t operator()(trail::WalletId w) const noexcept {
    return trail::mix64(trail::hash_wallet(w));
  }
};

template <>
struct std::hash<trail::ShardId> {
  std::size_t operator()(trail::ShardId s) const noexcept { return trail::mix64(s.value); }
};

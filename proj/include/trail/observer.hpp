#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <unordered_map>
#include <vector>

#include "trail/netsim.hpp"
#include "trail/protocol_host.hpp"

namespace trail {

// One row of per-round measurements. Transaction counts are for this round
// only; consumers accumulate them.
struct MetricsFrame {
  Round round = 0;
  std::uint64_t startedHonest = 0;
  std::uint64_t startedTotal = 0;
  std::uint64_t confirmedHonest = 0;
  std::uint64_t confirmedTotal = 0;
  std::uint64_t confirmedInternal = 0;
  std::uint64_t confirmedExternal = 0;
  std::uint64_t recoveryStarted = 0;
  double meanLatency = 0.0;  // rounds from start to confirmation, this round's confirmations
  double compromisedWalletFraction = 0.0;
  std::uint64_t envelopesSent = 0;
  std::array<std::uint64_t, kMessageKinds> perPhase{};
};

enum class WalletStatus : std::uint8_t { safe, compromised };

// Coins a shard's clients may spend right now, with the wallet each sits in.
class IdleCoins {
 public:
  void add(CoinId c, WalletId w);
  bool remove(CoinId c);
  bool contains(CoinId c) const { return pos_.count(c) != 0; }
  std::optional<WalletId> wallet_of(CoinId c) const;
  const std::vector<std::pair<CoinId, WalletId>>& entries() const { return coins_; }
  std::size_t size() const { return coins_.size(); }
  bool empty() const { return coins_.empty(); }
  // Removes and returns a uniformly chosen coin.
  std::pair<CoinId, WalletId> take_random(std::mt19937_64& rng);

 private:
  std::vector<std::pair<CoinId, WalletId>> coins_;
  std::unordered_map<CoinId, std::size_t> pos_;
};

// Global ground-truth view: which requests started and were confirmed by the
// client rule, which coins each shard may spend, which wallets are
// compromised, and what the network carried.
class Observer {
 public:
  Observer(const ProtocolConfig& cfg, const WalletDirectory& wallets);

  void on_genesis(CoinId coin, WalletId owner);
  // Returns false for a request already known (recovery requests are
  // generated independently by many peers).
  bool on_started(const TxPtr& tx, Round now);
  void on_internal_commit(PeerId peer, const Transaction& tx, Round now);
  void on_client_reply(PeerId peer, const ExtProposal& p, Round now);
  void on_target_accepted(PeerId peer, const ExtProposal& p, Round now);
  void on_rejected(PeerId peer, const Transaction& tx, Round now);
  void on_dropped(const Transaction& tx, Round now);

  void on_shard_faulty(ShardId shard);
  void on_shard_removed(ShardId shard);

  MetricsFrame close_round(Round round, const Network& net);

  IdleCoins& idle(ShardId shard) { return idle_[shard.value]; }
  const IdleCoins& idle(ShardId shard) const { return idle_[shard.value]; }
  // Coins that left `shard` through confirmed external transactions, with
  // the wallet they left from.
  std::vector<std::pair<CoinId, WalletId>>& spent_from(ShardId shard) {
    return spentFrom_[shard.value];
  }
  // Honest trail-validated requests started at least `timeout` rounds ago
  // that are still unconfirmed; each is returned once.
  std::vector<TxPtr> take_overdue(Round now, Round timeout);

  WalletStatus status(WalletId w) const;
  // Wallet the client rule says owns the coin now.
  std::optional<WalletId> rightful_owner(CoinId coin) const;
  std::uint64_t live_coins() const { return liveCoins_; }
  std::uint64_t minted() const { return minted_; }
  std::uint64_t split_extra() const { return splitExtra_; }
  std::uint64_t merges_completed() const { return mergesCompleted_; }
  bool confirmed(TxId id) const;
  bool known(TxId id) const { return txs_.count(id) != 0; }

  std::uint64_t total_started() const { return totals_.startedTotal; }
  std::uint64_t total_confirmed() const { return totals_.confirmedTotal; }
  std::uint64_t total_confirmed_honest() const { return totals_.confirmedHonest; }
  // Confirmed adversarial spends of coins their source wallet no longer
  // owned. Coalition requests that happen to spend a coin the wallet owns
  // again at confirmation time are not counted.
  std::uint64_t malicious_confirmed() const { return doubleSpends_; }
  std::uint64_t external_confirmed() const { return totals_.confirmedExternal; }

  // Confirmed transactions in confirmation order.
  const std::vector<TxPtr>& confirmations() const { return confirmedLog_; }

 private:
  struct TxState {
    TxPtr tx;
    Round started = 0;
    bool confirmed = false;
    bool dropped = false;
    bool settled = false;  // coins handed back to a shard's idle set
    std::vector<std::pair<ShardId, PeerSet>> replies;
    std::uint32_t shardsReplied = 0;
    PeerSet settlers;
    PeerSet rejecters;
  };

  TxState* find(const Transaction& tx);
  std::uint32_t reply_threshold(const Transaction& tx) const;
  void confirm(TxState& st, Round now);
  void settle(TxState& st);
  void move_location(CoinId coin, std::optional<WalletId> to);
  bool shard_wallets_compromised(WalletId w) const;

  ProtocolConfig cfg_;
  WalletDirectory wallets_;
  std::unordered_map<TxId, TxState> txs_;
  std::vector<std::pair<Round, TxId>> escalationQueue_;
  std::size_t escalationHead_ = 0;
  std::vector<IdleCoins> idle_;
  std::vector<std::vector<std::pair<CoinId, WalletId>>> spentFrom_;

  std::unordered_map<CoinId, WalletId> legit_;     // rightful owner per the client rule
  std::unordered_map<CoinId, WalletId> location_;  // last trail-validated wallet
  std::vector<std::uint32_t> locatedCount_;        // per wallet
  std::vector<bool> tainted_;                      // per wallet
  std::vector<bool> faulty_;                       // per shard
  std::vector<bool> removed_;                      // per shard

  std::uint64_t liveCoins_ = 0;
  std::uint64_t minted_ = 0;
  std::uint64_t splitExtra_ = 0;
  std::uint64_t mergesCompleted_ = 0;
  std::uint64_t doubleSpends_ = 0;

  MetricsFrame current_;
  MetricsFrame totals_;
  double latencySum_ = 0.0;
  std::uint64_t lastSent_ = 0;
  std::array<std::uint64_t, kMessageKinds> lastByKind_{};
  std::vector<TxPtr> confirmedLog_;
};

}  // namespace trail

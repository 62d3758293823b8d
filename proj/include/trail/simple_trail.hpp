#pragma once

#include <map>
#include <vector>

#include "trail/domain.hpp"
#include "trail/workload.hpp"

namespace trail {

// One step of a coin's confirmed history as compared between the full
// protocol and the single-peer reference.
struct CoinStep {
  WalletId from;
  WalletId to;
  Trail trail;
  friend bool operator==(const CoinStep&, const CoinStep&) = default;
};

using CoinSequences = std::map<CoinId, std::vector<CoinStep>>;

// Reference system with a single peer per shard. The peer holding the coin
// leads a plain three-phase agreement among the coin's trail peers for every
// transfer, same-shard ones included. Transfers run one at a time.
class SimpleTrail {
 public:
  SimpleTrail(std::uint32_t shards, std::uint32_t t, std::uint32_t F,
              const std::vector<LedgerRecord>& genesis);

  // Runs one transfer to completion; false when the trail rejects it.
  bool execute(const ScriptedTransfer& transfer);
  CoinSequences sequences() const;
  std::uint64_t messages() const { return messages_; }

 private:
  struct Entry {
    CoinId coin;
    WalletId from;
    WalletId to;
    Trail trail;
  };
  struct PeerState {
    std::vector<Entry> ledger;
  };
  struct Msg {
    enum Kind { preprepare, prepare, commit, reply } kind;
    std::uint32_t from;
    std::uint32_t to;
  };

  bool owns(std::uint32_t peer, CoinId coin, WalletId wallet) const;
  const Entry* latest(std::uint32_t peer, CoinId coin) const;

  std::uint32_t shards_;
  std::uint32_t t_;
  std::uint32_t F_;
  std::vector<PeerState> peers_;
  std::uint64_t messages_ = 0;
  CoinSequences log_;  // client-confirmed steps per coin, genesis first
};

}  // namespace trail

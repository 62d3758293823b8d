#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "trail/domain.hpp"

namespace trail {

class UnknownCoin : public std::runtime_error {
 public:
  explicit UnknownCoin(CoinId c)
      : std::runtime_error("no record about coin " + std::to_string(c.value)), coin(c) {}
  CoinId coin;
};

// Append-only record log of one peer with a per-coin position index.
class Ledger {
 public:
  void record(LedgerRecord r);
  // Appends unless a record with the same tuple is already present.
  bool record_once(const LedgerRecord& r);

  // True iff some record moves `coin` into `wallet` and every record moving
  // it out of `wallet` comes earlier.
  bool is_present(CoinId coin, WalletId wallet) const;
  // Trail of the latest record about `coin`; throws UnknownCoin.
  Trail get_trail(CoinId coin) const;
  const LedgerRecord* latest(CoinId coin) const;
  bool knows(CoinId coin) const { return index_.count(coin) != 0; }
  bool contains(const LedgerRecord& r) const;

  // Consecutive same-shard moves at the end of the coin's history, oldest
  // first. These are the moves that trail shards have not seen.
  std::vector<LedgerRecord> trailing_internal_moves(CoinId coin) const;

  const std::vector<LedgerRecord>& records() const { return records_; }
  std::span<const std::size_t> positions(CoinId coin) const;
  std::size_t size() const { return records_.size(); }
  std::vector<CoinId> coins() const;

 private:
  std::vector<LedgerRecord> records_;
  std::unordered_map<CoinId, std::vector<std::size_t>> index_;
};

struct ContinuityViolation {
  std::size_t position = 0;  // index of the offending record in the input
  CoinId coin;
  WalletId expected;  // target of the previous record about the coin
  WalletId found;     // source of the offending record
};

// Checks that, per coin, every record starts where the previous one ended.
std::optional<ContinuityViolation> check_ownership_continuity(
    std::span<const LedgerRecord> records);

// Merges several ledgers into one history: identical tuples collapse to the
// earliest copy, and the result is ordered by write round with ties broken
// by source ledger and position.
std::vector<LedgerRecord> merge_ledgers(std::span<const Ledger* const> ledgers);

// Effects of a confirmed transaction as ledger records, in append order.
std::vector<LedgerRecord> transaction_records(const Transaction& tx, std::uint64_t seq,
                                              const Trail& trail, Round round);

}  // namespace trail

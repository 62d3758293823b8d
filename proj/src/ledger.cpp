#include "trail/ledger.hpp"

#include <algorithm>
#include <tuple>

namespace trail {

void Ledger::record(LedgerRecord r) {
  index_[r.coin].push_back(records_.size());
  records_.push_back(std::move(r));
}

bool Ledger::record_once(const LedgerRecord& r) {
  if (contains(r)) return false;
  record(r);
  return true;
}

bool Ledger::is_present(CoinId coin, WalletId wallet) const {
  auto it = index_.find(coin);
  if (it == index_.end()) return false;
  const auto& pos = it->second;
  for (auto p = pos.rbegin(); p != pos.rend(); ++p) {
    const LedgerRecord& r = records_[*p];
    if (r.tWallet == wallet) return true;
    if (r.sWallet == wallet) return false;
  }
  return false;
}

const LedgerRecord* Ledger::latest(CoinId coin) const {
  auto it = index_.find(coin);
  if (it == index_.end()) return nullptr;
  return &records_[it->second.back()];
}

Trail Ledger::get_trail(CoinId coin) const {
  const LedgerRecord* r = latest(coin);
  if (!r) throw UnknownCoin(coin);
  return r->trail;
}

bool Ledger::contains(const LedgerRecord& r) const {
  auto it = index_.find(r.coin);
  if (it == index_.end()) return false;
  for (auto p = it->second.rbegin(); p != it->second.rend(); ++p) {
    if (records_[*p].same_tuple(r)) return true;
  }
  return false;
}

std::vector<LedgerRecord> Ledger::trailing_internal_moves(CoinId coin) const {
  std::vector<LedgerRecord> out;
  auto it = index_.find(coin);
  if (it == index_.end()) return out;
  for (auto p = it->second.rbegin(); p != it->second.rend(); ++p) {
    const LedgerRecord& r = records_[*p];
    if (r.sWallet.is_sentinel() || r.tWallet.is_sentinel() || r.sWallet.shard != r.tWallet.shard) {
      break;
    }
    out.push_back(r);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::span<const std::size_t> Ledger::positions(CoinId coin) const {
  auto it = index_.find(coin);
  if (it == index_.end()) return {};
  return it->second;
}

std::vector<CoinId> Ledger::coins() const {
  std::vector<CoinId> out;
  out.reserve(index_.size());
  for (const auto& [c, _] : index_) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<ContinuityViolation> check_ownership_continuity(
    std::span<const LedgerRecord> records) {
  std::unordered_map<CoinId, WalletId> holder;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const LedgerRecord& r = records[i];
    auto [it, fresh] = holder.try_emplace(r.coin, r.tWallet);
    if (fresh) continue;
    if (it->second != r.sWallet) return ContinuityViolation{i, r.coin, it->second, r.sWallet};
    it->second = r.tWallet;
  }
  return std::nullopt;
}

std::vector<LedgerRecord> merge_ledgers(std::span<const Ledger* const> ledgers) {
  struct Entry {
    Round round;
    std::size_t ledger;
    std::size_t position;
    const LedgerRecord* record;
  };
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> byHash;
  std::vector<Entry> entries;
  for (std::size_t l = 0; l < ledgers.size(); ++l) {
    const auto& recs = ledgers[l]->records();
    for (std::size_t p = 0; p < recs.size(); ++p) {
      const LedgerRecord& r = recs[p];
      auto& bucket = byHash[r.tuple_hash()];
      bool merged = false;
      for (std::size_t e : bucket) {
        if (entries[e].record->same_tuple(r)) {
          if (std::tie(r.round, l, p) <
              std::tie(entries[e].round, entries[e].ledger, entries[e].position)) {
            entries[e] = {r.round, l, p, &r};
          }
          merged = true;
          break;
        }
      }
      if (!merged) {
        bucket.push_back(entries.size());
        entries.push_back({r.round, l, p, &r});
      }
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.round, a.ledger, a.position) < std::tie(b.round, b.ledger, b.position);
  });
  std::vector<LedgerRecord> out;
  out.reserve(entries.size());
  for (const Entry& e : entries) out.push_back(*e.record);
  return out;
}

std::vector<LedgerRecord> transaction_records(const Transaction& tx, std::uint64_t seq,
                                              const Trail& trail, Round round) {
  std::vector<LedgerRecord> out;
  auto add = [&](CoinId c, WalletId from, WalletId to) {
    out.push_back(LedgerRecord{c, from, to, seq, trail, round});
  };
  switch (tx.kind) {
    case TxKind::external:
    case TxKind::internal:
    case TxKind::recovery:
      add(tx.coin, tx.sWallet, tx.tWallet);
      break;
    case TxKind::split:
      add(tx.coin, tx.sWallet, WalletId::retired());
      for (CoinId child : tx.outputs) add(child, WalletId::none(), tx.sWallet);
      break;
    case TxKind::merge:
      add(tx.coin, tx.sWallet, WalletId::retired());
      if (tx.partner) add(*tx.partner, tx.sWallet, WalletId::retired());
      for (CoinId child : tx.outputs) add(child, WalletId::none(), tx.sWallet);
      break;
    case TxKind::mint:
      add(tx.coin, WalletId::none(), tx.tWallet);
      break;
  }
  return out;
}

}  // namespace trail

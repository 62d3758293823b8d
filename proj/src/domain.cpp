#include "trail/domain.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace trail {

std::vector<ParamViolation> validate_params(const Params& p) {
  std::vector<ParamViolation> out;
  auto fail = [&](std::string constraint, std::string detail) {
    out.push_back({std::move(constraint), std::move(detail)});
  };
  if (p.s < 3 * p.f + 1) {
    fail("s >= 3f+1", "s=" + std::to_string(p.s) + " but 3f+1=" + std::to_string(3 * p.f + 1));
  }
  if (p.t < 3 * p.F + 1) {
    fail("t >= 3F+1", "t=" + std::to_string(p.t) + " but 3F+1=" + std::to_string(3 * p.F + 1));
  }
  if (p.t > p.S) {
    fail("t <= S", "t=" + std::to_string(p.t) + " exceeds S=" + std::to_string(p.S));
  }
  if (p.s == 0) fail("s >= 1", "a shard needs at least one peer");
  if (p.S == 0) fail("S >= 1", "the system needs at least one shard");
  return out;
}

bool Trail::contains(ShardId s) const {
  return std::find(shards.begin(), shards.end(), s) != shards.end();
}

std::optional<std::size_t> Trail::position(ShardId s) const {
  auto it = std::find(shards.begin(), shards.end(), s);
  if (it == shards.end()) return std::nullopt;
  return static_cast<std::size_t>(it - shards.begin());
}

Trail advance_trail(const Trail& trail, ShardId target, std::uint32_t limit) {
  if (trail.contains(target)) return trail;
  Trail next;
  next.shards.reserve(trail.size() + 1);
  next.shards.push_back(target);
  next.shards.insert(next.shards.end(), trail.shards.begin(), trail.shards.end());
  while (next.shards.size() > limit) next.shards.pop_back();
  return next;
}

ShardId external_leader(const Trail& trail, ShardId source, std::uint64_t view) {
  if (view == 0 || trail.empty()) return source;
  const std::size_t n = trail.size();
  const std::size_t base = trail.position(source).value_or(n - 1);
  return trail.shards[(base + view) % n];
}

const char* to_string(TxKind k) {
  switch (k) {
    case TxKind::external: return "external";
    case TxKind::internal: return "internal";
    case TxKind::split: return "split";
    case TxKind::merge: return "merge";
    case TxKind::mint: return "mint";
    case TxKind::recovery: return "recovery";
  }
  return "?";
}

std::uint64_t Transaction::identity() const {
  std::uint64_t h = hash_combine(0x7261696c, id);
  h = hash_combine(h, static_cast<std::uint64_t>(kind));
  h = hash_combine(h, coin.value);
  h = hash_combine(h, partner ? partner->value + 1 : 0);
  h = hash_combine(h, hash_wallet(sWallet));
  h = hash_combine(h, hash_wallet(tWallet));
  for (CoinId c : outputs) h = hash_combine(h, c.value);
  for (ShardId s : committee.shards) h = hash_combine(h, s.value);
  return h;
}

std::uint64_t Transaction::digest() const { return hash_combine(identity(), externalView); }

std::vector<CoinId> Transaction::consumed() const {
  if (kind == TxKind::mint) return {};
  std::vector<CoinId> out{coin};
  if (partner) out.push_back(*partner);
  return out;
}

bool is_cross_shard(const Transaction& tx) {
  return !tx.sWallet.is_sentinel() && !tx.tWallet.is_sentinel() &&
         tx.sWallet.shard != tx.tWallet.shard;
}

std::uint64_t LedgerRecord::tuple_hash() const {
  std::uint64_t h = hash_combine(coin.value, hash_wallet(sWallet));
  h = hash_combine(h, hash_wallet(tWallet));
  h = hash_combine(h, seq);
  for (ShardId s : trail.shards) h = hash_combine(h, s.value);
  return h;
}

ShardId WalletDirectory::get_shard(WalletId w) const {
  if (!contains(w)) {
    throw ConfigurationError("unknown wallet " + format_wallet(w));
  }
  return w.shard;
}

std::string format_wallet(WalletId w) {
  if (w == WalletId::none()) return "-";
  if (w == WalletId::retired()) return "x";
  return std::to_string(w.shard.value) + "." + std::to_string(w.index);
}

std::string format_trail(const Trail& t) {
  std::string out;
  for (std::size_t i = 0; i < t.shards.size(); ++i) {
    if (i) out += '|';
    out += std::to_string(t.shards[i].value);
  }
  return out;
}

namespace {

std::uint32_t parse_u32(std::string_view text, const std::string& context) {
  std::uint32_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigurationError("cannot parse '" + std::string(text) + "' in " + context);
  }
  return v;
}

}  // namespace

WalletId parse_wallet(const std::string& text) {
  if (text == "-") return WalletId::none();
  if (text == "x") return WalletId::retired();
  auto dot = text.find('.');
  if (dot == std::string::npos) throw ConfigurationError("wallet '" + text + "' lacks a '.'");
  std::string_view sv(text);
  return {{parse_u32(sv.substr(0, dot), "wallet")}, parse_u32(sv.substr(dot + 1), "wallet")};
}

Trail parse_trail(const std::string& text) {
  Trail t;
  if (text.empty()) return t;
  std::string_view sv(text);
  std::size_t start = 0;
  while (start <= sv.size()) {
    auto bar = sv.find('|', start);
    if (bar == std::string_view::npos) bar = sv.size();
    t.shards.push_back({parse_u32(sv.substr(start, bar - start), "trail")});
    start = bar + 1;
  }
  return t;
}

}  // namespace trail

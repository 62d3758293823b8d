#include "trail/simple_trail.hpp"

#include <algorithm>
#include <deque>

namespace trail {

SimpleTrail::SimpleTrail(std::uint32_t shards, std::uint32_t t, std::uint32_t F,
                         const std::vector<LedgerRecord>& genesis)
    : shards_(shards), t_(t), F_(F), peers_(shards) {
  for (const LedgerRecord& r : genesis) {
    log_[r.coin].push_back(CoinStep{r.sWallet, r.tWallet, r.trail});
    for (ShardId s : r.trail.shards) {
      peers_[s.value].ledger.push_back(Entry{r.coin, r.sWallet, r.tWallet, r.trail});
    }
  }
}

const SimpleTrail::Entry* SimpleTrail::latest(std::uint32_t peer, CoinId coin) const {
  const auto& l = peers_[peer].ledger;
  for (auto it = l.rbegin(); it != l.rend(); ++it) {
    if (it->coin == coin) return &*it;
  }
  return nullptr;
}

bool SimpleTrail::owns(std::uint32_t peer, CoinId coin, WalletId wallet) const {
  const Entry* e = latest(peer, coin);
  return e && e->to == wallet;
}

bool SimpleTrail::execute(const ScriptedTransfer& tr) {
  const std::uint32_t leader = tr.from.shard.value;
  if (leader >= shards_ || tr.to.shard.value >= shards_) return false;
  const Entry* head = latest(leader, tr.coin);
  if (!head || head->to != tr.from) return false;
  const std::vector<ShardId> members = head->trail.shards;
  if (std::find(members.begin(), members.end(), tr.from.shard) == members.end()) return false;

  std::vector<ShardId> next = members;
  if (std::find(next.begin(), next.end(), tr.to.shard) == next.end()) {
    next.insert(next.begin(), tr.to.shard);
    if (next.size() > t_) next.resize(t_);
  }
  const Entry decided{tr.coin, tr.from, tr.to, Trail{next}};

  const std::uint32_t prepareQuorum = t_ - F_ - 1;
  const std::uint32_t commitQuorum = t_ - F_;
  struct Progress {
    std::uint32_t prepares = 0;
    std::uint32_t commits = 0;
    bool prepared = false;
    bool commitSent = false;
    bool recorded = false;
  };
  std::vector<Progress> progress(shards_);
  std::uint32_t targetReplies = 0;
  std::uint32_t clientReplies = 0;
  bool targetRecorded = false;
  std::deque<Msg> queue;
  auto broadcast = [&](Msg::Kind kind, std::uint32_t from) {
    for (ShardId m : members) {
      queue.push_back(Msg{kind, from, m.value});
      ++messages_;
    }
  };
  auto send_commit = [&](std::uint32_t p) {
    if (progress[p].commitSent) return;
    progress[p].commitSent = true;
    broadcast(Msg::commit, p);
  };

  broadcast(Msg::preprepare, leader);
  while (!queue.empty()) {
    const Msg m = queue.front();
    queue.pop_front();
    Progress& pr = progress[m.to];
    switch (m.kind) {
      case Msg::preprepare:
        if (m.to != leader && !pr.prepared && owns(m.to, tr.coin, tr.from)) {
          pr.prepared = true;
          broadcast(Msg::prepare, m.to);
        }
        if (prepareQuorum == 0 && (m.to == leader || pr.prepared)) send_commit(m.to);
        break;
      case Msg::prepare:
        if (m.from == leader) break;
        if (++pr.prepares >= prepareQuorum && (m.to == leader || pr.prepared)) send_commit(m.to);
        break;
      case Msg::commit:
        if (++pr.commits >= commitQuorum && pr.commitSent && !pr.recorded) {
          pr.recorded = true;
          peers_[m.to].ledger.push_back(decided);
          ++clientReplies;
          queue.push_back(Msg{Msg::reply, m.to, tr.to.shard.value});
          ++messages_;
        }
        break;
      case Msg::reply:
        if (++targetReplies >= commitQuorum && !targetRecorded && !progress[m.to].recorded) {
          targetRecorded = true;
          peers_[m.to].ledger.push_back(decided);
        }
        break;
    }
  }
  if (clientReplies < commitQuorum) return false;
  log_[tr.coin].push_back(CoinStep{tr.from, tr.to, decided.trail});
  return true;
}

CoinSequences SimpleTrail::sequences() const { return log_; }

}  // namespace trail

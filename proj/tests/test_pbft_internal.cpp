#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <map>
#include <memory>
#include <set>

#include "trail/pbft_internal.hpp"

using namespace trail;

namespace {

// One shard of replicas wired through the simulated network. Hosts only
// record what the replicas report.
struct Cluster;

struct RecordingHost : ProtocolHost {
  Cluster* cluster = nullptr;
  PeerId id;
  ProtocolConfig cfg;
  Ledger book;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> completed;  // (seq, digest)
  std::vector<TxPtr> rejected;
  std::function<bool(const Transaction&)> admitter = [](const Transaction&) { return true; };

  Round now() const override;
  PeerId self() const override { return id; }
  const ProtocolConfig& config() const override { return cfg; }
  Ledger& ledger() override { return book; }
  bool known_wallet(WalletId) const override { return true; }
  bool shard_removed(ShardId) const override { return false; }
  void send(PeerId to, MessagePtr m) override;
  void send_to_shard(ShardId shard, MessagePtr m) override;
  bool admits(const Transaction& tx) override { return admitter(tx); }
  void internal_completed(const TxPtr& tx, std::uint64_t seq, std::uint64_t) override {
    completed.emplace_back(seq, tx->digest());
  }
  void internal_rejected(const TxPtr& tx) override { rejected.push_back(tx); }
  bool colluding_with(ShardId) const override { return false; }
  void start_internal(const TxPtr&) override {}
  void client_reply(const ExtProposal&, const Trail&) override {}
  void target_accepted(const ExtProposal&, const Trail&) override {}
  void request_dropped(const Transaction&) override {}
  WalletId recovery_target(CoinId) const override { return WalletId{}; }
  void recovery_generated(const TxPtr&) override {}
};

struct Cluster {
  std::uint32_t s;
  Network net;
  Round round = 0;
  std::vector<RecordingHost> hosts;
  std::vector<InternalReplica> replicas;
  std::set<std::uint32_t> silent;
  // Rewrites an outgoing message per receiver; null keeps it.
  std::function<MessagePtr(PeerId, PeerId, const MessagePtr&)> tamper;

  Cluster(std::uint32_t size, std::uint32_t f) : s(size), net(1, size, DelayModel{1}, 1) {
    hosts.resize(size);
    for (std::uint32_t i = 0; i < size; ++i) {
      hosts[i].cluster = this;
      hosts[i].id = PeerId{{0}, i};
      hosts[i].cfg.params = Params{f, 0, size, 1, 1};
      replicas.emplace_back(hosts[i].id, size, f, 5);
    }
  }

  void post(PeerId from, PeerId to, const MessagePtr& m) {
    if (silent.count(from.index)) return;
    MessagePtr out = m;
    if (tamper) {
      if (MessagePtr t = tamper(from, to, m)) out = t;
    }
    net.send(from, to, out, round);
  }

  void submit_everywhere(const TxPtr& tx) {
    for (std::uint32_t i = 0; i < s; ++i) {
      if (!silent.count(i)) replicas[i].submit(tx, hosts[i]);
    }
  }

  void step() {
    ++round;
    net.deliver(round, [&](const Envelope& e) {
      const std::uint32_t i = e.receiver.index;
      if (!silent.count(i)) replicas[i].on_message(e.sender, e.payload, hosts[i]);
    });
    for (std::uint32_t i = 0; i < s; ++i) {
      if (!silent.count(i)) replicas[i].tick(hosts[i]);
    }
  }

  void run(int rounds) {
    for (int r = 0; r < rounds; ++r) step();
  }
};

Round RecordingHost::now() const { return cluster->round; }
void RecordingHost::send(PeerId to, MessagePtr m) { cluster->post(id, to, m); }
void RecordingHost::send_to_shard(ShardId shard, MessagePtr m) {
  for (std::uint32_t i = 0; i < cluster->s; ++i) cluster->post(id, PeerId{shard, i}, m);
}

TxPtr transfer(std::uint64_t n) {
  auto tx = std::make_shared<Transaction>();
  tx->id = n;
  tx->kind = TxKind::internal;
  tx->coin = CoinId{n};
  tx->sWallet = WalletId{{0}, 0};
  tx->tWallet = WalletId{{0}, 1};
  return tx;
}

// No two correct replicas complete different requests in the same slot.
void check_agreement(const Cluster& c) {
  std::map<std::uint64_t, std::uint64_t> decided;
  for (std::uint32_t i = 0; i < c.s; ++i) {
    if (c.silent.count(i)) continue;
    for (const auto& [seq, digest] : c.hosts[i].completed) {
      auto [it, fresh] = decided.emplace(seq, digest);
      CHECK(it->second == digest);
    }
  }
}

std::size_t completed_everywhere(const Cluster& c) {
  std::size_t least = SIZE_MAX;
  for (std::uint32_t i = 0; i < c.s; ++i) {
    if (!c.silent.count(i)) least = std::min(least, c.hosts[i].completed.size());
  }
  return least;
}

}  // namespace

TEST_CASE("fault-free shard orders every request identically") {
  Cluster c(4, 1);
  for (std::uint64_t n = 1; n <= 6; ++n) c.submit_everywhere(transfer(n));
  c.run(20);
  CHECK(completed_everywhere(c) == 6);
  for (std::uint32_t i = 1; i < 4; ++i) CHECK(c.hosts[i].completed == c.hosts[0].completed);
  for (const InternalReplica& r : c.replicas) CHECK(r.view() == 0);
}

TEST_CASE("a silent leader is replaced by a view change") {
  Cluster c(4, 1);
  c.silent.insert(0);
  for (std::uint64_t n = 1; n <= 4; ++n) c.submit_everywhere(transfer(n));
  c.run(80);
  CHECK(completed_everywhere(c) == 4);
  check_agreement(c);
  for (std::uint32_t i = 1; i < 4; ++i) CHECK(c.replicas[i].view() >= 1);
}

TEST_CASE("f silent followers do not stop progress") {
  Cluster c(7, 2);
  c.silent = {5, 6};
  for (std::uint64_t n = 1; n <= 5; ++n) c.submit_everywhere(transfer(n));
  c.run(20);
  CHECK(completed_everywhere(c) == 5);
  check_agreement(c);
  CHECK(c.replicas[0].view() == 0);
}

TEST_CASE("an equivocating leader cannot split the correct replicas") {
  Cluster c(4, 1);
  // The leader shows peers 1 and 2 the real request and peer 3 a twin.
  c.tamper = [](PeerId from, PeerId to, const MessagePtr& m) -> MessagePtr {
    if (from.index != 0 || m->kind != MessageKind::pre_prepare || to.index != 3) return nullptr;
    PrePrepareBody body = std::get<PrePrepareBody>(m->body);
    if (!body.tx) return nullptr;
    auto twin = std::make_shared<Transaction>(*body.tx);
    twin->tWallet.index += 1;
    body.tx = twin;
    body.digest = twin->digest();
    return make_message(MessageKind::pre_prepare, body);
  };
  for (std::uint64_t n = 1; n <= 3; ++n) c.submit_everywhere(transfer(n));
  c.run(120);
  check_agreement(c);
  for (std::uint32_t i = 0; i < 3; ++i) CHECK(c.hosts[i].completed.size() == 3);
  // The deceived replica has no state transfer to catch up with, so it
  // stays behind rather than completing the twin.
  CHECK(c.hosts[3].completed.empty());
}

TEST_CASE("random silent subsets within tolerance keep agreement and liveness") {
  for (std::uint32_t mask = 0; mask < 16; ++mask) {
    if (__builtin_popcount(mask) > 1) continue;
    Cluster c(4, 1);
    for (std::uint32_t i = 0; i < 4; ++i) {
      if (mask >> i & 1) c.silent.insert(i);
    }
    for (std::uint64_t n = 1; n <= 3; ++n) c.submit_everywhere(transfer(n));
    c.run(100);
    CAPTURE(mask);
    CHECK(completed_everywhere(c) == 3);
    check_agreement(c);
  }
}

TEST_CASE("requests the host refuses are reported as rejected") {
  Cluster c(4, 1);
  for (RecordingHost& h : c.hosts) {
    h.admitter = [](const Transaction& tx) { return tx.coin.value != 2; };
  }
  c.submit_everywhere(transfer(1));
  c.submit_everywhere(transfer(2));
  c.run(20);
  for (const RecordingHost& h : c.hosts) {
    CHECK(h.completed.size() == 1);
    REQUIRE(h.rejected.size() >= 1);
    CHECK(h.rejected.front()->coin == CoinId{2});
  }
}

TEST_CASE("a duplicate request is ordered once") {
  Cluster c(4, 1);
  const TxPtr tx = transfer(9);
  c.submit_everywhere(tx);
  c.submit_everywhere(tx);
  c.run(10);
  c.submit_everywhere(tx);
  c.run(10);
  for (const RecordingHost& h : c.hosts) CHECK(h.completed.size() == 1);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>

#include "trail/netsim.hpp"

using namespace trail;

namespace {

MessagePtr tagged(std::uint64_t n) {
  return make_message(MessageKind::prepare, VoteBody{0, n, 0});
}

std::uint64_t tag(const Envelope& e) { return std::get<VoteBody>(e.payload->body).seq; }

}  // namespace

TEST_CASE("fixed delay delivers next round in send order") {
  Network net(2, 3, DelayModel{1}, 1);
  const PeerId a{{0}, 0}, b{{1}, 2};
  for (std::uint64_t i = 0; i < 5; ++i) net.send(a, b, tagged(i), 0);
  std::vector<std::uint64_t> got;
  net.deliver(0, [&](const Envelope&) { FAIL("nothing is due in the send round"); });
  net.deliver(1, [&](const Envelope& e) { got.push_back(tag(e)); });
  CHECK(got == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  CHECK(net.in_flight() == 0);
  CHECK(net.envelopes_sent() == 5);
  CHECK(net.envelopes_delivered() == 5);
}

TEST_CASE("random delays keep each channel FIFO") {
  Network net(2, 2, DelayModel{4}, 99);
  const PeerId a{{0}, 0}, b{{1}, 1}, c{{1}, 0};
  std::uint64_t next = 0;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint64_t>> seen;
  for (Round r = 0; r < 60; ++r) {
    if (r < 40) {
      net.send(a, b, tagged(next++), r);
      net.send(a, c, tagged(next++), r);
    }
    net.deliver(r, [&](const Envelope& e) {
      CHECK(r - e.sendRound >= 1);
      CHECK(r - e.sendRound <= 4 + 40);  // bounded by delay plus FIFO catch-up
      seen[{e.sender.index, e.receiver.index}].push_back(tag(e));
    });
  }
  CHECK(net.in_flight() == 0);
  for (const auto& [channel, tags] : seen) {
    CHECK(std::is_sorted(tags.begin(), tags.end()));
    CHECK(tags.size() == 40);
  }
}

TEST_CASE("a removed shard neither receives nor gets queued traffic") {
  Network net(3, 2, DelayModel{1}, 1);
  const PeerId a{{0}, 0};
  net.send_to_shard(a, ShardId{1}, tagged(1), 0);
  net.remove_shard(ShardId{1});
  net.send_to_shard(a, ShardId{1}, tagged(2), 0);
  net.send_to_shard(a, ShardId{2}, tagged(3), 0);
  std::size_t delivered = 0;
  net.deliver(1, [&](const Envelope& e) {
    CHECK(e.receiver.shard == ShardId{2});
    ++delivered;
  });
  CHECK(delivered == 2);
  CHECK(net.envelopes_sent() == 4);  // two queued before removal, two after to shard 2
}

TEST_CASE("per-kind counters") {
  Network net(1, 4, DelayModel{1}, 1);
  net.send_to_shard(PeerId{{0}, 0}, ShardId{0}, make_message(MessageKind::commit, VoteBody{}), 0);
  CHECK(net.sent_by_kind()[static_cast<std::size_t>(MessageKind::commit)] == 4);
  CHECK(std::string(to_string(MessageKind::x_recorded)) == "x_recorded");
}

TEST_CASE("quorum collector fires exactly once on distinct senders of its shard") {
  QuorumCollector q(ShardId{2}, 3, 4);
  CHECK(q.add(PeerId{{2}, 0}) == CollectResult::pending);
  CHECK(q.add(PeerId{{2}, 0}) == CollectResult::duplicate);
  CHECK(q.add(PeerId{{1}, 1}) == CollectResult::foreign);
  CHECK(q.add(PeerId{{2}, 1}) == CollectResult::pending);
  CHECK(q.add(PeerId{{2}, 3}) == CollectResult::fired);
  CHECK(q.add(PeerId{{2}, 2}) == CollectResult::spent);
  CHECK(q.fired());
  CHECK(q.count() == 4);
}

TEST_CASE("shard quorum counts shards whose peer quorum completed") {
  ShardQuorum q(2, 3);
  CHECK_FALSE(q.add(PeerId{{0}, 0}));
  CHECK_FALSE(q.add(PeerId{{1}, 0}));
  CHECK(q.add(PeerId{{0}, 2}));
  CHECK_FALSE(q.add(PeerId{{0}, 1}));  // shard 0 already counted
  CHECK(q.add(PeerId{{1}, 1}));
  CHECK(q.shards_fired() == 2);
}

TEST_CASE("peer set") {
  PeerSet s(3);
  CHECK(s.insert(2));
  CHECK_FALSE(s.insert(2));
  CHECK(s.insert(130));  // grows beyond the initial capacity
  CHECK(s.contains(130));
  CHECK_FALSE(s.contains(1));
  CHECK(s.size() == 2);
}

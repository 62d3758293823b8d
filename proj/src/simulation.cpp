#include "trail/simulation.hpp"

#include "trail/peer.hpp"

namespace trail {

std::mt19937_64 make_stream(std::uint64_t seed, RngStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

namespace {

const SimulationConfig& checked(const SimulationConfig& cfg) {
  const auto violations = validate_params(cfg.protocol.params);
  if (!violations.empty()) {
    std::string msg = "invalid parameters:";
    for (const auto& v : violations) msg += " " + v.constraint + " (" + v.detail + ");";
    throw ConfigurationError(msg);
  }
  if (cfg.walletsPerShard == 0) throw ConfigurationError("walletsPerShard must be positive");
  for (ShardId s : cfg.faults.byzantineShards) {
    if (s.value >= cfg.protocol.params.S) {
      throw ConfigurationError("byzantine shard " + std::to_string(s.value) + " does not exist");
    }
  }
  for (const PeerFault& pf : cfg.faults.peerFaults) {
    if (pf.peer.shard.value >= cfg.protocol.params.S || pf.peer.index >= cfg.protocol.params.s) {
      throw ConfigurationError("faulty peer outside the network");
    }
  }
  if (cfg.faults.detectionDelay < 0) throw ConfigurationError("detection delay must be >= 0");
  return cfg;
}

std::uint64_t network_seed(std::uint64_t seed) {
  auto rng = make_stream(seed, RngStream::network);
  return rng();
}

}  // namespace

Simulation::Simulation(SimulationConfig cfg)
    : cfg_(checked(cfg)),
      wallets_(cfg_.protocol.params.S, cfg_.walletsPerShard),
      network_(cfg_.protocol.params.S, cfg_.protocol.params.s, cfg_.delay, network_seed(cfg_.seed)),
      observer_(cfg_.protocol, wallets_),
      byzantine_(cfg_.protocol.params.S, false),
      everByzantine_(cfg_.protocol.params.S, false),
      bootstrapRng_(make_stream(cfg_.seed, RngStream::bootstrap)),
      workloadRng_(make_stream(cfg_.seed, RngStream::workload)),
      faultRng_(make_stream(cfg_.seed, RngStream::faults)) {
  const Params& p = cfg_.protocol.params;
  peers_.reserve(p.network_size());
  for (std::uint32_t s = 0; s < p.S; ++s) {
    for (std::uint32_t i = 0; i < p.s; ++i) {
      const PeerId id{ShardId{s}, i};
      PeerBehavior behavior = PeerBehavior::correct;
      for (const PeerFault& pf : cfg_.faults.peerFaults) {
        if (pf.peer == id) behavior = pf.behavior;
      }
      peers_.push_back(std::make_unique<Peer>(id, behavior, *this));
    }
  }
}

Simulation::~Simulation() = default;

Peer& Simulation::peer(PeerId id) {
  return *peers_[static_cast<std::size_t>(id.shard.value) * params().s + id.index];
}

const Peer& Simulation::peer(PeerId id) const {
  return *peers_[static_cast<std::size_t>(id.shard.value) * params().s + id.index];
}

std::mt19937_64& Simulation::rng(RngStream stream) {
  switch (stream) {
    case RngStream::bootstrap:
      return bootstrapRng_;
    case RngStream::workload:
      return workloadRng_;
    default:
      return faultRng_;
  }
}

void Simulation::install_record(const Trail& holders, const LedgerRecord& r) {
  for (ShardId s : holders.shards) {
    for (std::uint32_t i = 0; i < params().s; ++i) peer(PeerId{s, i}).ledger().record(r);
  }
}

TxPtr Simulation::submit(Transaction tx) {
  if (tx.id == 0) tx.id = nextTx_++;
  auto ptr = std::make_shared<const Transaction>(std::move(tx));
  observer_.on_started(ptr, round_);
  const ShardId origin = ptr->kind == TxKind::mint ? ptr->tWallet.shard : ptr->sWallet.shard;
  if (origin.value >= params().S || shard_removed(origin)) return ptr;
  for (std::uint32_t i = 0; i < params().s; ++i) peer(PeerId{origin, i}).client_request(ptr);
  return ptr;
}

void Simulation::add_round_hook(std::function<void(Simulation&)> hook) {
  hooks_.push_back(std::move(hook));
}

void Simulation::remove_shard(ShardId s) {
  if (network_.is_removed(s)) return;
  network_.remove_shard(s);
  observer_.on_shard_removed(s);
  for (auto& p : peers_) {
    if (!network_.is_removed(p->self().shard)) p->notify_removed(s);
  }
}

void Simulation::apply_faults() {
  const FaultPlan& plan = cfg_.faults;
  if (plan.byzantineShards.empty()) return;
  if (round_ == plan.failRound) {
    for (ShardId s : plan.byzantineShards) {
      byzantine_[s.value] = true;
      everByzantine_[s.value] = true;
      observer_.on_shard_faulty(s);
    }
  }
  if (cfg_.protocol.validation == Validation::on_recovery &&
      round_ == plan.failRound + plan.detectionDelay) {
    for (ShardId s : plan.byzantineShards) remove_shard(s);
  }
}

MetricsFrame Simulation::step() {
  apply_faults();
  network_.deliver(round_, [this](const Envelope& e) { peer(e.receiver).receive(e); });
  for (auto& hook : hooks_) hook(*this);
  for (auto& p : peers_) {
    if (!network_.is_removed(p->self().shard)) p->tick();
  }
  if (cfg_.clientEscalation && cfg_.protocol.validation != Validation::off) {
    for (const TxPtr& tx : observer_.take_overdue(round_, cfg_.protocol.externalTimeout)) {
      for (auto& p : peers_) {
        if (!network_.is_removed(p->self().shard)) p->client_escalation(tx);
      }
    }
  }
  MetricsFrame frame = observer_.close_round(round_, network_);
  ++round_;
  return frame;
}

std::vector<MetricsFrame> Simulation::run(Round rounds) {
  std::vector<MetricsFrame> frames;
  frames.reserve(static_cast<std::size_t>(rounds));
  for (Round r = 0; r < rounds; ++r) frames.push_back(step());
  return frames;
}

std::vector<ShardId> Simulation::live_shards() const {
  std::vector<ShardId> out;
  for (std::uint32_t s = 0; s < params().S; ++s) {
    if (!network_.is_removed(ShardId{s})) out.push_back(ShardId{s});
  }
  return out;
}

std::vector<ShardId> Simulation::correct_shards() const {
  std::vector<ShardId> out;
  for (std::uint32_t s = 0; s < params().S; ++s) {
    if (!network_.is_removed(ShardId{s}) && !byzantine_[s]) out.push_back(ShardId{s});
  }
  return out;
}

WalletId Simulation::recovery_target(CoinId coin) const {
  return recovery_wallet(coin, live_shards(), cfg_.walletsPerShard);
}

bool Simulation::peer_correct(PeerId id) const {
  return !everByzantine_[id.shard.value] && peer(id).behavior() == PeerBehavior::correct;
}

std::vector<const Ledger*> Simulation::correct_ledgers() const {
  std::vector<const Ledger*> out;
  for (const auto& p : peers_) {
    if (peer_correct(p->self())) out.push_back(&p->ledger());
  }
  return out;
}

}  // namespace trail

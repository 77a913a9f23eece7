#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lion/core.hpp"
#include "lion/plan.hpp"

namespace lion {

struct LatencyModel {
  std::uint64_t rpc_one_way_us = 500;     // per one-way message hop
  std::uint64_t remaster_delay_us = 3000; // block + log sync + leader flip
  std::uint64_t migrate_us_per_item = 50;
  std::uint64_t migrate_base_us = 10000;
  std::uint64_t exec_us_per_op = 100;     // worker compute per operation
};

struct EpochConfig {
  std::uint64_t interval_us = 10000;  // 10 ms group commit
  std::uint64_t txn_cap = 10000;      // early close on batch size
};

enum class EventKind : std::uint8_t {
  Timer = 0,
  Message,
  WorkerGrant,
  WorkerDone,
  EpochClose,
  EpochApply,
  RemasterStart,
  RemasterDone,
  RemasterConflict,
  AddReplicaDone,
  RemoveReplica,
  BatchCut,
  TxnEvent,
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::Timer: return "timer";
    case EventKind::Message: return "msg";
    case EventKind::WorkerGrant: return "worker_grant";
    case EventKind::WorkerDone: return "worker_done";
    case EventKind::EpochClose: return "epoch_close";
    case EventKind::EpochApply: return "epoch_apply";
    case EventKind::RemasterStart: return "remaster_start";
    case EventKind::RemasterDone: return "remaster_done";
    case EventKind::RemasterConflict: return "remaster_conflict";
    case EventKind::AddReplicaDone: return "add_replica_done";
    case EventKind::RemoveReplica: return "remove_replica";
    case EventKind::BatchCut: return "batch_cut";
    case EventKind::TxnEvent: return "txn";
  }
  return "?";
}

enum class RemasterResult { Success, Conflict, NoReplica };

struct SimConfig {
  std::uint32_t nodes = 4;
  std::uint32_t partitions = 48;
  std::uint32_t replica_min = 2;
  std::uint32_t replica_max = 4;
  std::uint32_t workers_per_node = 4;
  std::uint32_t keys_per_partition = 1000;
  LatencyModel latency;
  EpochConfig epoch;
  bool strict_checks = false;  // validate invariants after every event
};

// Single-threaded discrete-event cluster simulator: virtual microsecond
// clock, replica state machines, remaster latches, and epoch group commit.
// Every run is a pure function of (config, seed): events fire in strict
// (time, seq) order and all state lives in ordered containers.
class Simulator {
 public:
  struct Cell {
    std::int64_t value = 0;
    std::uint64_t version = 0;
    TxnId lock = 0;
  };
  using PartitionStore = std::map<Key, Cell>;

  explicit Simulator(const SimConfig& cfg)
      : cfg_(cfg),
        placement_(PlacementMap::round_robin(cfg.nodes, cfg.partitions,
                                             cfg.replica_min, cfg.replica_max)),
        latches_(cfg.partitions),
        pools_(cfg.nodes, WorkerPool{cfg.workers_per_node, 0, {}}) {
    stores_.resize(cfg.partitions);
    for (PartitionId v = 0; v < cfg.partitions; ++v)
      for (const ReplicaState& r : placement_.replicas(v)) {
        PartitionStore& s = stores_[v][r.node];
        for (Key k = 0; k < cfg.keys_per_partition; ++k) s[k] = Cell{};
      }
    schedule(cfg_.epoch.interval_us, EventKind::EpochClose, 0, epoch_id_, 0,
             [this, id = epoch_id_] { on_epoch_timer(id); });
  }

  std::uint64_t now() const { return now_; }
  PlacementMap& placement() { return placement_; }
  const PlacementMap& placement() const { return placement_; }
  const SimConfig& config() const { return cfg_; }
  std::uint64_t epoch() const { return epoch_id_; }
  std::uint64_t trace_hash() const { return trace_hash_; }
  std::uint64_t bytes_on_wire() const { return total_bytes_; }

  // Optional line sink for the `time kind node detail` trace log.
  void set_trace_sink(std::function<void(const std::string&)> sink) {
    sink_ = std::move(sink);
  }

  void schedule(std::uint64_t delay, EventKind kind, NodeId node, std::uint64_t a,
                std::uint64_t b, std::function<void()> fn) {
    Event e;
    e.time = now_ + delay;
    e.seq = ++seq_;
    e.kind = kind;
    e.node = node;
    e.a = a;
    e.b = b;
    e.fn = std::move(fn);
    queue_.push(std::move(e));
  }

  // One-way message with byte accounting.
  void send_message(NodeId from, NodeId to, std::uint64_t bytes,
                    std::function<void()> deliver) {
    total_bytes_ += bytes;
    schedule(cfg_.latency.rpc_one_way_us, EventKind::Message, to, from, bytes,
             std::move(deliver));
  }

  void run_until(std::uint64_t t) {
    while (!queue_.empty() && queue_.top().time <= t) {
      Event e = pop_event();
      fire(e);
    }
    now_ = std::max(now_, t);
  }

  // Drain every scheduled event except bare timers that would run forever.
  void run_all(std::uint64_t hard_stop) { run_until(hard_stop); }

  bool idle() const { return queue_.empty(); }

  // ---- worker capacity -------------------------------------------------

  void acquire_worker(NodeId n, std::function<void()> granted) {
    WorkerPool& p = pools_.at(n);
    if (p.busy < p.capacity) {
      ++p.busy;
      schedule(0, EventKind::WorkerGrant, n, p.busy, 0, std::move(granted));
    } else {
      p.waiting.push_back(std::move(granted));
    }
  }

  void release_worker(NodeId n) {
    WorkerPool& p = pools_.at(n);
    if (!p.waiting.empty()) {
      std::function<void()> next = std::move(p.waiting.front());
      p.waiting.pop_front();
      schedule(0, EventKind::WorkerGrant, n, p.busy, 1, std::move(next));
    } else {
      if (p.busy == 0) throw std::logic_error("worker release underflow");
      --p.busy;
    }
  }

  std::uint32_t workers_busy(NodeId n) const { return pools_.at(n).busy; }

  // ---- storage ---------------------------------------------------------

  Cell& cell(PartitionId v, NodeId n, Key k) {
    auto it = stores_.at(v).find(n);
    if (it == stores_.at(v).end())
      throw std::invalid_argument("no replica store on node");
    return it->second[k];
  }

  bool has_store(PartitionId v, NodeId n) const {
    return stores_.at(v).count(n) > 0;
  }

  // Committed value visible at a given replica (tests use this to probe
  // epoch visibility on secondaries).
  std::int64_t read_committed(PartitionId v, NodeId n, Key k) const {
    auto it = stores_.at(v).find(n);
    if (it == stores_.at(v).end())
      throw std::invalid_argument("no replica store on node");
    auto c = it->second.find(k);
    return c == it->second.end() ? 0 : c->second.value;
  }

  std::string store_bytes(PartitionId v, NodeId n) const {
    std::ostringstream os;
    auto it = stores_.at(v).find(n);
    if (it == stores_.at(v).end()) return {};
    for (const auto& [k, c] : it->second)
      os << k << ':' << c.value << ':' << c.version << ';';
    return os.str();
  }

  // ---- partition latch (remaster exclusion + op blocking) ---------------

  bool latched(PartitionId v) const { return latches_.at(v).held; }

  // Run fn when the partition is not mid-remaster; blocked operations
  // resume right after the leader flip.
  void partition_op(PartitionId v, std::function<void()> fn) {
    Latch& l = latches_.at(v);
    if (l.held) {
      l.blocked.push_back(std::move(fn));
    } else {
      fn();
    }
  }

  // ---- replica state machines -------------------------------------------

  // Remaster: block new operations, synchronize the log, flip leadership as
  // one atomic event after remaster_delay_us. Concurrent attempts with the
  // same target share the outcome; different targets fail with Conflict.
  void remaster(PartitionId v, NodeId target,
                std::function<void(RemasterResult)> done) {
    if (placement_.primary_of(v) == target) {
      done(RemasterResult::Success);
      return;
    }
    if (!placement_.has_replica(v, target)) {
      done(RemasterResult::NoReplica);
      return;
    }
    Latch& l = latches_.at(v);
    if (l.held) {
      if (l.target == target) {
        l.joiners.push_back(std::move(done));
      } else {
        trace(EventKind::RemasterConflict, target, v, l.target);
        done(RemasterResult::Conflict);
      }
      return;
    }
    l.held = true;
    l.target = target;
    l.joiners.push_back(std::move(done));
    trace(EventKind::RemasterStart, target, v, placement_.primary_of(v));
    total_bytes_ += 96;  // request + ack pair
    schedule(cfg_.latency.remaster_delay_us, EventKind::RemasterDone, target, v,
             0, [this, v, target] { finish_remaster(v, target); });
  }

  // Background snapshot copy; the new secondary lands synchronized to the
  // current epoch. Rejected when the node already holds a replica or the
  // partition sits at replica_max.
  void add_replica(PartitionId v, NodeId n, std::function<void(bool)> done) {
    if (placement_.has_replica(v, n)) {
      done(false);
      return;
    }
    if (placement_.live_replica_count(v) >= placement_.replica_max()) {
      done(false);
      return;
    }
    if (pending_add_.count({v, n})) {
      done(false);
      return;
    }
    pending_add_.insert({v, n});
    NodeId prim = placement_.primary_of(v);
    std::uint64_t items = stores_.at(v).at(prim).size();
    std::uint64_t delay =
        cfg_.latency.migrate_base_us + cfg_.latency.migrate_us_per_item * items;
    total_bytes_ += 64 + 24 * items;
    auto cb = std::make_shared<std::function<void(bool)>>(std::move(done));
    schedule(delay, EventKind::AddReplicaDone, n, v, items, [this, v, n, cb] {
      pending_add_.erase({v, n});
      NodeId prim_now = placement_.primary_of(v);
      stores_.at(v)[n] = stores_.at(v).at(prim_now);
      if (placement_.has_any_replica_slot(v, n)) {
        // Tombstoned slot resurrected by the fresh copy.
        placement_.erase_replica(v, n);
      }
      placement_.add_replica(v, n, ReplicaRole::Secondary);
      placement_.set_applied_epoch(v, n, last_closed_epoch());
      trace(EventKind::AddReplicaDone, n, v, 0);
      check_invariants();
      if (*cb) (*cb)(true);
    });
  }

  // Tombstone a secondary: it stops receiving synchronization immediately
  // and is physically dropped at the next epoch boundary.
  bool remove_replica(PartitionId v, NodeId n) {
    if (!placement_.has_replica(v, n)) return false;
    if (placement_.primary_of(v) == n) return false;
    placement_.mark_delete(v, n);
    trace(EventKind::RemoveReplica, n, v, 0);
    return true;
  }

  void migrate(PartitionId v, NodeId n, std::function<void(bool)> done) {
    if (placement_.has_replica(v, n)) {
      remaster(v, n, [done](RemasterResult r) { done(r == RemasterResult::Success); });
      return;
    }
    add_replica(v, n, [this, v, n, done](bool ok) {
      if (!ok) {
        done(false);
        return;
      }
      remaster(v, n, [done](RemasterResult r) { done(r == RemasterResult::Success); });
    });
  }

  // Execute plan actions: chains are serialized per partition, run
  // concurrently across partitions, and survive individual failures.
  void apply_plan(const std::vector<ReplicaAction>& actions,
                  std::function<void()> all_done = {}) {
    std::map<PartitionId, std::vector<ReplicaAction>> chains;
    for (const ReplicaAction& a : actions) chains[a.partition].push_back(a);
    // Removals run before adds so a partition at replica_max frees a slot
    // for the incoming copy.
    for (auto& [v, chain] : chains)
      std::stable_sort(chain.begin(), chain.end(),
                       [](const ReplicaAction& a, const ReplicaAction& b) {
                         return (a.kind == ActionKind::RemoveReplica) >
                                (b.kind == ActionKind::RemoveReplica);
                       });
    auto pending = std::make_shared<std::size_t>(chains.size());
    auto finish = std::make_shared<std::function<void()>>(std::move(all_done));
    if (chains.empty()) {
      if (*finish) (*finish)();
      return;
    }
    for (auto& [v, chain] : chains) run_chain(v, chain, 0, pending, finish);
  }

  // ---- epoch group commit -------------------------------------------------

  // Buffer a committed transaction's writes; they become visible when the
  // epoch closes. Write locks stay held until visibility.
  void buffer_group_commit(TxnId txn, const std::vector<std::tuple<PartitionId, Key, std::int64_t>>& writes,
                           std::function<void(std::uint64_t)> on_visible) {
    for (const auto& [v, k, val] : writes) pending_writes_.push_back({v, k, val, txn});
    if (on_visible) visibility_callbacks_.push_back(std::move(on_visible));
    ++epoch_txns_;
    if (epoch_txns_ >= cfg_.epoch.txn_cap) close_epoch();
  }

  std::uint64_t last_closed_epoch() const { return epoch_id_ == 0 ? 0 : epoch_id_ - 1; }

  void check_invariants() const {
    if (!cfg_.strict_checks) return;
    placement_.validate();
  }

 private:
  struct Event {
    std::uint64_t time = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Timer;
    NodeId node = 0;
    std::uint64_t a = 0, b = 0;
    std::function<void()> fn;
  };
  struct EventOrder {
    bool operator()(const Event& x, const Event& y) const {
      if (x.time != y.time) return x.time > y.time;
      return x.seq > y.seq;
    }
  };
  struct Latch {
    bool held = false;
    NodeId target = 0;
    std::vector<std::function<void()>> blocked;
    std::vector<std::function<void(RemasterResult)>> joiners;
  };
  struct WorkerPool {
    std::uint32_t capacity = 0;
    std::uint32_t busy = 0;
    std::deque<std::function<void()>> waiting;
  };
  struct PendingWrite {
    PartitionId pid;
    Key key;
    std::int64_t value;
    TxnId txn;
  };

  Event pop_event() {
    Event e = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    return e;
  }

  void fire(Event& e) {
    now_ = e.time;
    trace(e.kind, e.node, e.a, e.b);
    if (e.fn) e.fn();
    check_invariants();
  }

  void trace(EventKind kind, NodeId node, std::uint64_t a, std::uint64_t b) {
    auto mix = [this](std::uint64_t v) {
      trace_hash_ ^= v;
      trace_hash_ *= 1099511628211ULL;
    };
    mix(now_);
    mix(static_cast<std::uint64_t>(kind));
    mix(node);
    mix(a);
    mix(b);
    if (sink_) {
      std::ostringstream os;
      os << now_ << ' ' << to_string(kind) << ' ' << node << ' ' << a << ' ' << b;
      sink_(os.str());
    }
  }

  void finish_remaster(PartitionId v, NodeId target) {
    Latch& l = latches_.at(v);
    NodeId old = placement_.primary_of(v);
    // Log sync: the candidate's state catches up to the blocked primary
    // before the single atomic role flip.
    stores_.at(v)[target] = stores_.at(v).at(old);
    placement_.remaster(v, target);
    trace(EventKind::RemasterDone, target, v, old);
    std::vector<std::function<void()>> blocked = std::move(l.blocked);
    std::vector<std::function<void(RemasterResult)>> joiners = std::move(l.joiners);
    l.held = false;
    l.blocked.clear();
    l.joiners.clear();
    check_invariants();
    for (auto& j : joiners) j(RemasterResult::Success);
    for (auto& fn : blocked)
      schedule(0, EventKind::TxnEvent, target, v, 2, std::move(fn));
  }

  void run_chain(PartitionId v, std::vector<ReplicaAction> chain, std::size_t idx,
                 std::shared_ptr<std::size_t> pending,
                 std::shared_ptr<std::function<void()>> finish) {
    if (idx >= chain.size()) {
      if (--*pending == 0 && *finish) (*finish)();
      return;
    }
    auto next = [this, v, chain, idx, pending, finish](bool) {
      run_chain(v, chain, idx + 1, pending, finish);
    };
    const ReplicaAction& a = chain[idx];
    switch (a.kind) {
      case ActionKind::RemoveReplica:
        next(remove_replica(a.partition, a.node));
        break;
      case ActionKind::AddReplica:
        add_replica(a.partition, a.node, next);
        break;
      case ActionKind::Remaster:
        remaster(a.partition, a.node,
                 [next](RemasterResult r) { next(r == RemasterResult::Success); });
        break;
      case ActionKind::Migrate:
        migrate(a.partition, a.node, next);
        break;
    }
  }

  void on_epoch_timer(std::uint64_t id) {
    if (id != epoch_id_) return;  // an early close superseded this tick
    close_epoch();
  }

  void close_epoch() {
    // Apply buffered effects at the primaries: values become visible,
    // versions advance, write locks release.
    std::map<PartitionId, std::vector<std::tuple<Key, std::int64_t, std::uint64_t>>> shipped;
    for (const PendingWrite& w : pending_writes_) {
      NodeId prim = placement_.primary_of(w.pid);
      Cell& c = cell(w.pid, prim, w.key);
      c.value = w.value;
      ++c.version;
      c.lock = 0;
      shipped[w.pid].push_back({w.key, c.value, c.version});
    }
    pending_writes_.clear();
    epoch_txns_ = 0;

    // Ship to live secondaries; their stores apply after one hop.
    for (auto& [v, writes] : shipped) {
      for (NodeId s : placement_.secondaries_of(v)) {
        total_bytes_ += 32 + 24 * writes.size();
        std::uint64_t target_epoch = epoch_id_;
        schedule(cfg_.latency.rpc_one_way_us, EventKind::EpochApply, s, v,
                 writes.size(), [this, v, s, writes, target_epoch] {
                   auto it = stores_.at(v).find(s);
                   if (it == stores_.at(v).end()) return;  // dropped meanwhile
                   for (const auto& [k, val, ver] : writes) {
                     Cell& c = it->second[k];
                     c.value = val;
                     c.version = ver;
                   }
                   placement_.set_applied_epoch(v, s, target_epoch);
                 });
      }
    }

    // Physically drop tombstoned replicas.
    for (PartitionId v = 0; v < cfg_.partitions; ++v)
      for (const ReplicaState& r : placement_.replicas(v))
        if (r.delete_flag) stores_.at(v).erase(r.node);
    placement_.drop_tombstones();

    std::vector<std::function<void(std::uint64_t)>> cbs =
        std::move(visibility_callbacks_);
    visibility_callbacks_.clear();
    trace(EventKind::EpochClose, 0, epoch_id_, cbs.size());
    ++epoch_id_;
    for (auto& cb : cbs) cb(now_);
    schedule(cfg_.epoch.interval_us, EventKind::EpochClose, 0, epoch_id_, 0,
             [this, id = epoch_id_] { on_epoch_timer(id); });
    check_invariants();
  }

  SimConfig cfg_;
  std::uint64_t now_ = 0;
  std::uint64_t seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  PlacementMap placement_;
  std::vector<std::map<NodeId, PartitionStore>> stores_;
  std::vector<Latch> latches_;
  std::vector<WorkerPool> pools_;
  std::set<std::pair<PartitionId, NodeId>> pending_add_;

  std::uint64_t epoch_id_ = 0;
  std::uint64_t epoch_txns_ = 0;
  std::vector<PendingWrite> pending_writes_;
  std::vector<std::function<void(std::uint64_t)>> visibility_callbacks_;

  std::uint64_t trace_hash_ = 1469598103934665603ULL;
  std::uint64_t total_bytes_ = 0;
  std::function<void(const std::string&)> sink_;
};

}  // namespace lion

#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lion {

using NodeId = std::uint32_t;
using PartitionId = std::uint32_t;
using TxnId = std::uint64_t;
using Key = std::uint64_t;

enum class ReplicaRole { Primary, Secondary };

enum class OpType { Read, Write };

struct Op {
  PartitionId partition = 0;
  Key key = 0;
  OpType type = OpType::Read;
  std::int64_t payload = 0;
};

struct TxnMeta {
  TxnId txn_id = 0;
  std::vector<PartitionId> txn_parts;  // sorted, deduplicated
  std::vector<Op> ops;
  std::uint64_t arrival_time_us = 0;

  static TxnMeta make(TxnId id, std::uint64_t arrival_us, std::vector<Op> ops) {
    TxnMeta t;
    t.txn_id = id;
    t.arrival_time_us = arrival_us;
    t.ops = std::move(ops);
    for (const Op& op : t.ops) t.txn_parts.push_back(op.partition);
    std::sort(t.txn_parts.begin(), t.txn_parts.end());
    t.txn_parts.erase(std::unique(t.txn_parts.begin(), t.txn_parts.end()),
                      t.txn_parts.end());
    return t;
  }
};

struct TxnBatch {
  std::vector<TxnMeta> txns;
};

// Balance bookkeeping used by the rearrangement algorithm: accumulated
// clump weight per node, permissible imbalance epsilon and the derived
// ceiling theta.
struct LoadVector {
  std::vector<double> balance;
  double avg = 0.0;
  double epsilon = 0.1;
  double theta = 0.0;

  explicit LoadVector(std::size_t nodes = 0, double eps = 0.1)
      : balance(nodes, 0.0), epsilon(eps) {}

  void set_avg(double a) {
    avg = a;
    theta = avg * (1.0 + epsilon);
  }

  void add(NodeId n, double w) { balance.at(n) += w; }
  void remove(NodeId n, double w) { balance.at(n) -= w; }

  bool balanced() const {
    for (double b : balance)
      if (b > theta + 1e-9) return false;
    return true;
  }
};

struct ReplicaState {
  PartitionId partition = 0;
  NodeId node = 0;
  ReplicaRole role = ReplicaRole::Secondary;
  std::uint64_t applied_epoch = 0;
  bool delete_flag = false;
  double access_freq = 0.0;  // normalized f(v,n) in [0,1]
  std::uint64_t raw_accesses = 0;
};

// Which node holds the primary and which nodes hold secondaries of every
// partition, plus per-replica access frequencies. Pure data; mutation only
// happens inside the single-threaded simulation loop.
class PlacementMap {
 public:
  PlacementMap() = default;
  PlacementMap(std::uint32_t nodes, std::uint32_t partitions,
               std::uint32_t replica_min = 2, std::uint32_t replica_max = 4)
      : node_count_(nodes),
        replica_min_(replica_min),
        replica_max_(replica_max),
        parts_(partitions) {
    for (PartitionId v = 0; v < partitions; ++v) parts_[v].reserve(replica_min);
  }

  // Default layout: primary of partition i on node i mod n; the j-th
  // secondary on node (i + j) mod n.
  static PlacementMap round_robin(std::uint32_t nodes, std::uint32_t partitions,
                                  std::uint32_t replica_min = 2,
                                  std::uint32_t replica_max = 4) {
    PlacementMap p(nodes, partitions, replica_min, replica_max);
    for (PartitionId v = 0; v < partitions; ++v) {
      p.add_replica_unchecked(v, v % nodes, ReplicaRole::Primary);
      for (std::uint32_t j = 1; j < replica_min && j < nodes; ++j)
        p.add_replica_unchecked(v, (v + j) % nodes, ReplicaRole::Secondary);
    }
    return p;
  }

  std::uint32_t node_count() const { return node_count_; }
  std::uint32_t partition_count() const {
    return static_cast<std::uint32_t>(parts_.size());
  }
  std::uint32_t replica_min() const { return replica_min_; }
  std::uint32_t replica_max() const { return replica_max_; }

  NodeId primary_of(PartitionId v) const {
    const auto& reps = replicas_checked(v);
    for (const ReplicaState& r : reps)
      if (r.role == ReplicaRole::Primary) return r.node;
    throw std::logic_error("partition has no primary replica");
  }

  std::vector<NodeId> secondaries_of(PartitionId v) const {
    const auto& reps = replicas_checked(v);
    std::vector<NodeId> out;
    for (const ReplicaState& r : reps)
      if (r.role == ReplicaRole::Secondary && !r.delete_flag)
        out.push_back(r.node);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool has_replica(PartitionId v, NodeId n) const {
    const ReplicaState* r = find(v, n);
    return r != nullptr && !r->delete_flag;
  }

  bool has_any_replica_slot(PartitionId v, NodeId n) const {
    return find(v, n) != nullptr;
  }

  std::uint32_t live_replica_count(PartitionId v) const {
    const auto& reps = replicas_checked(v);
    std::uint32_t c = 0;
    for (const ReplicaState& r : reps)
      if (!r.delete_flag) ++c;
    return c;
  }

  const std::vector<ReplicaState>& replicas(PartitionId v) const {
    return replicas_checked(v);
  }

  double access_freq(PartitionId v, NodeId n) const {
    const ReplicaState* r = find(v, n);
    if (!r) throw std::invalid_argument("no replica of partition on node");
    return r->access_freq;
  }

  void record_access(PartitionId v, NodeId n) {
    ReplicaState* r = find_mut(v, n);
    if (!r || r->delete_flag)
      throw std::invalid_argument("record_access: node hosts no replica");
    r->raw_accesses++;
  }

  // Interval boundary: raw counters are normalized by the maximum raw
  // count over all replicas this interval; untouched replicas decay by
  // 0.5 so stale heat fades.
  void close_access_interval() {
    std::uint64_t max_raw = 0;
    for (auto& reps : parts_)
      for (ReplicaState& r : reps) max_raw = std::max(max_raw, r.raw_accesses);
    for (auto& reps : parts_)
      for (ReplicaState& r : reps) {
        if (r.raw_accesses > 0 && max_raw > 0)
          r.access_freq = static_cast<double>(r.raw_accesses) /
                          static_cast<double>(max_raw);
        else
          r.access_freq *= 0.5;
        r.raw_accesses = 0;
      }
  }

  void add_replica(PartitionId v, NodeId n, ReplicaRole role) {
    if (find(v, n))
      throw std::invalid_argument("node already hosts a replica of partition");
    add_replica_unchecked(v, n, role);
  }

  void set_role(PartitionId v, NodeId n, ReplicaRole role) {
    ReplicaState* r = find_mut(v, n);
    if (!r) throw std::invalid_argument("set_role: no replica");
    r->role = role;
  }

  void set_applied_epoch(PartitionId v, NodeId n, std::uint64_t epoch) {
    ReplicaState* r = find_mut(v, n);
    if (r) r->applied_epoch = epoch;
  }

  std::uint64_t applied_epoch(PartitionId v, NodeId n) const {
    const ReplicaState* r = find(v, n);
    if (!r) throw std::invalid_argument("no replica of partition on node");
    return r->applied_epoch;
  }

  // Remastering as a single atomic role flip: the old primary becomes a
  // secondary, the target becomes the primary.
  void remaster(PartitionId v, NodeId target) {
    NodeId old = primary_of(v);
    if (old == target) return;
    ReplicaState* t = find_mut(v, target);
    if (!t || t->delete_flag)
      throw std::invalid_argument("remaster target holds no live replica");
    find_mut(v, old)->role = ReplicaRole::Secondary;
    t->role = ReplicaRole::Primary;
  }

  void mark_delete(PartitionId v, NodeId n) {
    ReplicaState* r = find_mut(v, n);
    if (!r) throw std::invalid_argument("mark_delete: no replica");
    if (r->role == ReplicaRole::Primary)
      throw std::invalid_argument("cannot remove a primary replica");
    r->delete_flag = true;
  }

  // Physically drop tombstoned replicas (done at epoch boundaries).
  void drop_tombstones() {
    for (auto& reps : parts_)
      reps.erase(std::remove_if(reps.begin(), reps.end(),
                                [](const ReplicaState& r) { return r.delete_flag; }),
                 reps.end());
  }

  void erase_replica(PartitionId v, NodeId n) {
    auto& reps = replicas_checked_mut(v);
    reps.erase(std::remove_if(reps.begin(), reps.end(),
                              [n](const ReplicaState& r) { return r.node == n; }),
               reps.end());
  }

  std::vector<PartitionId> hosted_partitions(NodeId n) const {
    std::vector<PartitionId> out;
    for (PartitionId v = 0; v < parts_.size(); ++v)
      if (has_replica(v, n)) out.push_back(v);
    return out;
  }

  // Structural invariants: exactly one primary, replica count within
  // [replica_min, replica_max], no duplicated node per partition. The lower
  // bound only has to hold at rest (plans may dip below it mid-transition
  // between a removal and the matching add), so it can be waived.
  void validate(bool check_min = true) const {
    for (PartitionId v = 0; v < parts_.size(); ++v) {
      std::uint32_t primaries = 0, live = 0;
      std::set<NodeId> nodes;
      for (const ReplicaState& r : parts_[v]) {
        if (!nodes.insert(r.node).second)
          throw std::logic_error("duplicate replica on one node");
        if (r.delete_flag) continue;
        ++live;
        if (r.role == ReplicaRole::Primary) ++primaries;
      }
      if (primaries != 1) throw std::logic_error("partition must have exactly one primary");
      if (live > replica_max_) throw std::logic_error("replica count above replica_max");
      if (check_min && live < std::min(replica_min_, node_count_))
        throw std::logic_error("replica count below replica_min");
    }
  }

  // Line-oriented text format: partition,primary_node,secondary_nodes...
  std::string serialize() const {
    std::ostringstream os;
    for (PartitionId v = 0; v < parts_.size(); ++v) {
      os << v << ',' << primary_of(v);
      for (NodeId n : secondaries_of(v)) os << ',' << n;
      os << '\n';
    }
    return os.str();
  }

  static PlacementMap deserialize(const std::string& text, std::uint32_t nodes,
                                  std::uint32_t replica_min = 2,
                                  std::uint32_t replica_max = 4) {
    std::istringstream is(text);
    std::string line;
    std::vector<std::pair<NodeId, std::vector<NodeId>>> rows;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string tok;
      std::vector<NodeId> fields;
      while (std::getline(ls, tok, ',')) fields.push_back(static_cast<NodeId>(std::stoul(tok)));
      if (fields.size() < 2) throw std::invalid_argument("bad placement line: " + line);
      PartitionId v = fields[0];
      if (v >= rows.size()) rows.resize(v + 1);
      rows[v] = {fields[1], std::vector<NodeId>(fields.begin() + 2, fields.end())};
    }
    PlacementMap p(nodes, static_cast<std::uint32_t>(rows.size()), replica_min,
                   replica_max);
    for (PartitionId v = 0; v < rows.size(); ++v) {
      p.add_replica_unchecked(v, rows[v].first, ReplicaRole::Primary);
      for (NodeId n : rows[v].second)
        p.add_replica_unchecked(v, n, ReplicaRole::Secondary);
    }
    return p;
  }

 private:
  void add_replica_unchecked(PartitionId v, NodeId n, ReplicaRole role) {
    ReplicaState r;
    r.partition = v;
    r.node = n;
    r.role = role;
    replicas_checked_mut(v).push_back(r);
  }

  const std::vector<ReplicaState>& replicas_checked(PartitionId v) const {
    if (v >= parts_.size()) throw std::invalid_argument("unknown partition");
    return parts_[v];
  }
  std::vector<ReplicaState>& replicas_checked_mut(PartitionId v) {
    if (v >= parts_.size()) throw std::invalid_argument("unknown partition");
    return parts_[v];
  }

  const ReplicaState* find(PartitionId v, NodeId n) const {
    for (const ReplicaState& r : replicas_checked(v))
      if (r.node == n) return &r;
    return nullptr;
  }
  ReplicaState* find_mut(PartitionId v, NodeId n) {
    for (ReplicaState& r : replicas_checked_mut(v))
      if (r.node == n) return &r;
    return nullptr;
  }

  std::uint32_t node_count_ = 0;
  std::uint32_t replica_min_ = 2;
  std::uint32_t replica_max_ = 4;
  std::vector<std::vector<ReplicaState>> parts_;
};

inline NodeId primary_of(PartitionId v, const PlacementMap& p) {
  return p.primary_of(v);
}

inline std::vector<NodeId> secondaries_of(PartitionId v, const PlacementMap& p) {
  return p.secondaries_of(v);
}

}  // namespace lion

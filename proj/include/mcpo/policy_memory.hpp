#pragma once

#include <deque>
#include <memory>

#include "mcpo/types.hpp"

namespace mcpo {

// One stored policy: the full flat parameter vector (policy and value heads
// share it) plus the update step it was written at. Parameters are immutable
// once stored and shared, so copying memories and states stays cheap.
struct PolicySnapshot {
  std::shared_ptr<const Vec> params;
  long created_at_update = 0;
};

// Bounded FIFO of snapshots; writing at capacity evicts the oldest entry.
// Slot 0 is the oldest occupied entry.
class PolicyMemory {
 public:
  explicit PolicyMemory(int capacity = 1) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError("PolicyMemory: capacity must be >= 1");
  }

  int capacity() const { return capacity_; }
  int size() const { return static_cast<int>(entries_.size()); }
  bool empty() const { return entries_.empty(); }
  const PolicySnapshot& entry(int i) const { return entries_.at(i); }

  void push(Vec params, long created_at_update) {
    if (!entries_.empty() &&
        created_at_update < entries_.back().created_at_update)
      throw UsageError("PolicyMemory: creation indices must increase");
    entries_.push_back(
        {std::make_shared<const Vec>(std::move(params)), created_at_update});
    if (size() > capacity_) entries_.pop_front();
  }

  // P x size matrix of snapshot columns, oldest first
  Mat snapshot_matrix() const {
    if (empty()) throw UsageError("PolicyMemory: empty");
    Mat m(entries_.front().params->size(), size());
    for (int i = 0; i < size(); ++i) m.col(i) = *entries_[i].params;
    return m;
  }

 private:
  int capacity_;
  std::deque<PolicySnapshot> entries_;
};

// Convex combination of snapshots in flat parameter space. `weights` must be
// a simplex vector with one entry per occupied slot (oldest first).
Vec virtual_policy(const Vec& weights, const PolicyMemory& memory);

// Uniform weights over occupied slots (the mean-combination ablation).
Vec uniform_weights(const PolicyMemory& memory);

}  // namespace mcpo

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pxmc/tensor.hpp"

namespace pxmc {

/// Which friction/update group a parameter belongs to.
enum class Role {
  Expanded,  // P_i, Q_j and their low-rank pieces
  Base,      // V, a, and merged W, b
};

/// Role of a tree entry, from its name ("l0.P1", "l2.Q1.L2", "l1.V", ...).
Role role_of(std::string_view name);

// Ordered (name -> tensor) collection holding a model's positions, momenta,
// gradients or merged weights. Entry order is significant for flattening and
// for the checkpoint format.
class ParamTree {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  Tensor& at(std::string_view name);
  const Tensor& at(std::string_view name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& operator[](std::size_t i) { return entries_[i]; }

  /// Same names in the same order with the same dims.
  bool congruent(const ParamTree& other) const;
  void require_congruent(const ParamTree& other, const char* what) const;

  ParamTree zeros_like() const;
  Index total_size() const;
  VectorX<double> flatten() const;
  /// Inverse of flatten() onto this tree's structure.
  ParamTree unflatten(const VectorX<double>& flat) const;

  double squared_norm() const;
  bool all_finite() const;

  /// this += alpha * other
  ParamTree& axpy(double alpha, const ParamTree& other);
  ParamTree& scale(double alpha);

  friend bool operator==(const ParamTree&, const ParamTree&) = default;

 private:
  std::vector<Entry> entries_;
};

}  // namespace pxmc

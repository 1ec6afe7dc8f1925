#include "pxmc/param_tree.hpp"

#include <algorithm>

namespace pxmc {

Role role_of(std::string_view name) {
  const auto dot = name.find('.');
  const char head = dot == std::string_view::npos || dot + 1 >= name.size() ? name.front() : name[dot + 1];
  return head == 'P' || head == 'Q' ? Role::Expanded : Role::Base;
}

void ParamTree::add(std::string name, Tensor value) {
  if (contains(name)) throw ShapeError("duplicate parameter name " + name);
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamTree::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

Tensor& ParamTree::at(std::string_view name) {
  for (auto& e : entries_)
    if (e.first == name) return e.second;
  throw ShapeError("no parameter named " + std::string(name));
}

const Tensor& ParamTree::at(std::string_view name) const {
  return const_cast<ParamTree*>(this)->at(name);
}

bool ParamTree::congruent(const ParamTree& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i)
    if (entries_[i].first != other.entries_[i].first || entries_[i].second.dims() != other.entries_[i].second.dims())
      return false;
  return true;
}

void ParamTree::require_congruent(const ParamTree& other, const char* what) const {
  if (!congruent(other)) throw ShapeError(std::string(what) + ": parameter trees are not congruent");
}

ParamTree ParamTree::zeros_like() const {
  ParamTree out;
  for (const auto& [name, t] : entries_) out.entries_.emplace_back(name, Tensor(t.dims()));
  return out;
}

Index ParamTree::total_size() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

VectorX<double> ParamTree::flatten() const {
  VectorX<double> flat(total_size());
  Index offset = 0;
  for (const auto& e : entries_) {
    flat.segment(offset, e.second.size()) = e.second.flat();
    offset += e.second.size();
  }
  return flat;
}

ParamTree ParamTree::unflatten(const VectorX<double>& flat) const {
  if (flat.size() != total_size()) throw ShapeError("unflatten: size mismatch");
  ParamTree out;
  Index offset = 0;
  for (const auto& [name, t] : entries_) {
    out.entries_.emplace_back(name, Tensor(t.dims(), flat.segment(offset, t.size())));
    offset += t.size();
  }
  return out;
}

double ParamTree::squared_norm() const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.second.flat().squaredNorm();
  return s;
}

bool ParamTree::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.second.all_finite(); });
}

ParamTree& ParamTree::axpy(double alpha, const ParamTree& other) {
  require_congruent(other, "axpy");
  for (std::size_t i = 0; i < size(); ++i) entries_[i].second.flat() += alpha * other.entries_[i].second.flat();
  return *this;
}

ParamTree& ParamTree::scale(double alpha) {
  for (auto& e : entries_) e.second *= alpha;
  return *this;
}

}  // namespace pxmc

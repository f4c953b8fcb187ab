#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfuq {

// 1-based multi-index; lexicographic order (std::vector's operator<) is the
// canonical tie-break order everywhere.
using MultiIndex = std::vector<int>;

MultiIndex unit_index(int dim);  // (1,...,1)

// Finite set of equal-length multi-indices with all components >= 1.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(int dim) : dim_(dim) {}

  int dim() const { return dim_; }
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  bool contains(const MultiIndex& k) const { return items_.count(k) > 0; }
  const std::set<MultiIndex>& items() const { return items_; }

  // Throws std::invalid_argument on dimension mismatch or component < 1.
  void insert(const MultiIndex& k);

  // Downward closed: every backward neighbour of every member is a member.
  bool downward_closed() const;

  // All indices k with 1 <= k <= top componentwise.
  static IndexSet box(const MultiIndex& top);

 private:
  int dim_ = 0;
  std::set<MultiIndex> items_;
  mutable bool closed_ = true;   // valid only when !dirty_
  mutable bool dirty_ = false;
};

bool is_downward_closed(const IndexSet& s);

// { j + e_k : j in s, k = 1..dim } \ s
IndexSet margin(const IndexSet& s);

// Members of margin(s) whose backward neighbours all lie in s.
IndexSet reduced_margin(const IndexSet& s);

nlohmann::ordered_json index_set_to_json(const IndexSet& s);
IndexSet index_set_from_json(const nlohmann::json& j);

std::string to_string(const MultiIndex& k);

}  // namespace mfuq

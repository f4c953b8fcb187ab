#include "mfuq/multi_index.hpp"

#include <stdexcept>

namespace mfuq {

MultiIndex unit_index(int dim) { return MultiIndex(dim, 1); }

void IndexSet::insert(const MultiIndex& k) {
  if (dim_ == 0 && items_.empty()) dim_ = static_cast<int>(k.size());
  if (static_cast<int>(k.size()) != dim_)
    throw std::invalid_argument("index set: dimension mismatch");
  for (int v : k)
    if (v < 1) throw std::invalid_argument("index set: components must be >= 1");
  if (!items_.insert(k).second) return;
  if (dirty_) return;  // already needs a full recheck
  if (closed_) {
    // stays closed iff every backward neighbour of k is present
    MultiIndex down = k;
    for (int d = 0; d < dim_ && closed_; ++d) {
      if (k[d] == 1) continue;
      down[d] = k[d] - 1;
      if (!items_.count(down)) closed_ = false;
      down[d] = k[d];
    }
  } else {
    // insertion can close a previously open set; recheck lazily
    dirty_ = true;
  }
}

bool IndexSet::downward_closed() const {
  if (!dirty_) return closed_;
  closed_ = true;
  for (const auto& k : items_) {
    MultiIndex down = k;
    for (int d = 0; d < dim_ && closed_; ++d) {
      if (k[d] == 1) continue;
      down[d] = k[d] - 1;
      if (!items_.count(down)) closed_ = false;
      down[d] = k[d];
    }
    if (!closed_) break;
  }
  dirty_ = false;
  return closed_;
}

IndexSet IndexSet::box(const MultiIndex& top) {
  IndexSet s(static_cast<int>(top.size()));
  MultiIndex k = unit_index(s.dim());
  while (true) {
    s.insert(k);
    int d = s.dim() - 1;
    while (d >= 0 && k[d] == top[d]) { k[d] = 1; --d; }
    if (d < 0) break;
    ++k[d];
  }
  return s;
}

bool is_downward_closed(const IndexSet& s) { return s.downward_closed(); }

IndexSet margin(const IndexSet& s) {
  IndexSet out(s.dim());
  for (const auto& j : s.items()) {
    MultiIndex up = j;
    for (int d = 0; d < s.dim(); ++d) {
      up[d] = j[d] + 1;
      if (!s.contains(up)) out.insert(up);
      up[d] = j[d];
    }
  }
  return out;
}

IndexSet reduced_margin(const IndexSet& s) {
  IndexSet out(s.dim());
  const IndexSet full = margin(s);
  for (const auto& i : full.items()) {
    bool admissible = true;
    MultiIndex down = i;
    for (int d = 0; d < s.dim() && admissible; ++d) {
      if (i[d] == 1) continue;
      down[d] = i[d] - 1;
      if (!s.contains(down)) admissible = false;
      down[d] = i[d];
    }
    if (admissible) out.insert(i);
  }
  return out;
}

nlohmann::ordered_json index_set_to_json(const IndexSet& s) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& k : s.items()) arr.push_back(k);
  return arr;
}

IndexSet index_set_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("index set json: expected array of arrays");
  IndexSet s;
  for (const auto& e : j) s.insert(e.get<MultiIndex>());
  return s;
}

std::string to_string(const MultiIndex& k) {
  std::string out = "[";
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(k[i]);
  }
  out += "]";
  return out;
}

}  // namespace mfuq

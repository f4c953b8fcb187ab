#include <doctest.h>

#include <algorithm>
#include <random>
#include <stdexcept>
#include <vector>

#include "mfuq/multi_index.hpp"

using namespace mfuq;

namespace {

IndexSet make_set(const std::vector<MultiIndex>& items) {
  IndexSet s(static_cast<int>(items.front().size()));
  for (const auto& k : items) s.insert(k);
  return s;
}

bool same_items(const IndexSet& a, const std::vector<MultiIndex>& expect) {
  if (a.size() != expect.size()) return false;
  for (const auto& k : expect)
    if (!a.contains(k)) return false;
  return true;
}

// Random downward closed set built by repeatedly promoting reduced-margin members.
IndexSet random_closed_set(std::mt19937& rng, int dim, int steps, int level_cap) {
  IndexSet s(dim);
  s.insert(unit_index(dim));
  for (int t = 0; t < steps; ++t) {
    IndexSet rm = reduced_margin(s);
    std::vector<MultiIndex> pool;
    for (const auto& k : rm.items())
      if (*std::max_element(k.begin(), k.end()) <= level_cap) pool.push_back(k);
    if (pool.empty()) break;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    s.insert(pool[pick(rng)]);
  }
  return s;
}

}  // namespace

TEST_CASE("unit index is all ones") {
  CHECK(unit_index(3) == MultiIndex{1, 1, 1});
  CHECK(unit_index(1) == MultiIndex{1});
}

TEST_CASE("root set is downward closed") {
  CHECK(make_set({{1, 1}}).downward_closed());
}

TEST_CASE("L-shaped set is downward closed") {
  CHECK(make_set({{1, 1}, {2, 1}, {1, 2}}).downward_closed());
}

TEST_CASE("set with a detached diagonal member is not downward closed") {
  CHECK_FALSE(make_set({{1, 1}, {2, 2}}).downward_closed());
}

TEST_CASE("closedness flag tracks insertions") {
  IndexSet s(2);
  s.insert({1, 1});
  CHECK(is_downward_closed(s));
  s.insert({1, 3});  // skips (1,2)
  CHECK_FALSE(is_downward_closed(s));
  s.insert({1, 2});
  CHECK(is_downward_closed(s));
}

TEST_CASE("insert rejects bad indices") {
  IndexSet s(2);
  CHECK_THROWS_AS(s.insert({1}), std::invalid_argument);
  CHECK_THROWS_AS(s.insert({1, 0}), std::invalid_argument);
  CHECK_THROWS_AS(s.insert({0, 1}), std::invalid_argument);
  s.insert({1, 1});
  s.insert({1, 1});  // duplicate is a no-op
  CHECK(s.size() == 1);
}

TEST_CASE("margin of the root") {
  CHECK(same_items(margin(make_set({{1, 1}})), {{2, 1}, {1, 2}}));
}

TEST_CASE("margin of a two-member chain") {
  CHECK(same_items(margin(make_set({{1, 1}, {2, 1}})), {{3, 1}, {2, 2}, {1, 2}}));
}

TEST_CASE("margin of the L-shape lists each forward neighbour once") {
  CHECK(same_items(margin(make_set({{1, 1}, {2, 1}, {1, 2}})), {{3, 1}, {2, 2}, {1, 3}}));
}

TEST_CASE("reduced margin equals margin at the root") {
  CHECK(same_items(reduced_margin(make_set({{1, 1}})), {{2, 1}, {1, 2}}));
}

TEST_CASE("reduced margin of a chain excludes the diagonal corner") {
  // (2,2) would need (1,2), which the chain does not contain
  CHECK(same_items(margin(make_set({{1, 1}, {2, 1}})), {{3, 1}, {2, 2}, {1, 2}}));
  CHECK(same_items(reduced_margin(make_set({{1, 1}, {2, 1}})), {{3, 1}, {1, 2}}));
}

TEST_CASE("reduced margin drops members with absent backward neighbours") {
  // (2,2) needs both (1,2) and (2,1); only the former is present.
  IndexSet s = make_set({{1, 1}, {1, 2}, {1, 3}});
  CHECK(same_items(margin(s), {{2, 1}, {2, 2}, {2, 3}, {1, 4}}));
  CHECK(same_items(reduced_margin(s), {{2, 1}, {1, 4}}));
}

TEST_CASE("box enumerates the full rectangle") {
  IndexSet b = IndexSet::box({2, 3});
  CHECK(b.size() == 6);
  CHECK(b.downward_closed());
  CHECK(b.contains({2, 3}));
  CHECK(b.contains({1, 1}));
  CHECK_FALSE(b.contains({3, 1}));
}

TEST_CASE("margin and reduced margin invariants on random closed sets") {
  std::mt19937 rng(12345);
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = 1 + static_cast<int>(rng() % 4);
    IndexSet s = random_closed_set(rng, dim, 8, 5);
    REQUIRE(s.downward_closed());

    IndexSet m = margin(s);
    IndexSet rm = reduced_margin(s);

    for (const auto& k : rm.items()) CHECK(m.contains(k));
    for (const auto& k : m.items()) CHECK_FALSE(s.contains(k));
    for (const auto& k : rm.items()) {
      IndexSet grown(s.dim());
      for (const auto& j : s.items()) grown.insert(j);
      grown.insert(k);
      CHECK(grown.downward_closed());
    }
  }
}

TEST_CASE("insertion order does not change the set") {
  std::vector<MultiIndex> items = {{1, 1}, {2, 1}, {1, 2}, {3, 1}, {2, 2}};
  IndexSet forward = make_set(items);
  std::reverse(items.begin(), items.end());
  // Reversed insertion passes through non-closed intermediate states.
  IndexSet backward(2);
  for (const auto& k : items) backward.insert(k);
  CHECK(forward.items() == backward.items());
  CHECK(forward.downward_closed());
  CHECK(backward.downward_closed());
  CHECK(margin(forward).items() == margin(backward).items());
  CHECK(reduced_margin(forward).items() == reduced_margin(backward).items());
}

TEST_CASE("json round trip preserves the set") {
  IndexSet s = make_set({{1, 1, 1}, {2, 1, 1}, {1, 2, 1}, {1, 1, 2}, {1, 1, 3}});
  IndexSet back = index_set_from_json(index_set_to_json(s));
  CHECK(back.dim() == s.dim());
  CHECK(back.items() == s.items());
}

TEST_CASE("multi index formatting") {
  CHECK(to_string(MultiIndex{2, 1, 3}) == "[2,1,3]");
}

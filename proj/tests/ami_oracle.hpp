#pragma once

// Brute-force adjusted mutual information: E[MI] is the mean of MI over all
// N! relabellings of the points, which is the permutation model by definition.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

/// Every set partition of n points as a restricted growth string.
inline std::vector<std::vector<int>> set_partitions(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  auto rec = [&](auto &self, int i, int max_label) -> void {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int l = 0; l <= max_label + 1; ++l) {
      cur[i] = l;
      self(self, i + 1, std::max(max_label, l));
    }
  };
  if (n == 0) return {{}};
  cur[0] = 0;
  rec(rec, 1, 0);
  return out;
}

inline std::vector<int> sizes(const std::vector<int> &labels) {
  std::map<int, int> count;
  for (int l : labels) ++count[l];
  std::vector<int> out;
  for (const auto &[_, c] : count) out.push_back(c);
  std::sort(out.begin(), out.end());
  return out;
}

inline double mi(const std::vector<int> &a, const std::vector<int> &b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1;
    cb[b[i]] += 1;
    joint[{a[i], b[i]}] += 1;
  }
  double out = 0.0;
  for (const auto &[key, nij] : joint) out += nij / n * std::log(n * nij / (ca[key.first] * cb[key.second]));
  return out;
}

inline double entropy(const std::vector<int> &a) {
  const double n = static_cast<double>(a.size());
  double h = 0.0;
  for (int c : sizes(a)) h -= c / n * std::log(c / n);
  return h;
}

/// Canonical labelling with the given block sizes: 0,0,..,1,1,..
inline std::vector<int> from_sizes(const std::vector<int> &s) {
  std::vector<int> out;
  for (std::size_t k = 0; k < s.size(); ++k) out.insert(out.end(), s[k], static_cast<int>(k));
  return out;
}

/// Mean MI over all permutations; depends only on the two block-size profiles.
inline double expected_mi(const std::vector<int> &a, const std::vector<int> &b) {
  static std::map<std::pair<std::vector<int>, std::vector<int>>, double> cache;
  const auto key = std::make_pair(sizes(a), sizes(b));
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const auto ca = from_sizes(key.first);
  const auto cb = from_sizes(key.second);
  std::vector<int> perm(ca.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> pb(cb.size());
  double total = 0.0;
  long long count = 0;
  do {
    for (std::size_t i = 0; i < perm.size(); ++i) pb[i] = cb[perm[i]];
    total += mi(ca, pb);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double e = total / static_cast<double>(count);
  cache.emplace(key, e);
  return e;
}

inline bool same_partition(const std::vector<int> &a, const std::vector<int> &b) {
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [x, inserted_x] = ab.emplace(a[i], b[i]);
    auto [y, inserted_y] = ba.emplace(b[i], a[i]);
    if (x->second != b[i] || y->second != a[i]) return false;
  }
  return true;
}

inline double ami(const std::vector<int> &a, const std::vector<int> &b) {
  if (same_partition(a, b)) return 1.0;
  const double e = expected_mi(a, b);
  return (mi(a, b) - e) / (0.5 * (entropy(a) + entropy(b)) - e);
}

}  // namespace oracle

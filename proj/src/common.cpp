#include "kam/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace kam {

std::string format_lattice(const Lattice& k) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i) out << ", ";
    out << k[i];
  }
  out << ')';
  return out.str();
}

int norm_inf(const Lattice& k) {
  int m = 0;
  for (int v : k) m = std::max(m, std::abs(v));
  return m;
}

int norm_1(const Lattice& k) {
  int m = 0;
  for (int v : k) m += std::abs(v);
  return m;
}

namespace {

void collect(int n, int remaining, Lattice& current, int pos, int target,
             std::vector<Lattice>& out) {
  if (pos == n - 1) {
    current[pos] = remaining;
    out.push_back(current);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    current[pos] = a;
    collect(n, remaining - a, current, pos + 1, target, out);
  }
}

}  // namespace

std::vector<Lattice> multi_indices(int n, int max_degree) {
  std::vector<Lattice> out;
  Lattice current(n, 0);
  for (int d = 0; d <= max_degree; ++d) {
    std::vector<Lattice> level;
    collect(n, d, current, 0, d, level);
    std::sort(level.begin(), level.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

void for_each_mode(int n, int K, const std::function<void(const Lattice&)>& fn) {
  Lattice k(n, -K);
  while (true) {
    fn(k);
    int j = n - 1;
    while (j >= 0 && k[j] == K) {
      k[j] = -K;
      --j;
    }
    if (j < 0) return;
    ++k[j];
  }
}

int next_pow2(int m) {
  int p = 1;
  while (p < m) p <<= 1;
  return p;
}

}  // namespace kam

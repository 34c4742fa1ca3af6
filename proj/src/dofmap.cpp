#include "hygro/dofmap.hpp"

#include <numeric>

namespace hygro {

namespace {

// Union-find with potentials: value(x) = value(parent(x)) + pot(x).
struct WeightedUnionFind {
  std::vector<int> parent;
  std::vector<std::array<double, 2>> pot;

  explicit WeightedUnionFind(std::size_t n) : parent(n), pot(n, {0.0, 0.0}) {
    std::iota(parent.begin(), parent.end(), 0);
  }

  int find(int x) {
    if (parent[x] == x) return x;
    const int p = parent[x];
    const int r = find(p);
    pot[x][0] += pot[p][0];
    pot[x][1] += pot[p][1];
    parent[x] = r;
    return r;
  }

  // value(b) = value(a) + off
  void unite(int a, int b, const std::array<double, 2>& off) {
    const int ra = find(a), rb = find(b);
    if (ra == rb) return;
    // value(rb) = value(b) - pot(b) = value(a) + off - pot(b) = value(ra) + pot(a) + off - pot(b)
    parent[rb] = ra;
    for (int f = 0; f < 2; ++f) pot[rb][f] = pot[a][f] + off[f] - pot[b][f];
  }
};

}  // namespace

DofMap::DofMap(std::size_t nodes, std::span<const Tie> ties,
               const std::array<std::vector<char>, 2>& fixed) {
  WeightedUnionFind uf(nodes);
  for (const Tie& t : ties) uf.unite(t.master, t.slave, t.offset);

  root_.resize(nodes);
  offset_.resize(nodes);
  for (std::size_t n = 0; n < nodes; ++n) {
    root_[n] = uf.find(static_cast<int>(n));
    offset_[n] = uf.pot[n];
  }

  for (int f = 0; f < 2; ++f) {
    std::vector<char> class_fixed(nodes, 0);
    for (std::size_t n = 0; n < nodes; ++n)
      if (!fixed[f].empty() && fixed[f][n]) class_fixed[root_[n]] = 1;
    eq_[f].assign(nodes, -1);
    std::vector<int> root_eq(nodes, -1);
    int next = 0;
    for (std::size_t n = 0; n < nodes; ++n) {
      const int r = root_[n];
      if (class_fixed[r]) continue;
      if (root_eq[r] < 0) root_eq[r] = next++;
      eq_[f][n] = root_eq[r];
    }
    count_[f] = next;
  }
  // Shift phi equations behind the theta block.
  for (auto& e : eq_[1])
    if (e >= 0) e += count_[0];
}

}  // namespace hygro

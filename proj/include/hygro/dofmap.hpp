#pragma once

#include <array>
#include <span>
#include <vector>

namespace hygro {

enum class Field : int { theta = 0, phi = 1 };

/// Equality constraint u_slave = u_master + offset, applied to both fields.
struct Tie {
  int master = 0;
  int slave = 0;
  std::array<double, 2> offset{0.0, 0.0};  // theta, phi
};

/// Maps (node, field) to a reduced equation number. Tied nodes share the equation
/// of their class representative; classes containing a fixed node have none.
/// Equations are numbered theta first, then phi.
class DofMap {
 public:
  DofMap() = default;
  DofMap(std::size_t nodes, std::span<const Tie> ties,
         const std::array<std::vector<char>, 2>& fixed);

  std::size_t nodes() const { return root_.size(); }
  int root(int node) const { return root_[node]; }
  /// u_node = u_root + offset(node)
  const std::array<double, 2>& offset(int node) const { return offset_[node]; }
  /// -1 when the class of `node` is fixed for `field`.
  int equation(int node, Field field) const { return eq_[static_cast<int>(field)][node]; }
  bool class_fixed(int node, Field field) const { return equation(node, field) < 0; }
  int count(Field field) const { return count_[static_cast<int>(field)]; }
  int size() const { return count_[0] + count_[1]; }

 private:
  std::vector<int> root_;
  std::vector<std::array<double, 2>> offset_;
  std::array<std::vector<int>, 2> eq_;
  std::array<int, 2> count_{0, 0};
};

}  // namespace hygro

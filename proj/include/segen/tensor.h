#ifndef SEGEN_TENSOR_H
#define SEGEN_TENSOR_H

#include <string>
#include <vector>

namespace segen::ad {

// Dense row-major 2-D value buffer with a same-shape gradient accumulator.
// Vectors are (rows x 1), scalars (1 x 1). The gradient buffer is allocated
// lazily on first use so forward-only evaluation stays cheap.
struct Tensor {
  int rows = 0;
  int cols = 1;
  std::vector<double> v;
  std::vector<double> g;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  int size() const { return rows * cols; }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

  std::vector<double>& grad() {
    if (g.empty()) g.assign(v.size(), 0.0);
    return g;
  }
  bool has_grad() const { return !g.empty(); }

  std::string shape_str() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
  }
};

}  // namespace segen::ad

#endif

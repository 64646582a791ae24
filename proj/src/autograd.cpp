#include "ssg/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace ssg {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::needs_grad() const { return tape_->needs_grad(id_); }

// ---------------------------------------------------------------------------
// Tape

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param, bool track) {
  Node node;
  node.external = &param;
  if (track && param.requires_grad()) {
    node.sink = &param;
    node.needs_grad = true;
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  if (consumed_) throw ContractError("cannot record on a tape after backward()");
  Node node;
  node.value = std::move(value);
  for (const auto& p : parents) {
    if (p.tape() != this) throw ContractError("operands belong to different tapes");
    node.needs_grad = node.needs_grad || nodes_[p.id()].needs_grad;
  }
  if (node.needs_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const auto& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

std::vector<double>& Tape::grad_buffer(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to a different tape");
  if (consumed_) throw ContractError("backward() already ran on this tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError(fmt::format("backward() needs a scalar loss, got shape {}", shape_str(value(loss.id()).shape())));
  }
  consumed_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.sink) {
      if (!n.sink->has_grad()) n.sink->zero_grad();
      auto g = n.sink->grad();
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

// ---------------------------------------------------------------------------
// Operations

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op, shape_str(a.shape()), shape_str(b.shape())));
  }
}

void require_matrix(const Var& a, const char* op) {
  if (a.value().rank() > 2) {
    throw ShapeError(fmt::format("{}: expected a matrix, got {}", op, shape_str(a.shape())));
  }
}

template <typename F>
Var unary(Var x, F&& forward, Tape::BackwardFn fn) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  return x.tape()->record(std::move(out), {x}, std::move(fn));
}

}  // namespace

Var matmul(Var a, Var b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) {
    throw ShapeError(fmt::format("matmul: inner dimensions differ, {} x {}", shape_str(av.shape()), shape_str(bv.shape())));
  }
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = &out[i * n];
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = &bv[p * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib, m, k, n](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& A = t.value(ia);
    const auto& B = t.value(ib);
    if (t.needs_grad(ia)) {
      auto& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * B[p * n + j];
          ga[i * k + p] += s;
        }
      }
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A[i * k + p];
          if (aip == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
      }
    }
  });
}

Var transpose(Var a) {
  require_matrix(a, "transpose");
  const auto& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = av[i * c + j];
  const auto ia = a.id();
  return a.tape()->record(std::move(out), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    for (auto id : {ia, ib}) {
      if (!t.needs_grad(id)) continue;
      auto& gp = t.grad_buffer(id);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) {
      auto& gp = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto& gp = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ia)) {
      const auto& B = t.value(ib);
      auto& gp = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * B[i];
    }
    if (t.needs_grad(ib)) {
      const auto& A = t.value(ia);
      auto& gp = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * A[i];
    }
  });
}

Var scale(Var a, double factor) {
  const auto ia = a.id();
  return unary(a, [factor](double v) { return v * factor; }, [ia, factor](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * factor;
  });
}

Var one_minus(Var a) {
  const auto ia = a.id();
  return unary(a, [](double v) { return 1.0 - v; }, [ia](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] -= g[i];
  });
}

Var add_bias(Var x, Var bias) {
  require_matrix(x, "add_bias");
  const auto& xv = x.value();
  const auto& bv = bias.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (bv.size() != c || bv.rows() != 1) {
    throw ShapeError(fmt::format("add_bias: bias {} does not match rows of {}", shape_str(bv.shape()), shape_str(xv.shape())));
  }
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = xv[i * c + j] + bv[j];
  const auto ix = x.id(), ib = bias.id();
  return x.tape()->record(std::move(out), {x, bias}, [ix, ib, r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.needs_grad(ix)) {
      auto& gp = t.grad_buffer(ix);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto& gp = t.grad_buffer(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gp[j] += g[i * c + j];
    }
  });
}

Var repeat_rows(Var row, std::size_t times) {
  const auto& rv = row.value();
  if (rv.rows() != 1) throw ShapeError(fmt::format("repeat_rows: expected a row, got {}", shape_str(rv.shape())));
  if (times == 0) throw ShapeError("repeat_rows: zero repetitions");
  const std::size_t c = rv.cols();
  Tensor out({times, c});
  for (std::size_t i = 0; i < times; ++i) std::copy(rv.values().begin(), rv.values().end(), out.values().begin() + i * c);
  const auto ir = row.id();
  return row.tape()->record(std::move(out), {row}, [ir, times, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(ir);
    for (std::size_t i = 0; i < times; ++i)
      for (std::size_t j = 0; j < c; ++j) gp[j] += g[i * c + j];
  });
}

Var sigmoid(Var x) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
  return x.tape()->record(std::move(out), {x}, [ix = x.id()](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& s = t.value(self);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var tanh(Var x) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
  return x.tape()->record(std::move(out), {x}, [ix = x.id()](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var relu(Var x) {
  const auto ix = x.id();
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [ix](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ix);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] > 0.0) gp[i] += g[i];
  });
}

Var exp(Var x) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
  return x.tape()->record(std::move(out), {x}, [ix = x.id()](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] * y[i];
  });
}

Var log(Var x) {
  const auto ix = x.id();
  return unary(x, [](double v) { return std::log(v); }, [ix](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ix);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i] / xv[i];
  });
}

Var clamp(Var x, double lo, double hi) {
  if (!(lo < hi)) throw ContractError("clamp: lo must be below hi");
  const auto ix = x.id();
  return unary(x, [lo, hi](double v) { return std::clamp(v, lo, hi); }, [ix, lo, hi](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& xv = t.value(ix);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xv[i] >= lo && xv[i] <= hi) gp[i] += g[i];
  });
}

Var concat(std::initializer_list<Var> parts, std::size_t axis) {
  return concat(std::span<const Var>(parts.begin(), parts.size()), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no operands");
  Tape* tape = parts.front().tape();
  const auto& first = parts.front().value();
  if (first.rank() == 1) {
    if (axis != 0) throw ShapeError("concat: rank-1 operands only have axis 0");
    std::vector<double> values;
    std::vector<std::size_t> ids, offsets;
    for (const auto& p : parts) {
      if (p.value().rank() != 1) throw ShapeError("concat: mixed ranks");
      ids.push_back(p.id());
      offsets.push_back(values.size());
      values.insert(values.end(), p.value().values().begin(), p.value().values().end());
    }
    const auto n = values.size();
    return tape->record(Tensor({n}, std::move(values)), parts, [ids, offsets](Tape& t, std::size_t self) {
      const auto& g = t.grad(self);
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (!t.needs_grad(ids[k])) continue;
        auto& gp = t.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
      }
    });
  }
  if (axis > 1) throw ShapeError(fmt::format("concat: axis {} out of range for matrices", axis));
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat");
    const auto& v = p.value();
    ids.push_back(p.id());
    if (axis == 0) {
      if (v.cols() != first.cols()) {
        throw ShapeError(fmt::format("concat: column counts differ, {} vs {}", shape_str(first.shape()), shape_str(v.shape())));
      }
      extents.push_back(v.rows());
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows()) {
        throw ShapeError(fmt::format("concat: row counts differ, {} vs {}", shape_str(first.shape()), shape_str(v.shape())));
      }
      extents.push_back(v.cols());
      cols += v.cols();
      rows = v.rows();
    }
  }
  Tensor out({rows, cols});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (axis == 0) {
          out.at(offset + i, j) = v.at(i, j);
        } else {
          out.at(i, offset + j) = v.at(i, j);
        }
      }
    offset += axis == 0 ? v.rows() : v.cols();
  }
  return tape->record(std::move(out), parts, [ids, extents, axis, rows, cols](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t pr = axis == 0 ? extents[k] : rows;
      const std::size_t pc = axis == 0 ? cols : extents[k];
      if (t.needs_grad(ids[k])) {
        auto& gp = t.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < pr; ++i)
          for (std::size_t j = 0; j < pc; ++j) {
            gp[i * pc + j] += axis == 0 ? g[(off + i) * cols + j] : g[i * cols + off + j];
          }
      }
      off += extents[k];
    }
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const auto& xv = x.value();
  const std::size_t c = xv.cols();
  if (count == 0 || begin + count > xv.rows()) {
    throw ShapeError(fmt::format("slice_rows: [{}, {}) out of range for {}", begin, begin + count, shape_str(xv.shape())));
  }
  std::vector<double> values(xv.values().begin() + begin * c, xv.values().begin() + (begin + count) * c);
  return x.tape()->record(Tensor({count, c}, std::move(values)), {x}, [ix = x.id(), begin, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gp[begin * c + i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const auto& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (count == 0 || begin + count > c) {
    throw ShapeError(fmt::format("slice_cols: [{}, {}) out of range for {}", begin, begin + count, shape_str(xv.shape())));
  }
  Tensor out({r, count});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xv[i * c + begin + j];
  return x.tape()->record(std::move(out), {x}, [ix = x.id(), begin, r, c, count](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) gp[i * c + begin + j] += g[i * count + j];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  return x.tape()->record(Tensor::scalar(s), {x}, [ix = x.id()](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    auto& gp = t.grad_buffer(ix);
    for (auto& v : gp) v += g;
  });
}

Var mean_rows(Var x) {
  require_matrix(x, "mean_rows");
  const auto& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out({1, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
  return x.tape()->record(std::move(out), {x}, [ix = x.id(), r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(ix);
    const double inv = 1.0 / static_cast<double>(r);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g[j] * inv;
  });
}

Var softmax(Var x, std::size_t axis) {
  const auto& xv = x.value();
  if (xv.rank() > 2) throw ShapeError("softmax: rank > 2 unsupported");
  if (xv.rank() == 1) {
    if (axis != 0) throw ShapeError("softmax: rank-1 input only has axis 0");
    axis = 1;
  } else if (axis > 1) {
    throw ShapeError(fmt::format("softmax: axis {} invalid for {}", axis, shape_str(xv.shape())));
  }
  const std::size_t r = xv.rows(), c = xv.cols();
  // Groups are rows (axis 1) or columns (axis 0); stride walks one group.
  const std::size_t groups = axis == 1 ? r : c;
  const std::size_t len = axis == 1 ? c : r;
  auto index = [=](std::size_t gidx, std::size_t k) { return axis == 1 ? gidx * c + k : k * c + gidx; };
  Tensor out(xv.shape());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < len; ++k) mx = std::max(mx, xv[index(gi, k)]);
    double z = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const double e = std::exp(xv[index(gi, k)] - mx);
      out[index(gi, k)] = e;
      z += e;
    }
    for (std::size_t k = 0; k < len; ++k) out[index(gi, k)] /= z;
  }
  return x.tape()->record(std::move(out), {x}, [ix = x.id(), groups, len, index](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    const auto& y = t.value(self);
    auto& gp = t.grad_buffer(ix);
    for (std::size_t gi = 0; gi < groups; ++gi) {
      double dot = 0.0;
      for (std::size_t k = 0; k < len; ++k) dot += g[index(gi, k)] * y[index(gi, k)];
      for (std::size_t k = 0; k < len; ++k) {
        const auto i = index(gi, k);
        gp[i] += y[i] * (g[i] - dot);
      }
    }
  });
}

Var nll_from_logits(Var logits, std::span<const int> targets, int ignore_id) {
  require_matrix(logits, "nll_from_logits");
  const auto& lv = logits.value();
  const std::size_t r = lv.rows(), c = lv.cols();
  if (targets.size() != r) {
    throw ShapeError(fmt::format("nll_from_logits: {} targets for {} rows", targets.size(), r));
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  // Softmax rows are kept for the backward rule.
  std::vector<double> probs(r * c);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = &lv[i * c];
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(row[j] - mx);
      z += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= z;
    if (tgt[i] == ignore_id) continue;
    if (tgt[i] < 0 || static_cast<std::size_t>(tgt[i]) >= c) {
      throw ContractError(fmt::format("nll_from_logits: target {} outside vocabulary of {}", tgt[i], c));
    }
    loss += -(row[tgt[i]] - mx - std::log(z));
  }
  return logits.tape()->record(Tensor::scalar(loss), {logits},
                               [il = logits.id(), tgt = std::move(tgt), probs = std::move(probs), r, c, ignore_id](Tape& t, std::size_t self) {
                                 const double g = t.grad(self)[0];
                                 auto& gp = t.grad_buffer(il);
                                 for (std::size_t i = 0; i < r; ++i) {
                                   if (tgt[i] == ignore_id) continue;
                                   for (std::size_t j = 0; j < c; ++j) gp[i * c + j] += g * probs[i * c + j];
                                   gp[i * c + static_cast<std::size_t>(tgt[i])] -= g;
                                 }
                               });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  require_matrix(x, "layer_norm");
  const auto& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gain.size() != c || bias.size() != c) {
    throw ShapeError(fmt::format("layer_norm: gain/bias {} / {} do not match {}", shape_str(gain.shape()), shape_str(bias.shape()),
                                 shape_str(xv.shape())));
  }
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  std::vector<double> xhat(r * c), inv_std(r);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xv[i * c + j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xv[i * c + j] - mean) * (xv[i * c + j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (xv[i * c + j] - mean) * inv_std[i];
      out[i * c + j] = xhat[i * c + j] * gv[j] + bv[j];
    }
  }
  return x.tape()->record(std::move(out), {x, gain, bias},
                          [ix = x.id(), ig = gain.id(), ib = bias.id(), xhat = std::move(xhat), inv_std = std::move(inv_std), r, c](
                              Tape& t, std::size_t self) {
                            const auto& g = t.grad(self);
                            if (t.needs_grad(ig)) {
                              auto& gg = t.grad_buffer(ig);
                              for (std::size_t i = 0; i < r; ++i)
                                for (std::size_t j = 0; j < c; ++j) gg[j] += g[i * c + j] * xhat[i * c + j];
                            }
                            if (t.needs_grad(ib)) {
                              auto& gb = t.grad_buffer(ib);
                              for (std::size_t i = 0; i < r; ++i)
                                for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
                            }
                            if (t.needs_grad(ix)) {
                              const auto& gv2 = t.value(ig);
                              auto& gx = t.grad_buffer(ix);
                              const double n = static_cast<double>(c);
                              for (std::size_t i = 0; i < r; ++i) {
                                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                                for (std::size_t j = 0; j < c; ++j) {
                                  const double dy = g[i * c + j] * gv2[j];
                                  sum_dy += dy;
                                  sum_dy_xhat += dy * xhat[i * c + j];
                                }
                                for (std::size_t j = 0; j < c; ++j) {
                                  const double dy = g[i * c + j] * gv2[j];
                                  gx[i * c + j] += inv_std[i] * (dy - sum_dy / n - xhat[i * c + j] * sum_dy_xhat / n);
                                }
                              }
                            }
                          });
}

Var gather_rows(Var table, std::span<const int> ids) {
  require_matrix(table, "gather_rows");
  const auto& tv = table.value();
  const std::size_t vocab = tv.rows(), d = tv.cols();
  if (ids.empty()) throw ShapeError("gather_rows: no ids");
  std::vector<int> idv(ids.begin(), ids.end());
  Tensor out({idv.size(), d});
  for (std::size_t i = 0; i < idv.size(); ++i) {
    if (idv[i] < 0 || static_cast<std::size_t>(idv[i]) >= vocab) {
      throw ContractError(fmt::format("gather_rows: id {} outside table of {} rows", idv[i], vocab));
    }
    std::copy_n(&tv[static_cast<std::size_t>(idv[i]) * d], d, &out[i * d]);
  }
  return table.tape()->record(std::move(out), {table}, [it = table.id(), idv = std::move(idv), d](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(it);
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gp[static_cast<std::size_t>(idv[i]) * d + j] += g[i * d + j];
  });
}

Var causal_mask(Var scores, double fill) {
  require_matrix(scores, "causal_mask");
  const auto& sv = scores.value();
  const std::size_t r = sv.rows(), c = sv.cols();
  Tensor out(sv.shape());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = j > i ? fill : sv[i * c + j];
  return scores.tape()->record(std::move(out), {scores}, [is = scores.id(), r, c](Tape& t, std::size_t self) {
    const auto& g = t.grad(self);
    auto& gp = t.grad_buffer(is);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j <= i && j < c; ++j) gp[i * c + j] += g[i * c + j];
  });
}

Var conv1d_maxpool(Var seq, std::span<const Var> kernels, std::span<const Var> biases) {
  require_matrix(seq, "conv1d_maxpool");
  if (kernels.empty() || kernels.size() != biases.size()) {
    throw ContractError("conv1d_maxpool: need one bias per kernel and at least one kernel");
  }
  const auto& sv = seq.value();
  const std::size_t steps = sv.rows(), d_in = sv.cols();
  struct Bank {
    std::size_t width, filters, out_offset;
    std::vector<std::size_t> argmax;
    std::vector<double> best;
  };
  std::vector<Bank> banks;
  std::size_t total = 0;
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    const auto& kv = kernels[b].value();
    if (kv.rows() % d_in != 0) {
      throw ShapeError(fmt::format("conv1d_maxpool: kernel {} rows not a multiple of input width {}", shape_str(kv.shape()), d_in));
    }
    const std::size_t w = kv.rows() / d_in;
    if (biases[b].size() != kv.cols()) {
      throw ShapeError(fmt::format("conv1d_maxpool: bias {} does not match kernel {}", shape_str(biases[b].shape()), shape_str(kv.shape())));
    }
    if (steps < w) {
      throw ShapeError(fmt::format("conv1d_maxpool: input of length {} is shorter than kernel width {}", steps, w));
    }
    banks.push_back({w, kv.cols(), total, {}, {}});
    total += kv.cols();
  }
  Tensor out({1, total});
  for (std::size_t b = 0; b < banks.size(); ++b) {
    auto& bank = banks[b];
    const auto& kv = kernels[b].value();
    const auto& bv = biases[b].value();
    const std::size_t nf = bank.filters, span_len = bank.width * d_in;
    bank.argmax.assign(nf, 0);
    bank.best.assign(nf, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s + bank.width <= steps; ++s) {
      const double* window = &sv[s * d_in];
      for (std::size_t f = 0; f < nf; ++f) {
        double acc = bv[f];
        for (std::size_t k = 0; k < span_len; ++k) acc += window[k] * kv[k * nf + f];
        if (acc > bank.best[f]) {
          bank.best[f] = acc;
          bank.argmax[f] = s;
        }
      }
    }
    for (std::size_t f = 0; f < nf; ++f) out[bank.out_offset + f] = std::max(bank.best[f], 0.0);
  }
  std::vector<Var> parents{seq};
  std::vector<std::size_t> kid, bid;
  for (std::size_t b = 0; b < kernels.size(); ++b) {
    parents.push_back(kernels[b]);
    parents.push_back(biases[b]);
    kid.push_back(kernels[b].id());
    bid.push_back(biases[b].id());
  }
  return seq.tape()->record(std::move(out), parents,
                            [isq = seq.id(), kid = std::move(kid), bid = std::move(bid), banks = std::move(banks), d_in](Tape& t, std::size_t self) {
                              const auto& g = t.grad(self);
                              const auto& sv2 = t.value(isq);
                              for (std::size_t b = 0; b < banks.size(); ++b) {
                                const auto& bank = banks[b];
                                const auto& kv = t.value(kid[b]);
                                const std::size_t nf = bank.filters, span_len = bank.width * d_in;
                                for (std::size_t f = 0; f < nf; ++f) {
                                  if (bank.best[f] <= 0.0) continue;
                                  const double gf = g[bank.out_offset + f];
                                  const std::size_t s = bank.argmax[f];
                                  if (t.needs_grad(bid[b])) t.grad_buffer(bid[b])[f] += gf;
                                  if (t.needs_grad(kid[b])) {
                                    auto& gk = t.grad_buffer(kid[b]);
                                    for (std::size_t k = 0; k < span_len; ++k) gk[k * nf + f] += gf * sv2[s * d_in + k];
                                  }
                                  if (t.needs_grad(isq)) {
                                    auto& gs = t.grad_buffer(isq);
                                    for (std::size_t k = 0; k < span_len; ++k) gs[s * d_in + k] += gf * kv[k * nf + f];
                                  }
                                }
                              }
                            });
}

}  // namespace ssg

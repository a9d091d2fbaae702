#include "permnet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace permnet {

namespace {

using detail::Node;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// Sizes for a binary op: each operand's values are indexed by i % inner_x.
struct Broadcast {
  Shape out_shape;
  std::size_t inner_a;
  std::size_t inner_b;
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_trailing(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

Broadcast broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const std::size_t na = a.numel();
  const std::size_t nb = b.numel();
  if (a.shape() == b.shape()) return {a.shape(), na, nb};
  if (nb <= na && is_trailing(strip_leading_ones(b.shape()), a.shape())) {
    return {a.shape(), na, nb};
  }
  if (na < nb && is_trailing(strip_leading_ones(a.shape()), b.shape())) {
    return {b.shape(), na, nb};
  }
  throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                       " and " + shape_to_string(b.shape()) + " are not broadcastable");
}

// f(x, y) -> value, da(x, y, out) and db(x, y, out) are local derivatives.
template <typename F, typename DA, typename DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  const Broadcast bc = broadcast(a, b, name);
  const std::size_t n = shape_numel(bc.out_shape);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(n);
  const std::size_t ia = bc.inner_a;
  const std::size_t ib = bc.inner_b;
  if (ia == n && ib == n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i], bv[i]);
  } else if (ia == n && ib > 0) {
    for (std::size_t base = 0; base < n; base += ib) {
      for (std::size_t j = 0; j < ib; ++j) out[base + j] = f(av[base + j], bv[j]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % ia], bv[i % ib]);
  }
  return Tensor::make_result(bc.out_shape, std::move(out), {a, b}, [ia, ib, da, db](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const std::size_t n = self.data.size();
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      if (ia == n && ib == n) {
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[i] * da(pa.data[i], pb.data[i], self.data[i]);
      } else if (ia == n && ib > 0) {
        for (std::size_t base = 0; base < n; base += ib) {
          for (std::size_t j = 0; j < ib; ++j) {
            g[base + j] += self.grad[base + j] * da(pa.data[base + j], pb.data[j], self.data[base + j]);
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          g[i % ia] += self.grad[i] * da(pa.data[i % ia], pb.data[i % ib], self.data[i]);
        }
      }
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      if (ia == n && ib > 0) {
        for (std::size_t base = 0; base < n; base += ib) {
          for (std::size_t j = 0; j < ib; ++j) {
            g[j] += self.grad[base + j] * db(pa.data[base + j], pb.data[j], self.data[base + j]);
          }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i) {
          g[i % ib] += self.grad[i] * db(pa.data[i % ia], pb.data[i % ib], self.data[i]);
        }
      }
    }
  });
}

// f(x) -> value, df(x, out) is the local derivative.
template <typename F, typename DF>
Tensor unary(const Tensor& t, F f, DF df) {
  const auto tv = t.data();
  std::vector<double> out(tv.size());
  for (std::size_t i = 0; i < tv.size(); ++i) out[i] = f(tv[i]);
  return Tensor::make_result(t.shape(), std::move(out), {t}, [df](Node& self) {
    Node& p = parent(self, 0);
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      g[i] += self.grad[i] * df(p.data[i], self.data[i]);
    }
  });
}

// View of `shape` around `axis` as (outer, axis_len, inner).
struct AxisView {
  std::size_t outer = 1;
  std::size_t len = 1;
  std::size_t inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_to_string(shape));
  }
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape without_axis(const Shape& shape, std::size_t axis) {
  Shape out = shape;
  out.erase(out.begin() + static_cast<std::ptrdiff_t>(axis));
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; }, [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; }, [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor neg(const Tensor& t) {
  return unary(t, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& t) {
  return unary(
      t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& t) {
  return unary(
      t, [](double x) { return x > 0.0 ? x : std::expm1(x); },
      [](double x, double out) { return x > 0.0 ? 1.0 : out + 1.0; });
}

Tensor tanh(const Tensor& t) {
  return unary(
      t, [](double x) { return std::tanh(x); },
      [](double, double out) { return 1.0 - out * out; });
}

Tensor abs(const Tensor& t) {
  return unary(
      t, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& t) {
  return unary(t, [](double x) { return std::exp(x); }, [](double, double out) { return out; });
}

Tensor log(const Tensor& t) {
  return unary(t, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor scale(const Tensor& t, double factor) {
  return unary(
      t, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& t, double value) {
  return unary(t, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& t) {
  return unary(t, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor elementwise(ElementwiseKind kind, std::span<const Tensor> args) {
  const bool binary_kind = kind == ElementwiseKind::kAdd || kind == ElementwiseKind::kMul;
  const std::size_t expected = binary_kind ? 2 : 1;
  if (args.size() != expected) {
    throw std::invalid_argument("elementwise: expected " + std::to_string(expected) +
                                " arguments, got " + std::to_string(args.size()));
  }
  switch (kind) {
    case ElementwiseKind::kAdd: return add(args[0], args[1]);
    case ElementwiseKind::kMul: return mul(args[0], args[1]);
    case ElementwiseKind::kRelu: return relu(args[0]);
    case ElementwiseKind::kTanh: return tanh(args[0]);
    case ElementwiseKind::kAbs: return abs(args[0]);
    case ElementwiseKind::kExp: return exp(args[0]);
    case ElementwiseKind::kLog: return log(args[0]);
    case ElementwiseKind::kNeg: return neg(args[0]);
  }
  throw std::invalid_argument("elementwise: unknown kind");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const auto n = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto m = static_cast<Eigen::Index>(b.dim(1));
  std::vector<double> out(static_cast<std::size_t>(n * m));
  Map(out.data(), n, m).noalias() = ConstMap(a.data().data(), n, k) * ConstMap(b.data().data(), k, m);
  return Tensor::make_result({a.dim(0), b.dim(1)}, std::move(out), {a, b}, [n, k, m](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    ConstMap g(self.grad.data(), n, m);
    if (pa.requires_grad) {
      Map(pa.ensure_grad().data(), n, k).noalias() += g * ConstMap(pb.data.data(), k, m).transpose();
    }
    if (pb.requires_grad) {
      Map(pb.ensure_grad().data(), k, m).noalias() += ConstMap(pa.data.data(), n, k).transpose() * g;
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(0) || bias.rank() != 1 ||
      bias.dim(0) != weight.dim(1)) {
    throw DimensionError("linear: incompatible shapes " + shape_to_string(x.shape()) + ", " +
                         shape_to_string(weight.shape()) + " and " +
                         shape_to_string(bias.shape()));
  }
  const auto n = static_cast<Eigen::Index>(x.dim(0));
  const auto k = static_cast<Eigen::Index>(x.dim(1));
  const auto m = static_cast<Eigen::Index>(weight.dim(1));
  std::vector<double> out(static_cast<std::size_t>(n * m));
  Map y(out.data(), n, m);
  y.noalias() = ConstMap(x.data().data(), n, k) * ConstMap(weight.data().data(), k, m);
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data().data(), m);
  return Tensor::make_result(
      {x.dim(0), weight.dim(1)}, std::move(out), {x, weight, bias}, [n, k, m](Node& self) {
        Node& px = parent(self, 0);
        Node& pw = parent(self, 1);
        Node& pb = parent(self, 2);
        ConstMap g(self.grad.data(), n, m);
        if (px.requires_grad) {
          Map(px.ensure_grad().data(), n, k).noalias() +=
              g * ConstMap(pw.data.data(), k, m).transpose();
        }
        if (pw.requires_grad) {
          Map(pw.ensure_grad().data(), k, m).noalias() +=
              ConstMap(px.data.data(), n, k).transpose() * g;
        }
        if (pb.requires_grad) {
          Eigen::Map<Eigen::RowVectorXd>(pb.ensure_grad().data(), m) += g.colwise().sum();
        }
      });
}

Tensor row_vecmat(const Tensor& x, const Tensor& w) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(0) != w.dim(0) || x.dim(1) == 0 ||
      w.dim(1) % x.dim(1) != 0) {
    throw DimensionError("row_vecmat: incompatible shapes " + shape_to_string(x.shape()) +
                         " and " + shape_to_string(w.shape()));
  }
  const std::size_t rows = x.dim(0), k = x.dim(1), h = w.dim(1) / x.dim(1);
  const auto xv = x.data();
  const auto wv = w.data();
  std::vector<double> out(rows * h, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * h;
    for (std::size_t c = 0; c < k; ++c) {
      const double xc = xv[r * k + c];
      const double* wrow = wv.data() + (r * k + c) * h;
      for (std::size_t j = 0; j < h; ++j) o[j] += xc * wrow[j];
    }
  }
  return Tensor::make_result({rows, h}, std::move(out), {x, w}, [rows, k, h](Node& self) {
    Node& px = parent(self, 0);
    Node& pw = parent(self, 1);
    const double* g = self.grad.data();
    if (px.requires_grad) {
      auto& gx = px.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < k; ++c) {
          const double* wrow = pw.data.data() + (r * k + c) * h;
          double acc = 0.0;
          for (std::size_t j = 0; j < h; ++j) acc += g[r * h + j] * wrow[j];
          gx[r * k + c] += acc;
        }
      }
    }
    if (pw.requires_grad) {
      auto& gw = pw.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < k; ++c) {
          const double xc = px.data[r * k + c];
          double* grow = gw.data() + (r * k + c) * h;
          for (std::size_t j = 0; j < h; ++j) grow[j] += xc * g[r * h + j];
        }
      }
    }
  });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1)) {
    throw DimensionError("bmm: incompatible shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0), n = a.dim(1), k = a.dim(2), m = b.dim(2);
  const auto av = a.data();
  const auto bv = b.data();
  std::vector<double> out(batch * n * m, 0.0);
  for (std::size_t s = 0; s < batch; ++s) {
    const double* pa = av.data() + s * n * k;
    const double* pb = bv.data() + s * k * m;
    double* po = out.data() + s * n * m;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < k; ++p) {
        const double x = pa[i * k + p];
        const double* brow = pb + p * m;
        double* orow = po + i * m;
        for (std::size_t j = 0; j < m; ++j) orow[j] += x * brow[j];
      }
    }
  }
  return Tensor::make_result({batch, n, m}, std::move(out), {a, b}, [batch, n, k, m](Node& self) {
    Node& na = parent(self, 0);
    Node& nb = parent(self, 1);
    const double* g = self.grad.data();
    if (na.requires_grad) {
      auto& ga = na.ensure_grad();
      for (std::size_t s = 0; s < batch; ++s) {
        const double* pb = nb.data.data() + s * k * m;
        const double* gs = g + s * n * m;
        double* gas = ga.data() + s * n * k;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            const double* brow = pb + p * m;
            const double* grow = gs + i * m;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            gas[i * k + p] += acc;
          }
        }
      }
    }
    if (nb.requires_grad) {
      auto& gb = nb.ensure_grad();
      for (std::size_t s = 0; s < batch; ++s) {
        const double* pa = na.data.data() + s * n * k;
        const double* gs = g + s * n * m;
        double* gbs = gb.data() + s * k * m;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            const double x = pa[i * k + p];
            const double* grow = gs + i * m;
            double* brow = gbs + p * m;
            for (std::size_t j = 0; j < m; ++j) brow[j] += x * grow[j];
          }
        }
      }
    }
  });
}

Tensor reduce(const Tensor& t, ReduceKind kind, std::size_t axis) {
  const AxisView v = axis_view(t.shape(), axis, "reduce");
  const auto tv = t.data();
  std::vector<double> out(v.outer * v.inner);
  Shape out_shape = without_axis(t.shape(), axis);

  if (kind == ReduceKind::kMax) {
    if (v.len == 0) throw DimensionError("reduce max over empty axis");
    std::vector<std::size_t> arg(out.size());
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        std::size_t best = o * v.len * v.inner + i;
        for (std::size_t l = 1; l < v.len; ++l) {
          const std::size_t idx = (o * v.len + l) * v.inner + i;
          if (tv[idx] > tv[best]) best = idx;
        }
        out[o * v.inner + i] = tv[best];
        arg[o * v.inner + i] = best;
      }
    }
    return Tensor::make_result(std::move(out_shape), std::move(out), {t},
                               [arg = std::move(arg)](Node& self) {
                                 auto& g = parent(self, 0).ensure_grad();
                                 for (std::size_t r = 0; r < arg.size(); ++r) g[arg[r]] += self.grad[r];
                               });
  }

  const double factor = kind == ReduceKind::kMean ? 1.0 / static_cast<double>(v.len) : 1.0;
  for (std::size_t o = 0; o < v.outer; ++o) {
    double* orow = out.data() + o * v.inner;
    std::fill(orow, orow + v.inner, 0.0);
    for (std::size_t l = 0; l < v.len; ++l) {
      const double* irow = tv.data() + (o * v.len + l) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) orow[i] += irow[i];
    }
    if (factor != 1.0) {
      for (std::size_t i = 0; i < v.inner; ++i) orow[i] *= factor;
    }
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {t}, [v, factor](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      const double* grow = self.grad.data() + o * v.inner;
      for (std::size_t l = 0; l < v.len; ++l) {
        double* irow = g.data() + (o * v.len + l) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) irow[i] += grow[i] * factor;
      }
    }
  });
}

Tensor sum(const Tensor& t, std::size_t axis) { return reduce(t, ReduceKind::kSum, axis); }
Tensor max(const Tensor& t, std::size_t axis) { return reduce(t, ReduceKind::kMax, axis); }
Tensor mean(const Tensor& t, std::size_t axis) { return reduce(t, ReduceKind::kMean, axis); }

Tensor sum_all(const Tensor& t) { return sum(reshape(t, {t.numel()}), 0); }
Tensor mean_all(const Tensor& t) { return mean(reshape(t, {t.numel()}), 0); }

Tensor set_sum(const Tensor& t, std::size_t axis) {
  const AxisView v = axis_view(t.shape(), axis, "set_sum");
  const auto tv = t.data();
  std::vector<double> out(v.outer * v.inner);
  std::vector<double> fibre(v.len);
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      for (std::size_t l = 0; l < v.len; ++l) fibre[l] = tv[(o * v.len + l) * v.inner + i];
      std::sort(fibre.begin(), fibre.end());
      double acc = 0.0;
      for (double x : fibre) acc += x;
      out[o * v.inner + i] = acc;
    }
  }
  return Tensor::make_result(without_axis(t.shape(), axis), std::move(out), {t}, [v](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      const double* grow = self.grad.data() + o * v.inner;
      for (std::size_t l = 0; l < v.len; ++l) {
        double* irow = g.data() + (o * v.len + l) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) irow[i] += grow[i];
      }
    }
  });
}

Tensor softmax(const Tensor& t, std::size_t axis) {
  const AxisView v = axis_view(t.shape(), axis, "softmax");
  const auto tv = t.data();
  std::vector<double> out(tv.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.len * v.inner + i;
      double hi = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < v.len; ++l) hi = std::max(hi, tv[base + l * v.inner]);
      if (!std::isfinite(hi)) {
        throw NumericError(std::isnan(hi) || hi > 0 ? "softmax: non-finite logits"
                                                    : "fully masked logits");
      }
      double total = 0.0;
      for (std::size_t l = 0; l < v.len; ++l) {
        const double e = std::exp(tv[base + l * v.inner] - hi);
        out[base + l * v.inner] = e;
        total += e;
      }
      for (std::size_t l = 0; l < v.len; ++l) out[base + l * v.inner] /= total;
    }
  }
  return Tensor::make_result(t.shape(), std::move(out), {t}, [v](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t o = 0; o < v.outer; ++o) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = o * v.len * v.inner + i;
        double dot = 0.0;
        for (std::size_t l = 0; l < v.len; ++l) {
          const std::size_t idx = base + l * v.inner;
          dot += self.grad[idx] * self.data[idx];
        }
        for (std::size_t l = 0; l < v.len; ++l) {
          const std::size_t idx = base + l * v.inner;
          g[idx] += self.data[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(t.shape()) + " as " +
                         shape_to_string(shape));
  }
  std::vector<double> out(t.data().begin(), t.data().end());
  return Tensor::make_result(std::move(shape), std::move(out), {t}, [](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& t) {
  if (t.rank() < 2) {
    throw DimensionError("transpose: need rank >= 2, got " + shape_to_string(t.shape()));
  }
  const std::size_t r = t.rank();
  const std::size_t rows = t.dim(r - 2);
  const std::size_t cols = t.dim(r - 1);
  const std::size_t batch = t.numel() / std::max<std::size_t>(rows * cols, 1);
  Shape out_shape = t.shape();
  std::swap(out_shape[r - 2], out_shape[r - 1]);
  const auto tv = t.data();
  std::vector<double> out(tv.size());
  for (std::size_t s = 0; s < batch; ++s) {
    const std::size_t off = s * rows * cols;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) out[off + j * rows + i] = tv[off + i * cols + j];
    }
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {t},
                             [batch, rows, cols](Node& self) {
                               auto& g = parent(self, 0).ensure_grad();
                               for (std::size_t s = 0; s < batch; ++s) {
                                 const std::size_t off = s * rows * cols;
                                 for (std::size_t i = 0; i < rows; ++i) {
                                   for (std::size_t j = 0; j < cols; ++j) {
                                     g[off + i * cols + j] += self.grad[off + j * rows + i];
                                   }
                                 }
                               }
                             });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& ref = parts[0].shape();
  if (axis >= ref.size()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(ref));
  }
  std::vector<std::size_t> lens;
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == ref[i];
    if (!ok) {
      throw DimensionError("concat: shape " + shape_to_string(s) + " does not match " +
                           shape_to_string(ref) + " off axis " + std::to_string(axis));
    }
    lens.push_back(s[axis]);
    out_shape[axis] += s[axis];
  }
  const AxisView v = axis_view(out_shape, axis, "concat");
  std::vector<double> out(shape_numel(out_shape));
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto pv = parts[p].data();
    const std::size_t chunk = lens[p] * v.inner;
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(pv.data() + o * chunk, chunk, out.data() + (o * v.len + offset) * v.inner);
    }
    offset += lens[p];
  }
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::make_result(std::move(out_shape), std::move(out), std::move(parents),
                             [v, lens](Node& self) {
                               std::size_t offset = 0;
                               for (std::size_t p = 0; p < lens.size(); ++p) {
                                 Node& np = parent(self, p);
                                 const std::size_t chunk = lens[p] * v.inner;
                                 if (np.requires_grad) {
                                   auto& g = np.ensure_grad();
                                   for (std::size_t o = 0; o < v.outer; ++o) {
                                     const double* src = self.grad.data() + (o * v.len + offset) * v.inner;
                                     double* dst = g.data() + o * chunk;
                                     for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                                   }
                                 }
                                 offset += lens[p];
                               }
                             });
}

Tensor narrow(const Tensor& t, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisView v = axis_view(t.shape(), axis, "narrow");
  if (start + length > v.len) {
    throw DimensionError("narrow: range [" + std::to_string(start) + "," +
                         std::to_string(start + length) + ") exceeds axis " + std::to_string(axis) +
                         " of shape " + shape_to_string(t.shape()));
  }
  Shape out_shape = t.shape();
  out_shape[axis] = length;
  const auto tv = t.data();
  std::vector<double> out(v.outer * length * v.inner);
  const std::size_t chunk = length * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(tv.data() + (o * v.len + start) * v.inner, chunk, out.data() + o * chunk);
  }
  return Tensor::make_result(std::move(out_shape), std::move(out), {t},
                             [v, start, chunk](Node& self) {
                               auto& g = parent(self, 0).ensure_grad();
                               for (std::size_t o = 0; o < v.outer; ++o) {
                                 const double* src = self.grad.data() + o * chunk;
                                 double* dst = g.data() + (o * v.len + start) * v.inner;
                                 for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
                               }
                             });
}

Tensor gather_last(const Tensor& t, std::span<const std::size_t> index) {
  if (t.rank() == 0) throw DimensionError("gather_last: scalar input");
  const std::size_t n = t.shape().back();
  const std::size_t rows = t.numel() / std::max<std::size_t>(n, 1);
  if (index.size() != rows) {
    throw DimensionError("gather_last: " + std::to_string(index.size()) + " indices for " +
                         std::to_string(rows) + " rows of shape " + shape_to_string(t.shape()));
  }
  std::vector<std::size_t> flat(rows);
  std::vector<double> out(rows);
  const auto tv = t.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= n) {
      throw DimensionError("gather_last: index " + std::to_string(index[r]) + " >= " +
                           std::to_string(n));
    }
    flat[r] = r * n + index[r];
    out[r] = tv[flat[r]];
  }
  Shape out_shape(t.shape().begin(), t.shape().end() - 1);
  return Tensor::make_result(std::move(out_shape), std::move(out), {t},
                             [flat = std::move(flat)](Node& self) {
                               auto& g = parent(self, 0).ensure_grad();
                               for (std::size_t r = 0; r < flat.size(); ++r) g[flat[r]] += self.grad[r];
                             });
}

Tensor take_rows(const Tensor& t, std::span<const std::size_t> rows) {
  if (t.rank() == 0) throw DimensionError("take_rows: scalar input");
  const std::size_t n = t.dim(0);
  const std::size_t width = t.numel() / std::max<std::size_t>(n, 1);
  std::vector<double> out(rows.size() * width);
  const auto tv = t.data();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n) {
      throw DimensionError("take_rows: row " + std::to_string(rows[r]) + " >= " +
                           std::to_string(n));
    }
    std::copy_n(tv.begin() + static_cast<std::ptrdiff_t>(rows[r] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  Shape out_shape = t.shape();
  out_shape[0] = rows.size();
  std::vector<std::size_t> picked(rows.begin(), rows.end());
  return Tensor::make_result(std::move(out_shape), std::move(out), {t},
                             [picked = std::move(picked), width](Node& self) {
                               auto& g = parent(self, 0).ensure_grad();
                               for (std::size_t r = 0; r < picked.size(); ++r) {
                                 for (std::size_t c = 0; c < width; ++c) {
                                   g[picked[r] * width + c] += self.grad[r * width + c];
                                 }
                               }
                             });
}

Tensor masked_fill(const Tensor& t, std::span<const unsigned char> mask, double value) {
  if (mask.size() != t.numel()) {
    throw DimensionError("masked_fill: mask of " + std::to_string(mask.size()) +
                         " entries for shape " + shape_to_string(t.shape()));
  }
  std::vector<double> out(t.data().begin(), t.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask[i]) out[i] = value;
  }
  std::vector<unsigned char> keep(mask.begin(), mask.end());
  return Tensor::make_result(t.shape(), std::move(out), {t}, [keep = std::move(keep)](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!keep[i]) g[i] += self.grad[i];
    }
  });
}

Tensor straight_through(const Tensor& forward_value, const Tensor& surrogate) {
  if (forward_value.shape() != surrogate.shape()) {
    throw DimensionError("straight_through: shapes " + shape_to_string(forward_value.shape()) +
                         " and " + shape_to_string(surrogate.shape()) + " differ");
  }
  std::vector<double> out(forward_value.data().begin(), forward_value.data().end());
  return Tensor::make_result(forward_value.shape(), std::move(out), {surrogate}, [](Node& self) {
    auto& g = parent(self, 0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

}  // namespace permnet

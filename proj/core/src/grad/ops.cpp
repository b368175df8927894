#include "tamplan/grad/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "tamplan/common/errors.hpp"

namespace tamplan::grad {

namespace {

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] void shape_fail(std::string_view op, const Shape& a, std::string_view why) {
  throw DimensionError(std::string(op) + ": shape " + shape_str(a) + " " + std::string(why));
}

void require_rank2(std::string_view op, const Shape& s) {
  if (s.size() != 2) shape_fail(op, s, "must be rank 2");
}

Var unary(std::string_view op, Var x, Tensor out, Tape::BackwardFn fn) {
  const std::array<Var, 1> in{x};
  return x.tape().record(op, std::move(out), in, std::move(fn));
}

Var binary(std::string_view op, Var a, Var b, Tensor out, Tape::BackwardFn fn) {
  const std::array<Var, 2> in{a, b};
  return a.tape().record(op, std::move(out), in, std::move(fn));
}

// Elementwise unary op: derivative expressed through input x and output y.
template <typename Fwd, typename Deriv>
Var pointwise(std::string_view op, Var x, Fwd fwd, Deriv deriv) {
  const auto& xv = x.value();
  Tensor out(xv.shape());
  auto o = out.values();
  auto xs = xv.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(xs[i]);
  const auto xid = x.id();
  return unary(op, x, std::move(out), [xid, deriv](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto xs2 = t.value(xid).values();
    auto ys = t.value(self).values();
    auto dx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * deriv(xs2[i], ys[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0]) shape_fail("matmul", av.shape(), bv.shape());
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  Tensor out({m, n});
  const double* A = av.values().data();
  const double* B = bv.values().data();
  double* C = out.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * n;
      double* crow = C + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  const auto aid = a.id(), bid = b.id();
  return binary("matmul", a, b, std::move(out), [aid, bid, m, k, n](Tape& t, std::size_t self) {
    const double* G = t.grad_of(self).data();
    if (t.requires_grad(aid)) {
      const double* Bv = t.value(bid).values().data();
      double* dA = t.grad_buffer(aid).data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = G + i * n;
          const double* brow = Bv + p * n;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          dA[i * k + p] += acc;
        }
      }
    }
    if (t.requires_grad(bid)) {
      const double* Av = t.value(aid).values().data();
      double* dB = t.grad_buffer(bid).data();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = Av[i * k + p];
          if (aip == 0.0) continue;
          const double* grow = G + i * n;
          double* drow = dB + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
        }
      }
    }
  });
}

namespace {

template <typename Combine, typename DA, typename DB>
Var elementwise(std::string_view op, Var a, Var b, Combine combine, DA da, DB db) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail(op, av.shape(), bv.shape());
  Tensor out(av.shape());
  auto o = out.values();
  auto as = av.values();
  auto bs = bv.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = combine(as[i], bs[i]);
  const auto aid = a.id(), bid = b.id();
  return binary(op, a, b, std::move(out), [aid, bid, da, db](Tape& t, std::size_t self) {
    auto g = t.grad_of(self);
    auto as2 = t.value(aid).values();
    auto bs2 = t.value(bid).values();
    if (t.requires_grad(aid)) {
      auto d = t.grad_buffer(aid);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * da(as2[i], bs2[i]);
    }
    if (t.requires_grad(bid)) {
      auto d = t.grad_buffer(bid);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * db(as2[i], bs2[i]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return elementwise(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return elementwise(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return elementwise(
      "multiply", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

namespace {

template <bool kMultiply>
Var rowwise(std::string_view op, Var x, Var v) {
  const auto& xv = x.value();
  const auto& vv = v.value();
  if (vv.rank() != 1 || xv.cols() != vv.numel()) shape_fail(op, xv.shape(), vv.shape());
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = kMultiply ? xv[i * n + j] * vv[j] : xv[i * n + j] + vv[j];
    }
  }
  const auto xid = x.id(), vid = v.id();
  return binary(op, x, v, std::move(out), [xid, vid, m, n](Tape& t, std::size_t self) {
    auto g = t.grad_of(self);
    if (t.requires_grad(xid)) {
      auto d = t.grad_buffer(xid);
      auto vs = t.value(vid).values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[i * n + j] += kMultiply ? g[i * n + j] * vs[j] : g[i * n + j];
    }
    if (t.requires_grad(vid)) {
      auto d = t.grad_buffer(vid);
      auto xs = t.value(xid).values();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) d[j] += kMultiply ? g[i * n + j] * xs[i * n + j] : g[i * n + j];
    }
  });
}

}  // namespace

Var add_rowwise(Var x, Var bias) { return rowwise<false>("add_rowwise", x, bias); }

Var mul_rowwise(Var x, Var gain) { return rowwise<true>("mul_rowwise", x, gain); }

Var scale(Var x, double factor) {
  return pointwise(
      "scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var negate(Var x) {
  return pointwise(
      "negate", x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var relu(Var x) {
  return pointwise(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var x) {
  return pointwise(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var x) {
  return pointwise(
      "softplus", x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Var log(Var x) {
  return pointwise(
      "log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var exp(Var x) {
  return pointwise(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var square(Var x) {
  return pointwise(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto xid = x.id();
  return unary("sum", x, Tensor::scalar(s), [xid](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const double g = t.grad_of(self)[0];
    for (auto& d : t.grad_buffer(xid)) d += g;
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().numel());
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const auto xid = x.id();
  return unary("mean", x, Tensor::scalar(s / n), [xid, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const double g = t.grad_of(self)[0] / n;
    for (auto& d : t.grad_buffer(xid)) d += g;
  });
}

Var dot(Var a, Var b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() != bv.shape()) shape_fail("dot", av.shape(), bv.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < av.numel(); ++i) s += av[i] * bv[i];
  const auto aid = a.id(), bid = b.id();
  return binary("dot", a, b, Tensor::scalar(s), [aid, bid](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    if (t.requires_grad(aid)) {
      auto d = t.grad_buffer(aid);
      auto bs = t.value(bid).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * bs[i];
    }
    if (t.requires_grad(bid)) {
      auto d = t.grad_buffer(bid);
      auto as = t.value(aid).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g * as[i];
    }
  });
}

namespace {

// Lines of a rank-1/2 tensor along `axis`: count, length, element stride, line stride.
struct Lines {
  std::size_t count, length, elem_stride, line_stride;
};

Lines lines_of(std::string_view op, const Shape& s, std::size_t axis) {
  if (s.size() == 1) {
    if (axis != 0 && axis != 1) shape_fail(op, s, "axis out of range");
    return {1, s[0], 1, s[0]};
  }
  if (s.size() != 2 || axis > 1) shape_fail(op, s, "requires rank 1/2 and axis 0/1");
  if (axis == 1) return {s[0], s[1], 1, s[1]};
  return {s[1], s[0], s[1], 1};
}

}  // namespace

Var softmax(Var x, std::size_t axis) {
  const auto& xv = x.value();
  const Lines L = lines_of("softmax", xv.shape(), axis);
  Tensor out(xv.shape());
  for (std::size_t l = 0; l < L.count; ++l) {
    const std::size_t base = l * L.line_stride;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L.length; ++i) mx = std::max(mx, xv[base + i * L.elem_stride]);
    double z = 0.0;
    for (std::size_t i = 0; i < L.length; ++i) {
      const double e = std::exp(xv[base + i * L.elem_stride] - mx);
      out[base + i * L.elem_stride] = e;
      z += e;
    }
    for (std::size_t i = 0; i < L.length; ++i) out[base + i * L.elem_stride] /= z;
  }
  const auto xid = x.id();
  return unary("softmax", x, std::move(out), [xid, L](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto y = t.value(self).values();
    auto d = t.grad_buffer(xid);
    for (std::size_t l = 0; l < L.count; ++l) {
      const std::size_t base = l * L.line_stride;
      double s = 0.0;
      for (std::size_t i = 0; i < L.length; ++i) s += g[base + i * L.elem_stride] * y[base + i * L.elem_stride];
      for (std::size_t i = 0; i < L.length; ++i) {
        const auto k = base + i * L.elem_stride;
        d[k] += y[k] * (g[k] - s);
      }
    }
  });
}

Var log_softmax(Var x) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, xv[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(xv[i * n + j] - mx);
    const double lz = mx + std::log(z);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] - lz;
  }
  const auto xid = x.id();
  return unary("log_softmax", x, std::move(out), [xid, m, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto y = t.value(self).values();
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[i * n + j] - std::exp(y[i * n + j]) * s;
    }
  });
}

Var layer_norm(Var x, double eps) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = xv[i * n + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (xv[i * n + j] - mu) * inv_std[i];
  }
  const auto xid = x.id();
  return unary("layer_norm", x, std::move(out), [xid, m, n, inv_std = std::move(inv_std)](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto y = t.value(self).values();
    auto d = t.grad_buffer(xid);
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < m; ++i) {
      double mg = 0.0, mgy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        mg += g[i * n + j];
        mgy += g[i * n + j] * y[i * n + j];
      }
      mg /= nn;
      mgy /= nn;
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += inv_std[i] * (g[i * n + j] - mg - y[i * n + j] * mgy);
    }
  });
}

Var l2_normalize_rows(Var x) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor out(xv.shape());
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += xv[i * n + j] * xv[i * n + j];
    norms[i] = std::max(std::sqrt(s), 1e-12);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = xv[i * n + j] / norms[i];
  }
  const auto xid = x.id();
  return unary("l2_normalize", x, std::move(out), [xid, m, n, norms = std::move(norms)](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto y = t.value(self).values();
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < m; ++i) {
      double yg = 0.0;
      for (std::size_t j = 0; j < n; ++j) yg += y[i * n + j] * g[i * n + j];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += (g[i * n + j] - y[i * n + j] * yg) / norms[i];
    }
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  if (s0.size() == 1) {
    if (axis != 0) shape_fail("concat", s0, "rank-1 inputs concatenate along axis 0 only");
    std::vector<double> vals;
    for (const auto& p : parts) {
      if (p.shape().size() != 1) shape_fail("concat", s0, p.shape());
      const auto v = p.value().values();
      vals.insert(vals.end(), v.begin(), v.end());
      ids.push_back(p.id());
    }
    Tensor out = Tensor::vector(std::move(vals));
    return parts[0].tape().record("concat", std::move(out), parts, [ids](Tape& t, std::size_t self) {
      auto g = t.grad_of(self);
      std::size_t off = 0;
      for (auto id : ids) {
        const auto len = t.value(id).numel();
        if (t.requires_grad(id)) {
          auto d = t.grad_buffer(id);
          for (std::size_t i = 0; i < len; ++i) d[i] += g[off + i];
        }
        off += len;
      }
    });
  }
  require_rank2("concat", s0);
  if (axis > 1) shape_fail("concat", s0, "axis out of range");
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    const auto& s = p.shape();
    if (s.size() != 2) shape_fail("concat", s0, s);
    if (axis == 0) {
      if (s[1] != s0[1]) shape_fail("concat", s0, s);
      rows += s[0];
    } else {
      if (s[0] != s0[0]) shape_fail("concat", s0, s);
      cols += s[1];
    }
    ids.push_back(p.id());
  }
  if (axis == 0) cols = s0[1];
  else rows = s0[0];
  Tensor out({rows, cols});
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    const std::size_t r = v.shape()[0], c = v.shape()[1];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) {
        if (axis == 0) out[(off + i) * cols + j] = v[i * c + j];
        else out[i * cols + off + j] = v[i * c + j];
      }
    off += axis == 0 ? r : c;
  }
  return parts[0].tape().record("concat", std::move(out), parts, [ids, axis, cols](Tape& t, std::size_t self) {
    auto g = t.grad_of(self);
    std::size_t off = 0;
    for (auto id : ids) {
      const auto& s = t.value(id).shape();
      const std::size_t r = s[0], c = s[1];
      if (t.requires_grad(id)) {
        auto d = t.grad_buffer(id);
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            d[i * c + j] += axis == 0 ? g[(off + i) * cols + j] : g[i * cols + off + j];
      }
      off += axis == 0 ? r : c;
    }
  });
}

Var embedding(Var table, std::span<const std::size_t> ids) {
  const auto& tv = table.value();
  require_rank2("embedding_lookup", tv.shape());
  if (ids.empty()) throw DimensionError("embedding_lookup: empty id list");
  const std::size_t V = tv.shape()[0], d = tv.shape()[1];
  Tensor out({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= V) {
      throw DimensionError("embedding_lookup: id " + std::to_string(ids[i]) + " out of range for table " +
                           shape_str(tv.shape()));
    }
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = tv[ids[i] * d + j];
  }
  const auto tid = table.id();
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return unary("embedding_lookup", table, std::move(out), [tid, d, idv = std::move(idv)](Tape& t, std::size_t self) {
    if (!t.requires_grad(tid)) return;
    auto g = t.grad_of(self);
    auto dt = t.grad_buffer(tid);
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) dt[idv[i] * d + j] += g[i * d + j];
  });
}

Var transpose(Var x) {
  const auto& xv = x.value();
  require_rank2("transpose", xv.shape());
  const std::size_t m = xv.shape()[0], n = xv.shape()[1];
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  const auto xid = x.id();
  return unary("transpose", x, std::move(out), [xid, m, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += g[j * m + i];
  });
}

Var reshape(Var x, Shape shape) {
  const auto& xv = x.value();
  if (shape_numel(shape) != xv.numel()) shape_fail("reshape", xv.shape(), shape);
  Tensor out(std::move(shape), xv.storage());
  const auto xid = x.id();
  return unary("reshape", x, std::move(out), [xid](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  require_rank2("slice_rows", xv.shape());
  if (count == 0 || begin + count > xv.shape()[0]) shape_fail("slice_rows", xv.shape(), "row range out of bounds");
  const std::size_t n = xv.shape()[1];
  std::vector<double> vals(xv.values().begin() + static_cast<std::ptrdiff_t>(begin * n),
                           xv.values().begin() + static_cast<std::ptrdiff_t>((begin + count) * n));
  const auto xid = x.id();
  return unary("slice_rows", x, Tensor({count, n}, std::move(vals)), [xid, begin, n](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) d[begin * n + i] += g[i];
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const auto& xv = x.value();
  require_rank2("slice_cols", xv.shape());
  const std::size_t m = xv.shape()[0], n = xv.shape()[1];
  if (count == 0 || begin + count > n) shape_fail("slice_cols", xv.shape(), "column range out of bounds");
  Tensor out({m, count});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = xv[i * n + begin + j];
  const auto xid = x.id();
  return unary("slice_cols", x, std::move(out), [xid, m, n, begin, count](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < count; ++j) d[i * n + begin + j] += g[i * count + j];
  });
}

Var pick(Var x, std::span<const std::size_t> index) {
  const auto& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (index.size() != m) shape_fail("pick", xv.shape(), "row count differs from index length");
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    if (index[i] >= n) shape_fail("pick", xv.shape(), "index out of range");
    out[i] = xv[i * n + index[i]];
  }
  const auto xid = x.id();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return unary("pick", x, std::move(out), [xid, n, idx = std::move(idx)](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.grad_of(self);
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < idx.size(); ++i) d[i * n + idx[i]] += g[i];
  });
}

Var bce_with_logits(Var logits, std::span<const double> targets) {
  const auto& xv = logits.value();
  if (targets.size() != xv.numel()) shape_fail("bce_with_logits", xv.shape(), "target count differs");
  const double n = static_cast<double>(targets.size());
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double x = xv[i];
    s += std::max(x, 0.0) - x * targets[i] + std::log1p(std::exp(-std::abs(x)));
  }
  const auto xid = logits.id();
  std::vector<double> tv(targets.begin(), targets.end());
  return unary("bce_with_logits", logits, Tensor::scalar(s / n), [xid, n, tv = std::move(tv)](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const double g = t.grad_of(self)[0] / n;
    auto xs = t.value(xid).values();
    auto d = t.grad_buffer(xid);
    for (std::size_t i = 0; i < tv.size(); ++i) {
      const double x = xs[i];
      const double p = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
      d[i] += g * (p - tv[i]);
    }
  });
}

}  // namespace tamplan::grad

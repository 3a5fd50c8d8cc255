#include "flows/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flows {

namespace {

double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

NodeId Tape::push(Node n) {
  nodes_.push_back(n);
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::alloc(Op op, int len) {
  Node n;
  n.op = op;
  n.off = static_cast<std::int32_t>(buf_.size());
  n.len = len;
  buf_.resize(buf_.size() + static_cast<std::size_t>(len), 0.0);
  return push(n);
}

void Tape::check_same_len(NodeId a, NodeId b, const char* what) const {
  if (nodes_[a].len != nodes_[b].len)
    throw std::logic_error(std::string("tape: length mismatch in ") + what);
}

NodeId Tape::input(std::span<const double> v) {
  NodeId id = alloc(Op::kInput, static_cast<int>(v.size()));
  std::copy(v.begin(), v.end(), val(id));
  return id;
}

NodeId Tape::scalar_input(double v) { return input(std::span<const double>(&v, 1)); }

NodeId Tape::param(const ParamArray& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  NodeId id = alloc(Op::kParam, static_cast<int>(p.size()));
  std::copy(p.values.begin(), p.values.end(), val(id));
  nodes_[id].pref = &p;
  param_nodes_[&p] = id;
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  check_same_len(a, b, "add");
  NodeId id = alloc(Op::kAdd, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].b = b;
  const double* pa = val(a);
  const double* pb = val(b);
  double* py = val(id);
  for (int i = 0; i < nodes_[id].len; ++i) py[i] = pa[i] + pb[i];
  return id;
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_len(a, b, "sub");
  NodeId id = alloc(Op::kSub, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].b = b;
  const double* pa = val(a);
  const double* pb = val(b);
  double* py = val(id);
  for (int i = 0; i < nodes_[id].len; ++i) py[i] = pa[i] - pb[i];
  return id;
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check_same_len(a, b, "mul");
  NodeId id = alloc(Op::kMul, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].b = b;
  const double* pa = val(a);
  const double* pb = val(b);
  double* py = val(id);
  for (int i = 0; i < nodes_[id].len; ++i) py[i] = pa[i] * pb[i];
  return id;
}

NodeId Tape::scale(NodeId a, double s) {
  NodeId id = alloc(Op::kScale, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].alpha = s;
  const double* pa = val(a);
  double* py = val(id);
  for (int i = 0; i < nodes_[id].len; ++i) py[i] = s * pa[i];
  return id;
}

NodeId Tape::add_const(NodeId a, double c) {
  NodeId id = alloc(Op::kAddConst, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].alpha = c;
  const double* pa = val(a);
  double* py = val(id);
  for (int i = 0; i < nodes_[id].len; ++i) py[i] = pa[i] + c;
  return id;
}

NodeId Tape::activation(NodeId a, Activation act) {
  if (act == Activation::kIdentity) return a;
  NodeId id = alloc(Op::kActivation, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].alpha = act == Activation::kSoftplus ? 0.0 : 1.0;
  const double* pa = val(a);
  double* py = val(id);
  if (act == Activation::kSoftplus)
    for (int i = 0; i < nodes_[id].len; ++i) py[i] = softplus(pa[i]);
  else
    for (int i = 0; i < nodes_[id].len; ++i) py[i] = std::exp(pa[i]);
  return id;
}

NodeId Tape::relu(NodeId a) {
  NodeId id = alloc(Op::kRelu, nodes_[a].len);
  nodes_[id].a = a;
  const double* pa = val(a);
  double* py = val(id);
  for (int i = 0; i < nodes_[id].len; ++i) py[i] = pa[i] > 0.0 ? pa[i] : 0.0;
  return id;
}

NodeId Tape::affine(NodeId w, NodeId b, NodeId x, int rows, int cols) {
  if (nodes_[w].len != rows * cols || nodes_[b].len != rows || nodes_[x].len != cols)
    throw std::logic_error("tape: affine dimension mismatch");
  NodeId id = alloc(Op::kAffine, rows);
  nodes_[id].a = w;
  nodes_[id].b = b;
  nodes_[id].c = x;
  nodes_[id].aux_off = cols;  // cols stashed; rows == len
  const double* pw = val(w);
  const double* pb = val(b);
  const double* px = val(x);
  double* py = val(id);
  for (int r = 0; r < rows; ++r) {
    double acc = pb[r];
    const double* wr = pw + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * px[c];
    py[r] = acc;
  }
  return id;
}

NodeId Tape::temporal_conv3(NodeId x, NodeId kernel, NodeId bias, int steps, int channels) {
  if (nodes_[x].len != steps * channels || nodes_[kernel].len != channels * 3 ||
      nodes_[bias].len != channels)
    throw std::logic_error("tape: conv3 dimension mismatch");
  NodeId id = alloc(Op::kConv3, steps * channels);
  nodes_[id].a = x;
  nodes_[id].b = kernel;
  nodes_[id].c = bias;
  nodes_[id].aux_off = channels;
  const double* px = val(x);
  const double* pk = val(kernel);
  const double* pb = val(bias);
  double* py = val(id);
  for (int n = 0; n < steps; ++n) {
    for (int c = 0; c < channels; ++c) {
      double acc = pb[c];
      for (int o = -1; o <= 1; ++o) {
        int m = n + o;
        if (m < 0 || m >= steps) continue;
        acc += pk[c * 3 + (o + 1)] * px[m * channels + c];
      }
      py[n * channels + c] = acc;
    }
  }
  return id;
}

NodeId Tape::concat(std::span<const NodeId> parts) {
  int total = 0;
  for (NodeId p : parts) total += nodes_[p].len;
  NodeId id = alloc(Op::kConcat, total);
  nodes_[id].aux_off = static_cast<std::int32_t>(aux_i_.size());
  nodes_[id].aux_len = static_cast<std::int32_t>(parts.size());
  for (NodeId p : parts) aux_i_.push_back(p);
  double* py = val(id);
  for (NodeId p : parts) {
    const double* pp = val(p);
    py = std::copy(pp, pp + nodes_[p].len, py);
  }
  return id;
}

NodeId Tape::slice(NodeId a, int offset, int len) {
  if (offset < 0 || len < 0 || offset + len > nodes_[a].len)
    throw std::logic_error("tape: slice out of range");
  NodeId id = alloc(Op::kSlice, len);
  nodes_[id].a = a;
  nodes_[id].alpha = offset;
  const double* pa = val(a) + offset;
  std::copy(pa, pa + len, val(id));
  return id;
}

NodeId Tape::gather(NodeId a, std::span<const int> idx) {
  NodeId id = alloc(Op::kGather, static_cast<int>(idx.size()));
  nodes_[id].a = a;
  nodes_[id].aux_off = static_cast<std::int32_t>(aux_i_.size());
  nodes_[id].aux_len = static_cast<std::int32_t>(idx.size());
  for (int i : idx) {
    if (i < 0 || i >= nodes_[a].len) throw std::logic_error("tape: gather index out of range");
    aux_i_.push_back(i);
  }
  const double* pa = val(a);
  double* py = val(id);
  for (std::size_t i = 0; i < idx.size(); ++i) py[i] = pa[idx[i]];
  return id;
}

NodeId Tape::detach(NodeId a) {
  NodeId id = alloc(Op::kDetach, nodes_[a].len);
  const double* pa = val(a);
  std::copy(pa, pa + nodes_[a].len, val(id));
  return id;
}

NodeId Tape::sum(NodeId a) {
  NodeId id = alloc(Op::kSum, 1);
  nodes_[id].a = a;
  const double* pa = val(a);
  double acc = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) acc += pa[i];
  *val(id) = acc;
  return id;
}

NodeId Tape::mean(NodeId a) {
  NodeId id = alloc(Op::kMean, 1);
  nodes_[id].a = a;
  const double* pa = val(a);
  double acc = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) acc += pa[i];
  *val(id) = acc / nodes_[a].len;
  return id;
}

NodeId Tape::dot(NodeId a, NodeId b) {
  check_same_len(a, b, "dot");
  NodeId id = alloc(Op::kDot, 1);
  nodes_[id].a = a;
  nodes_[id].b = b;
  const double* pa = val(a);
  const double* pb = val(b);
  double acc = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) acc += pa[i] * pb[i];
  *val(id) = acc;
  return id;
}

NodeId Tape::norm(NodeId a) {
  NodeId id = alloc(Op::kNorm, 1);
  nodes_[id].a = a;
  const double* pa = val(a);
  double acc = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) acc += pa[i] * pa[i];
  *val(id) = std::sqrt(acc);
  return id;
}

NodeId Tape::softmax(NodeId a) {
  NodeId id = alloc(Op::kSoftmax, nodes_[a].len);
  nodes_[id].a = a;
  const double* pa = val(a);
  double* py = val(id);
  double mx = pa[0];
  for (int i = 1; i < nodes_[a].len; ++i) mx = std::max(mx, pa[i]);
  double z = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) {
    py[i] = std::exp(pa[i] - mx);
    z += py[i];
  }
  for (int i = 0; i < nodes_[a].len; ++i) py[i] /= z;
  return id;
}

NodeId Tape::log_softmax(NodeId a) {
  NodeId id = alloc(Op::kLogSoftmax, nodes_[a].len);
  nodes_[id].a = a;
  const double* pa = val(a);
  double* py = val(id);
  double mx = pa[0];
  for (int i = 1; i < nodes_[a].len; ++i) mx = std::max(mx, pa[i]);
  double z = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) z += std::exp(pa[i] - mx);
  double lse = mx + std::log(z);
  for (int i = 0; i < nodes_[a].len; ++i) py[i] = pa[i] - lse;
  return id;
}

NodeId Tape::logsumexp(NodeId a) {
  NodeId id = alloc(Op::kLogSumExp, 1);
  nodes_[id].a = a;
  const double* pa = val(a);
  double mx = pa[0];
  for (int i = 1; i < nodes_[a].len; ++i) mx = std::max(mx, pa[i]);
  double z = 0.0;
  for (int i = 0; i < nodes_[a].len; ++i) z += std::exp(pa[i] - mx);
  *val(id) = mx + std::log(z);
  return id;
}

NodeId Tape::sub_scalar(NodeId a, NodeId s) {
  if (nodes_[s].len != 1) throw std::logic_error("tape: sub_scalar wants a scalar");
  NodeId id = alloc(Op::kSubScalar, nodes_[a].len);
  nodes_[id].a = a;
  nodes_[id].b = s;
  const double* pa = val(a);
  double sv = *val(s);
  double* py = val(id);
  for (int i = 0; i < nodes_[a].len; ++i) py[i] = pa[i] - sv;
  return id;
}

NodeId Tape::min_of(std::span<const NodeId> scalars, int* argmin) {
  if (scalars.empty()) throw std::logic_error("tape: min_of on empty list");
  NodeId id = alloc(Op::kMin, 1);
  nodes_[id].aux_off = static_cast<std::int32_t>(aux_i_.size());
  nodes_[id].aux_len = static_cast<std::int32_t>(scalars.size());
  double best = *val(scalars[0]);
  int best_i = 0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (nodes_[scalars[i]].len != 1) throw std::logic_error("tape: min_of wants scalars");
    aux_i_.push_back(scalars[i]);
    double v = *val(scalars[i]);
    if (v < best) {
      best = v;
      best_i = static_cast<int>(i);
    }
  }
  *val(id) = best;
  if (argmin) *argmin = best_i;
  return id;
}

NodeId Tape::weighted_sum(std::span<const NodeId> scalars, std::span<const double> weights) {
  if (scalars.size() != weights.size())
    throw std::logic_error("tape: weighted_sum arity mismatch");
  NodeId id = alloc(Op::kWeightedSum, 1);
  nodes_[id].aux_off = static_cast<std::int32_t>(aux_i_.size());
  nodes_[id].aux_len = static_cast<std::int32_t>(scalars.size());
  nodes_[id].alpha = static_cast<double>(aux_d_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (nodes_[scalars[i]].len != 1) throw std::logic_error("tape: weighted_sum wants scalars");
    aux_i_.push_back(scalars[i]);
    aux_d_.push_back(weights[i]);
    acc += weights[i] * (*val(scalars[i]));
  }
  *val(id) = acc;
  return id;
}

double Tape::value_scalar(NodeId id) const {
  if (nodes_[id].len != 1) throw std::logic_error("tape: value_scalar on non-scalar");
  return *val(id);
}

std::span<const double> Tape::value(NodeId id) const {
  return std::span<const double>(val(id), static_cast<std::size_t>(nodes_[id].len));
}

std::vector<double> Tape::value_copy(NodeId id) const {
  auto v = value(id);
  return std::vector<double>(v.begin(), v.end());
}

void Tape::backward(NodeId root, GradientRecord& grads) {
  if (nodes_[root].len != 1) throw std::logic_error("tape: backward root must be scalar");
  adj_.assign(buf_.size(), 0.0);
  adj_[nodes_[root].off] = 1.0;

  for (std::int32_t ni = static_cast<std::int32_t>(nodes_.size()) - 1; ni >= 0; --ni) {
    const Node& n = nodes_[ni];
    const double* g = adj_.data() + n.off;
    switch (n.op) {
      case Op::kInput:
      case Op::kDetach:
        break;
      case Op::kParam:
        grads.accumulate(n.pref, std::span<const double>(g, static_cast<std::size_t>(n.len)));
        break;
      case Op::kAdd: {
        double* ga = adj(n.a);
        double* gb = adj(n.b);
        for (int i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gb[i] += g[i];
        }
        break;
      }
      case Op::kSub: {
        double* ga = adj(n.a);
        double* gb = adj(n.b);
        for (int i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gb[i] -= g[i];
        }
        break;
      }
      case Op::kMul: {
        double* ga = adj(n.a);
        double* gb = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        for (int i = 0; i < n.len; ++i) {
          ga[i] += g[i] * pb[i];
          gb[i] += g[i] * pa[i];
        }
        break;
      }
      case Op::kScale: {
        double* ga = adj(n.a);
        for (int i = 0; i < n.len; ++i) ga[i] += n.alpha * g[i];
        break;
      }
      case Op::kAddConst: {
        double* ga = adj(n.a);
        for (int i = 0; i < n.len; ++i) ga[i] += g[i];
        break;
      }
      case Op::kActivation: {
        double* ga = adj(n.a);
        const double* pa = val(n.a);
        const double* py = val(ni);
        if (n.alpha == 0.0)
          for (int i = 0; i < n.len; ++i) ga[i] += g[i] * sigmoid(pa[i]);
        else
          for (int i = 0; i < n.len; ++i) ga[i] += g[i] * py[i];
        break;
      }
      case Op::kRelu: {
        double* ga = adj(n.a);
        const double* pa = val(n.a);
        for (int i = 0; i < n.len; ++i)
          if (pa[i] > 0.0) ga[i] += g[i];
        break;
      }
      case Op::kAffine: {
        const int rows = n.len;
        const int cols = n.aux_off;
        double* gw = adj(n.a);
        double* gb = adj(n.b);
        double* gx = adj(n.c);
        const double* pw = val(n.a);
        const double* px = val(n.c);
        for (int r = 0; r < rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          gb[r] += gr;
          double* gwr = gw + static_cast<std::size_t>(r) * cols;
          const double* pwr = pw + static_cast<std::size_t>(r) * cols;
          for (int c = 0; c < cols; ++c) {
            gwr[c] += gr * px[c];
            gx[c] += gr * pwr[c];
          }
        }
        break;
      }
      case Op::kConv3: {
        const int channels = n.aux_off;
        const int steps = n.len / channels;
        double* gx = adj(n.a);
        double* gk = adj(n.b);
        double* gb = adj(n.c);
        const double* px = val(n.a);
        const double* pk = val(n.b);
        for (int s = 0; s < steps; ++s) {
          for (int c = 0; c < channels; ++c) {
            const double gr = g[s * channels + c];
            if (gr == 0.0) continue;
            gb[c] += gr;
            for (int o = -1; o <= 1; ++o) {
              int m = s + o;
              if (m < 0 || m >= steps) continue;
              gk[c * 3 + (o + 1)] += gr * px[m * channels + c];
              gx[m * channels + c] += gr * pk[c * 3 + (o + 1)];
            }
          }
        }
        break;
      }
      case Op::kConcat: {
        int pos = 0;
        for (std::int32_t i = 0; i < n.aux_len; ++i) {
          NodeId p = aux_i_[n.aux_off + i];
          double* gp = adj(p);
          for (int j = 0; j < nodes_[p].len; ++j) gp[j] += g[pos + j];
          pos += nodes_[p].len;
        }
        break;
      }
      case Op::kSlice: {
        double* ga = adj(n.a) + static_cast<int>(n.alpha);
        for (int i = 0; i < n.len; ++i) ga[i] += g[i];
        break;
      }
      case Op::kGather: {
        double* ga = adj(n.a);
        for (std::int32_t i = 0; i < n.aux_len; ++i) ga[aux_i_[n.aux_off + i]] += g[i];
        break;
      }
      case Op::kSum: {
        double* ga = adj(n.a);
        for (int i = 0; i < nodes_[n.a].len; ++i) ga[i] += g[0];
        break;
      }
      case Op::kMean: {
        double* ga = adj(n.a);
        const double s = g[0] / nodes_[n.a].len;
        for (int i = 0; i < nodes_[n.a].len; ++i) ga[i] += s;
        break;
      }
      case Op::kDot: {
        double* ga = adj(n.a);
        double* gb = adj(n.b);
        const double* pa = val(n.a);
        const double* pb = val(n.b);
        for (int i = 0; i < nodes_[n.a].len; ++i) {
          ga[i] += g[0] * pb[i];
          gb[i] += g[0] * pa[i];
        }
        break;
      }
      case Op::kNorm: {
        const double nv = *val(ni);
        if (nv > 1e-30) {
          double* ga = adj(n.a);
          const double* pa = val(n.a);
          const double s = g[0] / nv;
          for (int i = 0; i < nodes_[n.a].len; ++i) ga[i] += s * pa[i];
        }
        break;
      }
      case Op::kSoftmax: {
        double* ga = adj(n.a);
        const double* py = val(ni);
        double gy = 0.0;
        for (int i = 0; i < n.len; ++i) gy += g[i] * py[i];
        for (int i = 0; i < n.len; ++i) ga[i] += py[i] * (g[i] - gy);
        break;
      }
      case Op::kLogSoftmax: {
        double* ga = adj(n.a);
        const double* py = val(ni);
        double gs = 0.0;
        for (int i = 0; i < n.len; ++i) gs += g[i];
        for (int i = 0; i < n.len; ++i) ga[i] += g[i] - std::exp(py[i]) * gs;
        break;
      }
      case Op::kLogSumExp: {
        double* ga = adj(n.a);
        const double* pa = val(n.a);
        const double lse = *val(ni);
        for (int i = 0; i < nodes_[n.a].len; ++i) ga[i] += g[0] * std::exp(pa[i] - lse);
        break;
      }
      case Op::kSubScalar: {
        double* ga = adj(n.a);
        double* gs = adj(n.b);
        for (int i = 0; i < n.len; ++i) {
          ga[i] += g[i];
          gs[0] -= g[i];
        }
        break;
      }
      case Op::kMin: {
        const double best = *val(ni);
        int ties = 0;
        for (std::int32_t i = 0; i < n.aux_len; ++i)
          if (*val(aux_i_[n.aux_off + i]) == best) ++ties;
        const double share = g[0] / ties;
        for (std::int32_t i = 0; i < n.aux_len; ++i) {
          NodeId s = aux_i_[n.aux_off + i];
          if (*val(s) == best) adj(s)[0] += share;
        }
        break;
      }
      case Op::kWeightedSum: {
        const int woff = static_cast<int>(n.alpha);
        for (std::int32_t i = 0; i < n.aux_len; ++i)
          adj(aux_i_[n.aux_off + i])[0] += g[0] * aux_d_[woff + i];
        break;
      }
    }
  }
}

void Tape::reset() {
  nodes_.clear();
  buf_.clear();
  adj_.clear();
  aux_i_.clear();
  aux_d_.clear();
  param_nodes_.clear();
}

NodeId mse_mean(Tape& t, NodeId a, NodeId b) {
  NodeId d = t.sub(a, b);
  NodeId ss = t.dot(d, d);
  return t.scale(ss, 1.0 / t.size(a));
}

}  // namespace flows

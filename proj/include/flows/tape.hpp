#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "flows/param.hpp"

namespace flows {

enum class Activation { kIdentity, kSoftplus, kExp };

using NodeId = std::int32_t;

// Reverse-mode tape over vector-valued nodes. Values are computed eagerly as
// ops are recorded; backward() runs one reverse sweep and accumulates param
// adjoints into a GradientRecord. The graph is rebuilt per batch, which keeps
// dynamic structure (per-sample step tokens, variable mode picks) trivial.
class Tape {
 public:
  Tape() = default;

  // Leaves.
  NodeId input(std::span<const double> v);
  NodeId scalar_input(double v);
  NodeId param(const ParamArray& p);

  // Elementwise / affine.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId add_const(NodeId a, double c);
  NodeId activation(NodeId a, Activation act);
  NodeId relu(NodeId a);
  // y = W x + b, with W row-major (rows x cols), b length rows.
  NodeId affine(NodeId w, NodeId b, NodeId x, int rows, int cols);
  // Depthwise 3-tap convolution over `steps` rows of `channels` columns with
  // zero padding; kernel is (channels x 3) row-major, bias length channels.
  NodeId temporal_conv3(NodeId x, NodeId kernel, NodeId bias, int steps, int channels);

  // Structure.
  NodeId concat(std::span<const NodeId> parts);
  NodeId slice(NodeId a, int offset, int len);
  NodeId gather(NodeId a, std::span<const int> idx);
  NodeId detach(NodeId a);

  // Reductions / distributions.
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId dot(NodeId a, NodeId b);
  NodeId norm(NodeId a);  // Euclidean; zero-input subgradient is zero.
  NodeId softmax(NodeId a);
  NodeId log_softmax(NodeId a);
  NodeId logsumexp(NodeId a);
  // a_i - s for a scalar node s.
  NodeId sub_scalar(NodeId a, NodeId s);
  // Minimum of scalar nodes; exact ties share the incoming gradient equally
  // and the reported index is the smallest tied one.
  NodeId min_of(std::span<const NodeId> scalars, int* argmin = nullptr);
  NodeId weighted_sum(std::span<const NodeId> scalars, std::span<const double> weights);

  int size(NodeId id) const { return nodes_[id].len; }
  double value_scalar(NodeId id) const;
  std::span<const double> value(NodeId id) const;
  std::vector<double> value_copy(NodeId id) const;

  // Seeds d(root)/d(root) = 1 and accumulates parameter adjoints.
  void backward(NodeId root, GradientRecord& grads);

  // Drops all nodes but keeps buffer capacity.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kInput, kParam, kAdd, kSub, kMul, kScale, kAddConst, kActivation, kRelu,
    kAffine, kConv3, kConcat, kSlice, kGather, kDetach, kSum, kMean, kDot,
    kNorm, kSoftmax, kLogSoftmax, kLogSumExp, kSubScalar, kMin, kWeightedSum,
  };

  struct Node {
    Op op;
    std::int32_t a = -1, b = -1, c = -1;
    std::int32_t off = 0, len = 0;        // value segment
    std::int32_t aux_off = 0, aux_len = 0;  // arg list / indices / weights
    double alpha = 0.0;
    const ParamArray* pref = nullptr;
  };

  NodeId push(Node n);
  double* val(NodeId id) { return buf_.data() + nodes_[id].off; }
  const double* val(NodeId id) const { return buf_.data() + nodes_[id].off; }
  double* adj(NodeId id) { return adj_.data() + nodes_[id].off; }
  NodeId alloc(Op op, int len);
  void check_same_len(NodeId a, NodeId b, const char* what) const;

  std::vector<Node> nodes_;
  std::vector<double> buf_;
  std::vector<double> adj_;
  std::vector<std::int32_t> aux_i_;
  std::vector<double> aux_d_;
  std::unordered_map<const ParamArray*, NodeId> param_nodes_;
};

// Mean of squared componentwise differences: mean((a - b)^2).
NodeId mse_mean(Tape& t, NodeId a, NodeId b);

}  // namespace flows

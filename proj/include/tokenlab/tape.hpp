#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tokenlab/tensor.hpp"

namespace tokenlab {

class Tape;

// Non-owning view over the adjoints produced by the most recent backward pass
// on a tape. Invalidated by the next backward call.
class GradientView {
public:
    GradientView() = default;
    explicit GradientView(const Tape* tape) : tape_(tape) {}

    bool has(int32_t id) const;
    const Tensor& grad(int32_t id) const;
    Tensor grad_or_zero(int32_t id) const;

private:
    const Tape* tape_ = nullptr;
};

// Reverse-mode tape. Node values are computed eagerly at creation; forward()
// re-evaluates everything in creation order after a leaf has been poked.
// Creation order is topological by construction, which backward relies on.
class Tape {
public:
    using NodeId = int32_t;

    // Leaves. constant() is held fixed conceptually; input() is a
    // differentiable leaf (parameters and activations fed from outside).
    NodeId constant(Tensor v);
    NodeId input(Tensor v);

    // Rows of a table (matrix leaf) concatenated into one column vector.
    NodeId gather_concat(NodeId table, std::span<const int> rows);

    NodeId matvec(NodeId w, NodeId x);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId tanh(NodeId a);
    NodeId exp(NodeId a);
    NodeId log(NodeId a);

    // Scalar log softmax(logits)[k]; gradient is e_k - softmax(logits).
    NodeId log_prob(NodeId logits, int k);

    NodeId scale(NodeId a, double c);
    NodeId shift(NodeId a, double c);

    // Elementwise min; on ties the gradient goes to a. Together with the
    // closed-interval clamp rule this makes clipped-surrogate gradients
    // vanish exactly when the ratio leaves the trust region, and only then.
    NodeId min2(NodeId a, NodeId b);

    // Elementwise clamp to [lo, hi]; gradient passes iff lo <= x <= hi.
    NodeId clamp(NodeId a, double lo, double hi);

    NodeId add_many(std::span<const NodeId> xs);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    const Tensor& value(NodeId id) const;

    // Leaf mutation for finite differencing; call forward() afterwards.
    void set_value(NodeId leaf, const Tensor& v);
    void poke(NodeId leaf, int flat_index, double x);

    void forward();

    // Seeds a scalar root with 1 and accumulates adjoints into the tape.
    GradientView backward(NodeId root);
    GradientView backward_seeded(NodeId root, const Tensor& seed);

    // Adjoint of a node from the most recent backward pass.
    const Tensor& activation_gradient(NodeId id) const;
    bool has_gradient(NodeId id) const;

    // d value(out) / d value(in) as a dense rows(out) x rows(in) matrix,
    // one backward pass per output coordinate. Output dimension capped at
    // 512; call sites that want bigger Jacobians are doing something wrong.
    Tensor layer_jacobian(NodeId out, NodeId in);

private:
    enum class Op : uint8_t {
        kConstant,
        kInput,
        kGatherConcat,
        kMatvec,
        kAdd,
        kSub,
        kMul,
        kTanh,
        kExp,
        kLog,
        kLogProb,
        kScale,
        kShift,
        kMin2,
        kClamp,
        kAddMany,
    };

    struct Node {
        Op op;
        Tensor value;
        std::vector<NodeId> parents;
        std::vector<int> aux_i;
        std::vector<double> aux_d;
    };

    NodeId push(Node n);
    const Node& at(NodeId id) const;
    Tensor eval(const Node& n) const;
    Tensor& adj_slot(NodeId id);
    void propagate(NodeId id);

    std::vector<Node> nodes_;
    std::vector<Tensor> adj_;
    std::vector<uint32_t> adj_epoch_;
    uint32_t epoch_ = 0;

    friend class GradientView;
};

// Max over coordinates of |central difference - analytic| / (|analytic| +
// 1e-12), the analytic side being the tape adjoint of wrt after backward on
// loss. Restores all values before returning.
double finite_difference_check(Tape& tape, Tape::NodeId loss, Tape::NodeId wrt, double eps = 1e-6);

}  // namespace tokenlab

#include "tokenlab/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tokenlab {

bool GradientView::has(int32_t id) const { return tape_ && tape_->has_gradient(id); }

const Tensor& GradientView::grad(int32_t id) const {
    if (!tape_) throw std::logic_error("GradientView: empty view");
    return tape_->activation_gradient(id);
}

Tensor GradientView::grad_or_zero(int32_t id) const {
    if (has(id)) return tape_->activation_gradient(id);
    const Tensor& v = tape_->value(id);
    return Tensor::zeros(v.rows(), v.cols());
}

const Tape::Node& Tape::at(NodeId id) const {
    if (id < 0 || id >= static_cast<NodeId>(nodes_.size())) throw std::invalid_argument("Tape: bad node id");
    return nodes_[static_cast<size_t>(id)];
}

Tape::NodeId Tape::push(Node n) {
    for (NodeId p : n.parents)
        if (p < 0 || p >= static_cast<NodeId>(nodes_.size()))
            throw std::invalid_argument("Tape: parent id out of range");
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

Tape::NodeId Tape::constant(Tensor v) { return push({Op::kConstant, std::move(v), {}, {}, {}}); }

Tape::NodeId Tape::input(Tensor v) { return push({Op::kInput, std::move(v), {}, {}, {}}); }

Tape::NodeId Tape::gather_concat(NodeId table, std::span<const int> rows) {
    const Tensor& t = value(table);
    if (rows.empty()) throw std::invalid_argument("gather_concat: no rows");
    for (int r : rows)
        if (r < 0 || r >= t.rows()) throw std::invalid_argument("gather_concat: row out of range");
    Node n{Op::kGatherConcat, {}, {table}, std::vector<int>(rows.begin(), rows.end()), {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::matvec(NodeId w, NodeId x) {
    Node n{Op::kMatvec, {}, {w, x}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    Node n{Op::kAdd, {}, {a, b}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    Node n{Op::kSub, {}, {a, b}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    Node n{Op::kMul, {}, {a, b}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::tanh(NodeId a) {
    Node n{Op::kTanh, {}, {a}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::exp(NodeId a) {
    Node n{Op::kExp, {}, {a}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::log(NodeId a) {
    Node n{Op::kLog, {}, {a}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::log_prob(NodeId logits, int k) {
    if (k < 0 || k >= value(logits).size()) throw std::invalid_argument("log_prob: index out of range");
    Node n{Op::kLogProb, {}, {logits}, {k}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double c) {
    Node n{Op::kScale, {}, {a}, {}, {c}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::shift(NodeId a, double c) {
    Node n{Op::kShift, {}, {a}, {}, {c}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::min2(NodeId a, NodeId b) {
    Node n{Op::kMin2, {}, {a, b}, {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::clamp(NodeId a, double lo, double hi) {
    if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
    Node n{Op::kClamp, {}, {a}, {}, {lo, hi}};
    n.value = eval(n);
    return push(std::move(n));
}

Tape::NodeId Tape::add_many(std::span<const NodeId> xs) {
    if (xs.empty()) throw std::invalid_argument("add_many: no terms");
    Node n{Op::kAddMany, {}, std::vector<NodeId>(xs.begin(), xs.end()), {}, {}};
    n.value = eval(n);
    return push(std::move(n));
}

const Tensor& Tape::value(NodeId id) const { return at(id).value; }

void Tape::set_value(NodeId leaf, const Tensor& v) {
    Node& n = nodes_.at(static_cast<size_t>(leaf));
    if (n.op != Op::kConstant && n.op != Op::kInput) throw std::invalid_argument("set_value: not a leaf");
    if (!n.value.same_shape(v)) throw std::invalid_argument("set_value: shape mismatch");
    n.value = v;
}

void Tape::poke(NodeId leaf, int flat_index, double x) {
    Node& n = nodes_.at(static_cast<size_t>(leaf));
    if (n.op != Op::kConstant && n.op != Op::kInput) throw std::invalid_argument("poke: not a leaf");
    if (flat_index < 0 || flat_index >= n.value.size()) throw std::invalid_argument("poke: index out of range");
    n.value[flat_index] = x;
}

Tensor Tape::eval(const Node& n) const {
    switch (n.op) {
        case Op::kConstant:
        case Op::kInput:
            return n.value;
        case Op::kGatherConcat: {
            const Tensor& t = value(n.parents[0]);
            Tensor y = Tensor::vec(static_cast<int>(n.aux_i.size()) * t.cols());
            int at_row = 0;
            for (int r : n.aux_i) {
                for (int j = 0; j < t.cols(); ++j) y[at_row * t.cols() + j] = t(r, j);
                ++at_row;
            }
            return y;
        }
        case Op::kMatvec:
            return kernels::matvec(value(n.parents[0]), value(n.parents[1]));
        case Op::kAdd:
            return kernels::add(value(n.parents[0]), value(n.parents[1]));
        case Op::kSub: {
            const Tensor& a = value(n.parents[0]);
            const Tensor& b = value(n.parents[1]);
            if (!a.same_shape(b)) throw std::invalid_argument("sub: shape mismatch");
            Tensor y = a;
            for (int i = 0; i < y.size(); ++i) y[i] -= b[i];
            return y;
        }
        case Op::kMul: {
            const Tensor& a = value(n.parents[0]);
            const Tensor& b = value(n.parents[1]);
            if (!a.same_shape(b)) throw std::invalid_argument("mul: shape mismatch");
            Tensor y = a;
            for (int i = 0; i < y.size(); ++i) y[i] *= b[i];
            return y;
        }
        case Op::kTanh:
            return kernels::tanh_vec(value(n.parents[0]));
        case Op::kExp: {
            Tensor y = value(n.parents[0]);
            for (int i = 0; i < y.size(); ++i) y[i] = std::exp(y[i]);
            return y;
        }
        case Op::kLog: {
            Tensor y = value(n.parents[0]);
            for (int i = 0; i < y.size(); ++i) y[i] = std::log(y[i]);
            return y;
        }
        case Op::kLogProb:
            return Tensor::scalar(kernels::log_prob(value(n.parents[0]), n.aux_i[0]));
        case Op::kScale: {
            Tensor y = value(n.parents[0]);
            for (int i = 0; i < y.size(); ++i) y[i] *= n.aux_d[0];
            return y;
        }
        case Op::kShift: {
            Tensor y = value(n.parents[0]);
            for (int i = 0; i < y.size(); ++i) y[i] += n.aux_d[0];
            return y;
        }
        case Op::kMin2: {
            const Tensor& a = value(n.parents[0]);
            const Tensor& b = value(n.parents[1]);
            if (!a.same_shape(b)) throw std::invalid_argument("min2: shape mismatch");
            Tensor y = a;
            for (int i = 0; i < y.size(); ++i) y[i] = a[i] <= b[i] ? a[i] : b[i];
            return y;
        }
        case Op::kClamp: {
            Tensor y = value(n.parents[0]);
            for (int i = 0; i < y.size(); ++i) y[i] = std::clamp(y[i], n.aux_d[0], n.aux_d[1]);
            return y;
        }
        case Op::kAddMany: {
            Tensor y = value(n.parents[0]);
            for (size_t p = 1; p < n.parents.size(); ++p) {
                const Tensor& x = value(n.parents[p]);
                if (!y.same_shape(x)) throw std::invalid_argument("add_many: shape mismatch");
                for (int i = 0; i < y.size(); ++i) y[i] += x[i];
            }
            return y;
        }
    }
    throw std::logic_error("Tape::eval: unhandled op");
}

void Tape::forward() {
    for (Node& n : nodes_) {
        if (n.op == Op::kConstant || n.op == Op::kInput) continue;
        n.value = eval(n);
    }
}

Tensor& Tape::adj_slot(NodeId id) {
    const size_t i = static_cast<size_t>(id);
    if (adj_epoch_[i] != epoch_) {
        const Tensor& v = nodes_[i].value;
        if (!adj_[i].same_shape(v)) adj_[i] = Tensor::zeros(v.rows(), v.cols());
        else adj_[i].fill(0.0);
        adj_epoch_[i] = epoch_;
    }
    return adj_[i];
}

GradientView Tape::backward(NodeId root) {
    if (!value(root).is_scalar()) throw std::invalid_argument("backward: root must be scalar");
    return backward_seeded(root, Tensor::scalar(1.0));
}

GradientView Tape::backward_seeded(NodeId root, const Tensor& seed) {
    const Node& r = at(root);
    if (!r.value.same_shape(seed)) throw std::invalid_argument("backward_seeded: seed shape mismatch");
    adj_.resize(nodes_.size());
    adj_epoch_.resize(nodes_.size(), 0);
    ++epoch_;
    adj_slot(root) = seed;
    adj_epoch_[static_cast<size_t>(root)] = epoch_;
    for (NodeId id = root; id >= 0; --id) {
        if (adj_epoch_[static_cast<size_t>(id)] != epoch_) continue;
        propagate(id);
    }
    return GradientView(this);
}

void Tape::propagate(NodeId id) {
    const Node& n = nodes_[static_cast<size_t>(id)];
    const Tensor& g = adj_[static_cast<size_t>(id)];
    switch (n.op) {
        case Op::kConstant:
        case Op::kInput:
            return;
        case Op::kGatherConcat: {
            Tensor& gt = adj_slot(n.parents[0]);
            const int cols = gt.cols();
            int at_row = 0;
            for (int r : n.aux_i) {
                for (int j = 0; j < cols; ++j) gt(r, j) += g[at_row * cols + j];
                ++at_row;
            }
            return;
        }
        case Op::kMatvec: {
            const Tensor& w = value(n.parents[0]);
            const Tensor& x = value(n.parents[1]);
            Tensor& gw = adj_slot(n.parents[0]);
            for (int i = 0; i < w.rows(); ++i)
                for (int j = 0; j < w.cols(); ++j) gw(i, j) += g[i] * x[j];
            Tensor& gx = adj_slot(n.parents[1]);
            for (int j = 0; j < w.cols(); ++j) {
                double s = 0.0;
                for (int i = 0; i < w.rows(); ++i) s += w(i, j) * g[i];
                gx[j] += s;
            }
            return;
        }
        case Op::kAdd: {
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
            Tensor& gb = adj_slot(n.parents[1]);
            for (int i = 0; i < g.size(); ++i) gb[i] += g[i];
            return;
        }
        case Op::kSub: {
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
            Tensor& gb = adj_slot(n.parents[1]);
            for (int i = 0; i < g.size(); ++i) gb[i] -= g[i];
            return;
        }
        case Op::kMul: {
            const Tensor& a = value(n.parents[0]);
            const Tensor& b = value(n.parents[1]);
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
            Tensor& gb = adj_slot(n.parents[1]);
            for (int i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
            return;
        }
        case Op::kTanh: {
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
            return;
        }
        case Op::kExp: {
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i];
            return;
        }
        case Op::kLog: {
            const Tensor& x = value(n.parents[0]);
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
            return;
        }
        case Op::kLogProb: {
            const Tensor p = kernels::softmax(value(n.parents[0]), 1.0);
            const int k = n.aux_i[0];
            const double gs = g.value();
            Tensor& gl = adj_slot(n.parents[0]);
            for (int i = 0; i < p.size(); ++i) gl[i] += gs * ((i == k ? 1.0 : 0.0) - p[i]);
            return;
        }
        case Op::kScale: {
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux_d[0];
            return;
        }
        case Op::kShift: {
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i) ga[i] += g[i];
            return;
        }
        case Op::kMin2: {
            const Tensor& a = value(n.parents[0]);
            const Tensor& b = value(n.parents[1]);
            Tensor& ga = adj_slot(n.parents[0]);
            Tensor& gb = adj_slot(n.parents[1]);
            for (int i = 0; i < g.size(); ++i) {
                if (a[i] <= b[i]) ga[i] += g[i];
                else gb[i] += g[i];
            }
            return;
        }
        case Op::kClamp: {
            const Tensor& x = value(n.parents[0]);
            Tensor& ga = adj_slot(n.parents[0]);
            for (int i = 0; i < g.size(); ++i)
                if (n.aux_d[0] <= x[i] && x[i] <= n.aux_d[1]) ga[i] += g[i];
            return;
        }
        case Op::kAddMany: {
            for (NodeId p : n.parents) {
                Tensor& gp = adj_slot(p);
                for (int i = 0; i < g.size(); ++i) gp[i] += g[i];
            }
            return;
        }
    }
    throw std::logic_error("Tape::propagate: unhandled op");
}

const Tensor& Tape::activation_gradient(NodeId id) const {
    if (!has_gradient(id)) throw std::logic_error("activation_gradient: node untouched by last backward");
    return adj_[static_cast<size_t>(id)];
}

bool Tape::has_gradient(NodeId id) const {
    const size_t i = static_cast<size_t>(id);
    return i < adj_epoch_.size() && adj_epoch_[i] == epoch_ && epoch_ > 0;
}

Tensor Tape::layer_jacobian(NodeId out, NodeId in) {
    const int m = value(out).size();
    const int n = value(in).size();
    if (m > 512) throw std::invalid_argument("layer_jacobian: output dimension exceeds 512");
    Tensor j(m, n);
    Tensor seed(value(out).rows(), value(out).cols());
    for (int r = 0; r < m; ++r) {
        seed.fill(0.0);
        seed[r] = 1.0;
        backward_seeded(out, seed);
        if (!has_gradient(in)) continue;
        const Tensor& row = activation_gradient(in);
        for (int c = 0; c < n; ++c) j(r, c) = row[c];
    }
    return j;
}

double finite_difference_check(Tape& tape, Tape::NodeId loss, Tape::NodeId wrt, double eps) {
    if (!tape.value(loss).is_scalar()) throw std::invalid_argument("finite_difference_check: loss must be scalar");
    GradientView gv = tape.backward(loss);
    const Tensor analytic = gv.grad_or_zero(wrt);
    const Tensor saved = tape.value(wrt);
    double worst = 0.0;
    for (int i = 0; i < saved.size(); ++i) {
        tape.poke(wrt, i, saved[i] + eps);
        tape.forward();
        const double fp = tape.value(loss).value();
        tape.poke(wrt, i, saved[i] - eps);
        tape.forward();
        const double fm = tape.value(loss).value();
        tape.poke(wrt, i, saved[i]);
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_difference_check: non-finite loss at perturbed point");
        const double fd = (fp - fm) / (2.0 * eps);
        worst = std::max(worst, std::fabs(fd - analytic[i]) / (std::fabs(analytic[i]) + 1e-12));
    }
    tape.forward();
    return worst;
}

}  // namespace tokenlab

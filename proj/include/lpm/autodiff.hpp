#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lpm/types.hpp"

namespace lpm::ad {

struct NodeRef {
    std::int32_t id = -1;
};

/// Per-leaf gradients, aligned with the order leaves were registered.
struct Gradient {
    std::vector<RealVec> leaves;
};

/// Define-by-run reverse-mode tape over real and complex vector/matrix
/// values.
///
/// Values are stored split (re, im); a node is real when its im array is
/// empty. Forward values are computed eagerly, and every differentiable op
/// records a pull callback that routes the node's adjoint into its inputs.
///
/// Complex convention: for a real loss L and complex node w = u + iv the
/// adjoint buffers hold (dL/du, dL/dv), i.e. twice the Wirtinger cotangent
/// dL/d(conj w). The factor collapses consistently through every op, linear
/// complex maps pull back through their conjugate transpose, and gradients
/// of real leaves match central finite differences directly.
///
/// A tape is single-threaded; independent tapes are independent.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves and constants -------------------------------------------
    NodeRef leaf(const RealVec& v);  // column vector (n x 1)
    NodeRef leaf_matrix(const RealVec& v, std::size_t rows, std::size_t cols);
    NodeRef constant(const RealVec& v);
    NodeRef constant_matrix(const RealVec& v, std::size_t rows, std::size_t cols);
    NodeRef constant_complex(const ComplexVec& v);

    // ---- elementwise and reductions -------------------------------------
    NodeRef add(NodeRef a, NodeRef b);  // real or complex, matching domains
    NodeRef sub(NodeRef a, NodeRef b);
    NodeRef scalar_mul(NodeRef a, double s);
    NodeRef mul(NodeRef a, NodeRef b);  // elementwise, real
    NodeRef sin(NodeRef a);
    NodeRef arcsin(NodeRef a);
    NodeRef tanh(NodeRef a);
    NodeRef atanh_clamped(NodeRef a, double limit);  // |x| clamped to limit
    NodeRef fold_phase(NodeRef a);                   // arcsin(sin x), fused
    NodeRef mean(NodeRef a);
    NodeRef mse_loss(NodeRef pred, const RealVec& target);
    NodeRef mae_loss(NodeRef pred, const RealVec& target);

    // ---- matrix ops (real) ----------------------------------------------
    NodeRef matmul(NodeRef a, NodeRef b);     // (r x k)(k x c)
    NodeRef matmul_nt(NodeRef a, NodeRef b);  // a * b^T, (r x k)(c x k)^T
    NodeRef add_rows(NodeRef a, NodeRef row);  // broadcast row-vector add
    NodeRef softmax_rows(NodeRef a);
    NodeRef layernorm_rows(NodeRef x, NodeRef gamma, NodeRef beta, double eps);
    NodeRef slice_cols(NodeRef a, std::size_t c0, std::size_t c1);
    NodeRef concat_cols(const std::vector<NodeRef>& parts);
    NodeRef slice_row(NodeRef a, std::size_t r);
    NodeRef pick(NodeRef a, std::size_t flat_index);  // 1x1

    // ---- complex ops (vectors) ------------------------------------------
    NodeRef complex_from_polar(NodeRef phi);  // e^{i phi}
    NodeRef complex_arg(NodeRef z);
    NodeRef complex_modulus(NodeRef z);
    NodeRef complex_mul(NodeRef a, NodeRef b);  // elementwise
    NodeRef complex_matvec(const ComplexVec& m_rowmajor, NodeRef z);
    NodeRef complex_real(NodeRef z);
    NodeRef complex_imag(NodeRef z);
    NodeRef dft(NodeRef z);
    NodeRef idft(NodeRef z);

    // ---- access ----------------------------------------------------------
    bool is_complex(NodeRef r) const;
    std::size_t rows(NodeRef r) const;
    std::size_t cols(NodeRef r) const;
    const RealVec& value(NodeRef r) const;  // real nodes only
    ComplexVec complex_value(NodeRef r) const;
    double scalar(NodeRef r) const;  // real 1x1 nodes
    std::size_t size() const { return nodes_.size(); }
    std::size_t leaf_count() const { return num_leaves_; }

    /// Reverse sweep from a real scalar node. May be called repeatedly
    /// (adjoints are reset each time); leaves unreachable from the loss get
    /// zero gradients.
    Gradient backward(NodeRef loss);

private:
    struct Node {
        std::size_t rows = 0, cols = 1;
        RealVec re, im;            // im empty => real node
        RealVec grad_re, grad_im;  // adjoints, filled during backward
        std::int32_t leaf = -1;
        std::function<void()> pull;
        const char* op = "";
    };

    std::vector<Node> nodes_;
    std::size_t num_leaves_ = 0;

    Node& at(NodeRef r);
    const Node& at(NodeRef r) const;
    NodeRef push(Node n, const char* op);
    void ensure_grad(Node& n);
    void check_finite(const Node& n, const char* op) const;
    void check_same_shape(NodeRef a, NodeRef b, const char* op) const;
    std::string shape_str(NodeRef r) const;
};

}  // namespace lpm::ad

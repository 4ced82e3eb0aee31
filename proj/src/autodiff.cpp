#include "lpm/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "lpm/dft.hpp"

namespace lpm::ad {

namespace {
constexpr double kArgModulusFloor = 1e-12;  // clamp in arg/modulus vjp denominators
constexpr double kFoldFlatTol = 1e-12;      // |cos phi| below this => subgradient 0
}  // namespace

Tape::Node& Tape::at(NodeRef r) {
    require(r.id >= 0 && static_cast<std::size_t>(r.id) < nodes_.size(), "tape",
            "invalid node reference");
    return nodes_[static_cast<std::size_t>(r.id)];
}

const Tape::Node& Tape::at(NodeRef r) const {
    require(r.id >= 0 && static_cast<std::size_t>(r.id) < nodes_.size(), "tape",
            "invalid node reference");
    return nodes_[static_cast<std::size_t>(r.id)];
}

NodeRef Tape::push(Node n, const char* op) {
    n.op = op;
    check_finite(n, op);
    nodes_.push_back(std::move(n));
    return {static_cast<std::int32_t>(nodes_.size() - 1)};
}

void Tape::ensure_grad(Node& n) {
    if (n.grad_re.empty()) n.grad_re.assign(n.re.size(), 0.0);
    if (!n.im.empty() && n.grad_im.empty()) n.grad_im.assign(n.im.size(), 0.0);
}

void Tape::check_finite(const Node& n, const char* op) const {
    if (!all_finite(n.re) || !all_finite(n.im))
        throw Error(op, "non-finite value produced");
}

std::string Tape::shape_str(NodeRef r) const {
    const Node& n = at(r);
    std::string s = "(" + std::to_string(n.rows) + "x" + std::to_string(n.cols);
    if (!n.im.empty()) s += ",complex";
    return s + ")";
}

void Tape::check_same_shape(NodeRef a, NodeRef b, const char* op) const {
    const Node& A = at(a);
    const Node& B = at(b);
    if (A.rows != B.rows || A.cols != B.cols || A.im.empty() != B.im.empty())
        throw Error(op, "shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
}

// ---- leaves and constants ------------------------------------------------

NodeRef Tape::leaf(const RealVec& v) { return leaf_matrix(v, v.size(), 1); }

NodeRef Tape::leaf_matrix(const RealVec& v, std::size_t rows, std::size_t cols) {
    require(v.size() == rows * cols, "leaf", "data size does not match shape");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.re = v;
    n.leaf = static_cast<std::int32_t>(num_leaves_++);
    return push(std::move(n), "leaf");
}

NodeRef Tape::constant(const RealVec& v) { return constant_matrix(v, v.size(), 1); }

NodeRef Tape::constant_matrix(const RealVec& v, std::size_t rows, std::size_t cols) {
    require(v.size() == rows * cols, "constant", "data size does not match shape");
    Node n;
    n.rows = rows;
    n.cols = cols;
    n.re = v;
    return push(std::move(n), "constant");
}

NodeRef Tape::constant_complex(const ComplexVec& v) {
    Node n;
    n.rows = v.size();
    n.cols = 1;
    n.re = v.re;
    n.im = v.im;
    return push(std::move(n), "constant_complex");
}

// ---- elementwise ----------------------------------------------------------

NodeRef Tape::add(NodeRef a, NodeRef b) {
    check_same_shape(a, b, "add");
    Node n;
    {
        const Node& A = at(a);
        const Node& B = at(b);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = A.re[i] + B.re[i];
        if (!A.im.empty()) {
            n.im.resize(A.im.size());
            for (std::size_t i = 0; i < n.im.size(); ++i) n.im[i] = A.im[i] + B.im[i];
        }
    }
    NodeRef out = push(std::move(n), "add");
    const int oi = out.id, ai = a.id, bi = b.id;
    nodes_[oi].pull = [this, oi, ai, bi] {
        Node& self = nodes_[oi];
        for (int t : {ai, bi}) {
            Node& in = nodes_[t];
            ensure_grad(in);
            for (std::size_t i = 0; i < self.grad_re.size(); ++i) in.grad_re[i] += self.grad_re[i];
            for (std::size_t i = 0; i < self.grad_im.size(); ++i) in.grad_im[i] += self.grad_im[i];
        }
    };
    return out;
}

NodeRef Tape::sub(NodeRef a, NodeRef b) {
    check_same_shape(a, b, "sub");
    Node n;
    {
        const Node& A = at(a);
        const Node& B = at(b);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = A.re[i] - B.re[i];
        if (!A.im.empty()) {
            n.im.resize(A.im.size());
            for (std::size_t i = 0; i < n.im.size(); ++i) n.im[i] = A.im[i] - B.im[i];
        }
    }
    NodeRef out = push(std::move(n), "sub");
    const int oi = out.id, ai = a.id, bi = b.id;
    nodes_[oi].pull = [this, oi, ai, bi] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        Node& B = nodes_[bi];
        ensure_grad(A);
        ensure_grad(B);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            A.grad_re[i] += self.grad_re[i];
            B.grad_re[i] -= self.grad_re[i];
        }
        for (std::size_t i = 0; i < self.grad_im.size(); ++i) {
            A.grad_im[i] += self.grad_im[i];
            B.grad_im[i] -= self.grad_im[i];
        }
    };
    return out;
}

NodeRef Tape::scalar_mul(NodeRef a, double s) {
    require(std::isfinite(s), "scalar_mul", "non-finite scalar");
    Node n;
    {
        const Node& A = at(a);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = s * A.re[i];
        if (!A.im.empty()) {
            n.im.resize(A.im.size());
            for (std::size_t i = 0; i < n.im.size(); ++i) n.im[i] = s * A.im[i];
        }
    }
    NodeRef out = push(std::move(n), "scalar_mul");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai, s] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) A.grad_re[i] += s * self.grad_re[i];
        for (std::size_t i = 0; i < self.grad_im.size(); ++i) A.grad_im[i] += s * self.grad_im[i];
    };
    return out;
}

NodeRef Tape::mul(NodeRef a, NodeRef b) {
    check_same_shape(a, b, "mul");
    require(!is_complex(a), "mul", "elementwise mul is real; use complex_mul");
    Node n;
    {
        const Node& A = at(a);
        const Node& B = at(b);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = A.re[i] * B.re[i];
    }
    NodeRef out = push(std::move(n), "mul");
    const int oi = out.id, ai = a.id, bi = b.id;
    nodes_[oi].pull = [this, oi, ai, bi] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        Node& B = nodes_[bi];
        ensure_grad(A);
        ensure_grad(B);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            A.grad_re[i] += self.grad_re[i] * B.re[i];
            B.grad_re[i] += self.grad_re[i] * A.re[i];
        }
    };
    return out;
}

NodeRef Tape::sin(NodeRef a) {
    require(!is_complex(a), "sin", "real input expected");
    Node n;
    {
        const Node& A = at(a);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = std::sin(A.re[i]);
    }
    NodeRef out = push(std::move(n), "sin");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i)
            A.grad_re[i] += self.grad_re[i] * std::cos(A.re[i]);
    };
    return out;
}

NodeRef Tape::arcsin(NodeRef a) {
    require(!is_complex(a), "arcsin", "real input expected");
    Node n;
    {
        const Node& A = at(a);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) {
            const double x = A.re[i];
            if (x < -1.0 || x > 1.0) throw Error("arcsin", "input outside [-1, 1]");
            n.re[i] = std::asin(x);
        }
    }
    NodeRef out = push(std::move(n), "arcsin");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double t = 1.0 - A.re[i] * A.re[i];
            if (t > 0.0) A.grad_re[i] += self.grad_re[i] / std::sqrt(t);
            // |x| == 1: subgradient 0
        }
    };
    return out;
}

NodeRef Tape::tanh(NodeRef a) {
    require(!is_complex(a), "tanh", "real input expected");
    Node n;
    {
        const Node& A = at(a);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = std::tanh(A.re[i]);
    }
    NodeRef out = push(std::move(n), "tanh");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double y = self.re[i];
            A.grad_re[i] += self.grad_re[i] * (1.0 - y * y);
        }
    };
    return out;
}

NodeRef Tape::atanh_clamped(NodeRef a, double limit) {
    require(!is_complex(a), "atanh", "real input expected");
    require(limit > 0.0 && limit < 1.0, "atanh", "clamp limit must lie in (0, 1)");
    Node n;
    {
        const Node& A = at(a);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i)
            n.re[i] = std::atanh(std::clamp(A.re[i], -limit, limit));
    }
    NodeRef out = push(std::move(n), "atanh");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai, limit] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double x = A.re[i];
            if (x > -limit && x < limit)
                A.grad_re[i] += self.grad_re[i] / (1.0 - x * x);
            // clamped region: derivative 0
        }
    };
    return out;
}

NodeRef Tape::fold_phase(NodeRef a) {
    require(!is_complex(a), "fold_phase", "real input expected");
    Node n;
    {
        const Node& A = at(a);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = fold_angle(A.re[i]);
    }
    NodeRef out = push(std::move(n), "fold_phase");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double c = std::cos(A.re[i]);
            if (std::fabs(c) < kFoldFlatTol) continue;  // fold point
            A.grad_re[i] += (c > 0.0 ? self.grad_re[i] : -self.grad_re[i]);
        }
    };
    return out;
}

NodeRef Tape::mean(NodeRef a) {
    require(!is_complex(a), "mean", "real input expected");
    Node n;
    std::size_t count = 0;
    {
        const Node& A = at(a);
        count = A.re.size();
        require(count > 0, "mean", "empty input");
        double s = 0.0;
        for (double x : A.re) s += x;
        n.rows = 1;
        n.cols = 1;
        n.re = {s / static_cast<double>(count)};
    }
    NodeRef out = push(std::move(n), "mean");
    const int oi = out.id, ai = a.id;
    const double inv = 1.0 / static_cast<double>(count);
    nodes_[oi].pull = [this, oi, ai, inv] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < A.grad_re.size(); ++i) A.grad_re[i] += inv * self.grad_re[0];
    };
    return out;
}

NodeRef Tape::mse_loss(NodeRef pred, const RealVec& target) {
    require(!is_complex(pred), "mse_loss", "real predictions expected");
    Node n;
    std::size_t count = 0;
    {
        const Node& P = at(pred);
        count = P.re.size();
        require(count == target.size(), "mse_loss",
                "prediction/target size mismatch: " + std::to_string(count) + " vs " +
                    std::to_string(target.size()));
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const double d = P.re[i] - target[i];
            s += d * d;
        }
        n.rows = 1;
        n.cols = 1;
        n.re = {s / static_cast<double>(count)};
    }
    NodeRef out = push(std::move(n), "mse_loss");
    const int oi = out.id, pi = pred.id;
    const double inv = 2.0 / static_cast<double>(count);
    RealVec tgt = target;
    nodes_[oi].pull = [this, oi, pi, inv, tgt = std::move(tgt)] {
        Node& self = nodes_[oi];
        Node& P = nodes_[pi];
        ensure_grad(P);
        for (std::size_t i = 0; i < P.grad_re.size(); ++i)
            P.grad_re[i] += self.grad_re[0] * inv * (P.re[i] - tgt[i]);
    };
    return out;
}

NodeRef Tape::mae_loss(NodeRef pred, const RealVec& target) {
    require(!is_complex(pred), "mae_loss", "real predictions expected");
    Node n;
    std::size_t count = 0;
    {
        const Node& P = at(pred);
        count = P.re.size();
        require(count == target.size(), "mae_loss",
                "prediction/target size mismatch: " + std::to_string(count) + " vs " +
                    std::to_string(target.size()));
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += std::fabs(P.re[i] - target[i]);
        n.rows = 1;
        n.cols = 1;
        n.re = {s / static_cast<double>(count)};
    }
    NodeRef out = push(std::move(n), "mae_loss");
    const int oi = out.id, pi = pred.id;
    const double inv = 1.0 / static_cast<double>(count);
    RealVec tgt = target;
    nodes_[oi].pull = [this, oi, pi, inv, tgt = std::move(tgt)] {
        Node& self = nodes_[oi];
        Node& P = nodes_[pi];
        ensure_grad(P);
        for (std::size_t i = 0; i < P.grad_re.size(); ++i) {
            const double d = P.re[i] - tgt[i];
            if (d > 0.0)
                P.grad_re[i] += self.grad_re[0] * inv;
            else if (d < 0.0)
                P.grad_re[i] -= self.grad_re[0] * inv;
        }
    };
    return out;
}

// ---- matrix ops ------------------------------------------------------------

NodeRef Tape::matmul(NodeRef a, NodeRef b) {
    require(!is_complex(a) && !is_complex(b), "matmul", "real inputs expected");
    Node n;
    std::size_t r = 0, k = 0, c = 0;
    {
        const Node& A = at(a);
        const Node& B = at(b);
        require(A.cols == B.rows, "matmul",
                "inner dimensions differ: " + shape_str(a) + " vs " + shape_str(b));
        r = A.rows;
        k = A.cols;
        c = B.cols;
        n.rows = r;
        n.cols = c;
        n.re.assign(r * c, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = A.re[i * k + kk];
                for (std::size_t j = 0; j < c; ++j) n.re[i * c + j] += aik * B.re[kk * c + j];
            }
    }
    NodeRef out = push(std::move(n), "matmul");
    const int oi = out.id, ai = a.id, bi = b.id;
    nodes_[oi].pull = [this, oi, ai, bi, r, k, c] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        Node& B = nodes_[bi];
        ensure_grad(A);
        ensure_grad(B);
        // dA = G * B^T ; dB = A^T * G
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double g = self.grad_re[i * c + j];
                if (g == 0.0) continue;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    A.grad_re[i * k + kk] += g * B.re[kk * c + j];
                    B.grad_re[kk * c + j] += g * A.re[i * k + kk];
                }
            }
    };
    return out;
}

NodeRef Tape::matmul_nt(NodeRef a, NodeRef b) {
    require(!is_complex(a) && !is_complex(b), "matmul_nt", "real inputs expected");
    Node n;
    std::size_t r = 0, k = 0, c = 0;
    {
        const Node& A = at(a);
        const Node& B = at(b);
        require(A.cols == B.cols, "matmul_nt",
                "inner dimensions differ: " + shape_str(a) + " vs " + shape_str(b));
        r = A.rows;
        k = A.cols;
        c = B.rows;
        n.rows = r;
        n.cols = c;
        n.re.assign(r * c, 0.0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                double s = 0.0;
                for (std::size_t kk = 0; kk < k; ++kk) s += A.re[i * k + kk] * B.re[j * k + kk];
                n.re[i * c + j] = s;
            }
    }
    NodeRef out = push(std::move(n), "matmul_nt");
    const int oi = out.id, ai = a.id, bi = b.id;
    nodes_[oi].pull = [this, oi, ai, bi, r, k, c] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        Node& B = nodes_[bi];
        ensure_grad(A);
        ensure_grad(B);
        // dA = G * B ; dB = G^T * A
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double g = self.grad_re[i * c + j];
                if (g == 0.0) continue;
                for (std::size_t kk = 0; kk < k; ++kk) {
                    A.grad_re[i * k + kk] += g * B.re[j * k + kk];
                    B.grad_re[j * k + kk] += g * A.re[i * k + kk];
                }
            }
    };
    return out;
}

NodeRef Tape::add_rows(NodeRef a, NodeRef row) {
    require(!is_complex(a) && !is_complex(row), "add_rows", "real inputs expected");
    Node n;
    std::size_t r = 0, c = 0;
    {
        const Node& A = at(a);
        const Node& R = at(row);
        require(R.re.size() == A.cols, "add_rows",
                "row size " + std::to_string(R.re.size()) + " does not match cols of " +
                    shape_str(a));
        r = A.rows;
        c = A.cols;
        n.rows = r;
        n.cols = c;
        n.re.resize(r * c);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) n.re[i * c + j] = A.re[i * c + j] + R.re[j];
    }
    NodeRef out = push(std::move(n), "add_rows");
    const int oi = out.id, ai = a.id, ri = row.id;
    nodes_[oi].pull = [this, oi, ai, ri, r, c] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        Node& R = nodes_[ri];
        ensure_grad(A);
        ensure_grad(R);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double g = self.grad_re[i * c + j];
                A.grad_re[i * c + j] += g;
                R.grad_re[j] += g;
            }
    };
    return out;
}

NodeRef Tape::softmax_rows(NodeRef a) {
    require(!is_complex(a), "softmax_rows", "real input expected");
    Node n;
    std::size_t r = 0, c = 0;
    {
        const Node& A = at(a);
        r = A.rows;
        c = A.cols;
        require(c > 0, "softmax_rows", "empty rows");
        n.rows = r;
        n.cols = c;
        n.re.resize(r * c);
        for (std::size_t i = 0; i < r; ++i) {
            double m = A.re[i * c];
            for (std::size_t j = 1; j < c; ++j) m = std::max(m, A.re[i * c + j]);
            double s = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double e = std::exp(A.re[i * c + j] - m);
                n.re[i * c + j] = e;
                s += e;
            }
            for (std::size_t j = 0; j < c; ++j) n.re[i * c + j] /= s;
        }
    }
    NodeRef out = push(std::move(n), "softmax_rows");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai, r, c] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j)
                dot += self.grad_re[i * c + j] * self.re[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                A.grad_re[i * c + j] += self.re[i * c + j] * (self.grad_re[i * c + j] - dot);
        }
    };
    return out;
}

NodeRef Tape::layernorm_rows(NodeRef x, NodeRef gamma, NodeRef beta, double eps) {
    require(!is_complex(x), "layernorm_rows", "real input expected");
    Node n;
    std::size_t r = 0, c = 0;
    {
        const Node& X = at(x);
        const Node& G = at(gamma);
        const Node& B = at(beta);
        r = X.rows;
        c = X.cols;
        require(G.re.size() == c && B.re.size() == c, "layernorm_rows",
                "scale/offset size does not match cols of " + shape_str(x));
        n.rows = r;
        n.cols = c;
        n.re.resize(r * c);
        for (std::size_t i = 0; i < r; ++i) {
            double mu = 0.0;
            for (std::size_t j = 0; j < c; ++j) mu += X.re[i * c + j];
            mu /= static_cast<double>(c);
            double var = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double d = X.re[i * c + j] - mu;
                var += d * d;
            }
            var /= static_cast<double>(c);
            const double inv = 1.0 / std::sqrt(var + eps);
            for (std::size_t j = 0; j < c; ++j)
                n.re[i * c + j] = G.re[j] * ((X.re[i * c + j] - mu) * inv) + B.re[j];
        }
    }
    NodeRef out = push(std::move(n), "layernorm_rows");
    const int oi = out.id, xi = x.id, gi = gamma.id, bi = beta.id;
    nodes_[oi].pull = [this, oi, xi, gi, bi, r, c, eps] {
        Node& self = nodes_[oi];
        Node& X = nodes_[xi];
        Node& G = nodes_[gi];
        Node& B = nodes_[bi];
        ensure_grad(X);
        ensure_grad(G);
        ensure_grad(B);
        RealVec xhat(c), gxh(c);
        for (std::size_t i = 0; i < r; ++i) {
            double mu = 0.0;
            for (std::size_t j = 0; j < c; ++j) mu += X.re[i * c + j];
            mu /= static_cast<double>(c);
            double var = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double d = X.re[i * c + j] - mu;
                var += d * d;
            }
            var /= static_cast<double>(c);
            const double inv = 1.0 / std::sqrt(var + eps);
            double mg = 0.0, mgx = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                xhat[j] = (X.re[i * c + j] - mu) * inv;
                const double g = self.grad_re[i * c + j];
                G.grad_re[j] += g * xhat[j];
                B.grad_re[j] += g;
                gxh[j] = g * G.re[j];
                mg += gxh[j];
                mgx += gxh[j] * xhat[j];
            }
            mg /= static_cast<double>(c);
            mgx /= static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j)
                X.grad_re[i * c + j] += inv * (gxh[j] - mg - xhat[j] * mgx);
        }
    };
    return out;
}

NodeRef Tape::slice_cols(NodeRef a, std::size_t c0, std::size_t c1) {
    require(!is_complex(a), "slice_cols", "real input expected");
    Node n;
    std::size_t r = 0, c = 0;
    {
        const Node& A = at(a);
        require(c0 < c1 && c1 <= A.cols, "slice_cols", "column range out of bounds");
        r = A.rows;
        c = A.cols;
        n.rows = r;
        n.cols = c1 - c0;
        n.re.resize(r * n.cols);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < n.cols; ++j) n.re[i * n.cols + j] = A.re[i * c + c0 + j];
    }
    const std::size_t w = n.cols;
    NodeRef out = push(std::move(n), "slice_cols");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai, r, c, c0, w] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j)
                A.grad_re[i * c + c0 + j] += self.grad_re[i * w + j];
    };
    return out;
}

NodeRef Tape::concat_cols(const std::vector<NodeRef>& parts) {
    require(!parts.empty(), "concat_cols", "no parts");
    Node n;
    std::size_t r = at(parts[0]).rows, total = 0;
    for (NodeRef p : parts) {
        const Node& P = at(p);
        require(!is_complex(p), "concat_cols", "real inputs expected");
        require(P.rows == r, "concat_cols", "row count mismatch");
        total += P.cols;
    }
    n.rows = r;
    n.cols = total;
    n.re.resize(r * total);
    std::vector<std::pair<int, std::size_t>> layout;  // (id, col offset)
    {
        std::size_t off = 0;
        for (NodeRef p : parts) {
            const Node& P = at(p);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < P.cols; ++j)
                    n.re[i * total + off + j] = P.re[i * P.cols + j];
            layout.emplace_back(p.id, off);
            off += P.cols;
        }
    }
    NodeRef out = push(std::move(n), "concat_cols");
    const int oi = out.id;
    nodes_[oi].pull = [this, oi, r, total, layout = std::move(layout)] {
        Node& self = nodes_[oi];
        for (auto [id, off] : layout) {
            Node& P = nodes_[id];
            ensure_grad(P);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < P.cols; ++j)
                    P.grad_re[i * P.cols + j] += self.grad_re[i * total + off + j];
        }
    };
    return out;
}

NodeRef Tape::slice_row(NodeRef a, std::size_t row) {
    require(!is_complex(a), "slice_row", "real input expected");
    Node n;
    std::size_t c = 0;
    {
        const Node& A = at(a);
        require(row < A.rows, "slice_row", "row index out of bounds");
        c = A.cols;
        n.rows = 1;
        n.cols = c;
        n.re.assign(A.re.begin() + static_cast<std::ptrdiff_t>(row * c),
                    A.re.begin() + static_cast<std::ptrdiff_t>((row + 1) * c));
    }
    NodeRef out = push(std::move(n), "slice_row");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai, row, c] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        for (std::size_t j = 0; j < c; ++j) A.grad_re[row * c + j] += self.grad_re[j];
    };
    return out;
}

NodeRef Tape::pick(NodeRef a, std::size_t flat_index) {
    require(!is_complex(a), "pick", "real input expected");
    Node n;
    {
        const Node& A = at(a);
        require(flat_index < A.re.size(), "pick", "index out of bounds");
        n.rows = 1;
        n.cols = 1;
        n.re = {A.re[flat_index]};
    }
    NodeRef out = push(std::move(n), "pick");
    const int oi = out.id, ai = a.id;
    nodes_[oi].pull = [this, oi, ai, flat_index] {
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        ensure_grad(A);
        A.grad_re[flat_index] += self.grad_re[0];
    };
    return out;
}

// ---- complex ops ------------------------------------------------------------

NodeRef Tape::complex_from_polar(NodeRef phi) {
    require(!is_complex(phi), "complex_from_polar", "real angles expected");
    Node n;
    {
        const Node& P = at(phi);
        n.rows = P.rows;
        n.cols = P.cols;
        n.re.resize(P.re.size());
        n.im.resize(P.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) {
            n.re[i] = std::cos(P.re[i]);
            n.im[i] = std::sin(P.re[i]);
        }
    }
    NodeRef out = push(std::move(n), "complex_from_polar");
    const int oi = out.id, pi = phi.id;
    nodes_[oi].pull = [this, oi, pi] {
        Node& self = nodes_[oi];
        Node& P = nodes_[pi];
        ensure_grad(P);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i)
            P.grad_re[i] += -self.im[i] * self.grad_re[i] + self.re[i] * self.grad_im[i];
    };
    return out;
}

NodeRef Tape::complex_arg(NodeRef z) {
    require(is_complex(z), "complex_arg", "complex input expected");
    Node n;
    {
        const Node& Z = at(z);
        n.rows = Z.rows;
        n.cols = Z.cols;
        n.re.resize(Z.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) n.re[i] = std::atan2(Z.im[i], Z.re[i]);
    }
    NodeRef out = push(std::move(n), "complex_arg");
    const int oi = out.id, zi = z.id;
    nodes_[oi].pull = [this, oi, zi] {
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double g = self.grad_re[i];
            const double r2 =
                std::max(Z.re[i] * Z.re[i] + Z.im[i] * Z.im[i], kArgModulusFloor * kArgModulusFloor);
            Z.grad_re[i] += g * (-Z.im[i] / r2);
            Z.grad_im[i] += g * (Z.re[i] / r2);
        }
    };
    return out;
}

NodeRef Tape::complex_modulus(NodeRef z) {
    require(is_complex(z), "complex_modulus", "complex input expected");
    Node n;
    {
        const Node& Z = at(z);
        n.rows = Z.rows;
        n.cols = Z.cols;
        n.re.resize(Z.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i)
            n.re[i] = std::sqrt(Z.re[i] * Z.re[i] + Z.im[i] * Z.im[i]);
    }
    NodeRef out = push(std::move(n), "complex_modulus");
    const int oi = out.id, zi = z.id;
    nodes_[oi].pull = [this, oi, zi] {
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double g = self.grad_re[i];
            const double m = std::max(self.re[i], kArgModulusFloor);
            Z.grad_re[i] += g * Z.re[i] / m;
            Z.grad_im[i] += g * Z.im[i] / m;
        }
    };
    return out;
}

NodeRef Tape::complex_mul(NodeRef a, NodeRef b) {
    check_same_shape(a, b, "complex_mul");
    require(is_complex(a), "complex_mul", "complex inputs expected");
    Node n;
    {
        const Node& A = at(a);
        const Node& B = at(b);
        n.rows = A.rows;
        n.cols = A.cols;
        n.re.resize(A.re.size());
        n.im.resize(A.re.size());
        for (std::size_t i = 0; i < n.re.size(); ++i) {
            n.re[i] = A.re[i] * B.re[i] - A.im[i] * B.im[i];
            n.im[i] = A.re[i] * B.im[i] + A.im[i] * B.re[i];
        }
    }
    NodeRef out = push(std::move(n), "complex_mul");
    const int oi = out.id, ai = a.id, bi = b.id;
    nodes_[oi].pull = [this, oi, ai, bi] {
        // adj(a) += conj(b) * adj(out), and symmetrically for b
        Node& self = nodes_[oi];
        Node& A = nodes_[ai];
        Node& B = nodes_[bi];
        ensure_grad(A);
        ensure_grad(B);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) {
            const double gr = self.grad_re[i], gi = self.grad_im[i];
            A.grad_re[i] += B.re[i] * gr + B.im[i] * gi;
            A.grad_im[i] += B.re[i] * gi - B.im[i] * gr;
            B.grad_re[i] += A.re[i] * gr + A.im[i] * gi;
            B.grad_im[i] += A.re[i] * gi - A.im[i] * gr;
        }
    };
    return out;
}

NodeRef Tape::complex_matvec(const ComplexVec& m_rowmajor, NodeRef z) {
    require(is_complex(z), "complex_matvec", "complex input expected");
    Node n;
    std::size_t rows_out = 0, len = 0;
    {
        const Node& Z = at(z);
        len = Z.re.size();
        require(len > 0 && m_rowmajor.size() % len == 0, "complex_matvec",
                "matrix size not a multiple of vector length");
        rows_out = m_rowmajor.size() / len;
        n.rows = rows_out;
        n.cols = 1;
        n.re.assign(rows_out, 0.0);
        n.im.assign(rows_out, 0.0);
        for (std::size_t i = 0; i < rows_out; ++i) {
            double sr = 0.0, si = 0.0;
            for (std::size_t j = 0; j < len; ++j) {
                const double mr = m_rowmajor.re[i * len + j], mi = m_rowmajor.im[i * len + j];
                sr += mr * Z.re[j] - mi * Z.im[j];
                si += mr * Z.im[j] + mi * Z.re[j];
            }
            n.re[i] = sr;
            n.im[i] = si;
        }
    }
    NodeRef out = push(std::move(n), "complex_matvec");
    const int oi = out.id, zi = z.id;
    ComplexVec m = m_rowmajor;
    nodes_[oi].pull = [this, oi, zi, rows_out, len, m = std::move(m)] {
        // adj(z) += M^H adj(out)
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        for (std::size_t j = 0; j < len; ++j) {
            double sr = 0.0, si = 0.0;
            for (std::size_t i = 0; i < rows_out; ++i) {
                const double mr = m.re[i * len + j], mi = -m.im[i * len + j];
                sr += mr * self.grad_re[i] - mi * self.grad_im[i];
                si += mr * self.grad_im[i] + mi * self.grad_re[i];
            }
            Z.grad_re[j] += sr;
            Z.grad_im[j] += si;
        }
    };
    return out;
}

NodeRef Tape::complex_real(NodeRef z) {
    require(is_complex(z), "complex_real", "complex input expected");
    Node n;
    {
        const Node& Z = at(z);
        n.rows = Z.rows;
        n.cols = Z.cols;
        n.re = Z.re;
    }
    NodeRef out = push(std::move(n), "complex_real");
    const int oi = out.id, zi = z.id;
    nodes_[oi].pull = [this, oi, zi] {
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) Z.grad_re[i] += self.grad_re[i];
    };
    return out;
}

NodeRef Tape::complex_imag(NodeRef z) {
    require(is_complex(z), "complex_imag", "complex input expected");
    Node n;
    {
        const Node& Z = at(z);
        n.rows = Z.rows;
        n.cols = Z.cols;
        n.re = Z.im;
    }
    NodeRef out = push(std::move(n), "complex_imag");
    const int oi = out.id, zi = z.id;
    nodes_[oi].pull = [this, oi, zi] {
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        for (std::size_t i = 0; i < self.grad_re.size(); ++i) Z.grad_im[i] += self.grad_re[i];
    };
    return out;
}

NodeRef Tape::dft(NodeRef z) {
    require(is_complex(z), "dft", "complex input expected");
    Node n;
    {
        const Node& Z = at(z);
        ComplexVec v{Z.re, Z.im};
        dft_inplace(v, false);
        n.rows = Z.rows;
        n.cols = Z.cols;
        n.re = std::move(v.re);
        n.im = std::move(v.im);
    }
    NodeRef out = push(std::move(n), "dft");
    const int oi = out.id, zi = z.id;
    nodes_[oi].pull = [this, oi, zi] {
        // unitary: adjoint pulls back through the inverse transform
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        ComplexVec g{self.grad_re, self.grad_im};
        dft_inplace(g, true);
        for (std::size_t i = 0; i < g.size(); ++i) {
            Z.grad_re[i] += g.re[i];
            Z.grad_im[i] += g.im[i];
        }
    };
    return out;
}

NodeRef Tape::idft(NodeRef z) {
    require(is_complex(z), "idft", "complex input expected");
    Node n;
    {
        const Node& Z = at(z);
        ComplexVec v{Z.re, Z.im};
        dft_inplace(v, true);
        n.rows = Z.rows;
        n.cols = Z.cols;
        n.re = std::move(v.re);
        n.im = std::move(v.im);
    }
    NodeRef out = push(std::move(n), "idft");
    const int oi = out.id, zi = z.id;
    nodes_[oi].pull = [this, oi, zi] {
        Node& self = nodes_[oi];
        Node& Z = nodes_[zi];
        ensure_grad(Z);
        ComplexVec g{self.grad_re, self.grad_im};
        dft_inplace(g, false);
        for (std::size_t i = 0; i < g.size(); ++i) {
            Z.grad_re[i] += g.re[i];
            Z.grad_im[i] += g.im[i];
        }
    };
    return out;
}

// ---- access and backward -----------------------------------------------------

bool Tape::is_complex(NodeRef r) const { return !at(r).im.empty(); }
std::size_t Tape::rows(NodeRef r) const { return at(r).rows; }
std::size_t Tape::cols(NodeRef r) const { return at(r).cols; }

const RealVec& Tape::value(NodeRef r) const {
    const Node& n = at(r);
    require(n.im.empty(), "value", "node is complex; use complex_value");
    return n.re;
}

ComplexVec Tape::complex_value(NodeRef r) const {
    const Node& n = at(r);
    require(!n.im.empty(), "complex_value", "node is real; use value");
    return ComplexVec{n.re, n.im};
}

double Tape::scalar(NodeRef r) const {
    const Node& n = at(r);
    require(n.im.empty() && n.re.size() == 1, "scalar", "node is not a real scalar");
    return n.re[0];
}

Gradient Tape::backward(NodeRef loss) {
    Node& L = at(loss);
    require(L.im.empty(), "backward", "loss must be real");
    require(L.re.size() == 1, "backward", "loss must be scalar");
    for (Node& n : nodes_) {
        n.grad_re.clear();
        n.grad_im.clear();
    }
    L.grad_re.assign(1, 1.0);
    for (std::int32_t i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.pull) continue;
        if (n.grad_re.empty() && n.grad_im.empty()) continue;  // unreachable
        n.pull();
    }
    Gradient g;
    g.leaves.resize(num_leaves_);
    for (const Node& n : nodes_) {
        if (n.leaf < 0) continue;
        RealVec& dst = g.leaves[static_cast<std::size_t>(n.leaf)];
        dst = n.grad_re.empty() ? RealVec(n.re.size(), 0.0) : n.grad_re;
        if (!all_finite(dst)) throw Error("backward", "non-finite gradient");
    }
    return g;
}

}  // namespace lpm::ad

#include "rflego/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "rflego/errors.hpp"

namespace rflego::ad {

namespace {

Complex read(const RVector& r, const CVector& c, bool complex, std::size_t i) {
    return complex ? c[i] : Complex{r[i], 0.0};
}

bool bitwise_equal(const RVector& a, const RVector& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool bitwise_equal(const CVector& a, const CVector& b) {
    return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(Complex)) == 0);
}

}  // namespace

const char* primitive_name(Primitive p) noexcept {
    switch (p) {
        case Primitive::Leaf: return "leaf";
        case Primitive::Add: return "add";
        case Primitive::Subtract: return "subtract";
        case Primitive::Multiply: return "multiply";
        case Primitive::Solve: return "solve";
        case Primitive::Correlate: return "correlate";
        case Primitive::MatVec: return "matvec";
        case Primitive::Softplus: return "softplus";
        case Primitive::Sigmoid: return "sigmoid";
        case Primitive::Tanh: return "tanh";
        case Primitive::Log: return "log";
        case Primitive::Clip: return "clip";
        case Primitive::Magnitude: return "magnitude";
        case Primitive::SoftThreshold: return "soft_threshold";
        case Primitive::Reduce: return "reduce";
        case Primitive::Concat: return "concat";
    }
    return "unknown";
}

Tape& Var::tape() const {
    if (tape_ == nullptr) {
        throw std::logic_error("Var is not attached to a tape");
    }
    return *tape_;
}

// ---------------------------------------------------------------------------
// node bookkeeping

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

const Tape::Node& Tape::node(Var v) const {
    if (v.tape_ != this || v.id_ < 0 || static_cast<std::size_t>(v.id_) >= nodes_.size()) {
        throw std::invalid_argument("Var does not belong to this tape");
    }
    return nodes_[static_cast<std::size_t>(v.id_)];
}

Tape::Node& Tape::node(Var v) {
    return const_cast<Node&>(static_cast<const Tape&>(*this).node(v));
}

Primitive Tape::primitive(Var v) const { return node(v).op; }

// ---------------------------------------------------------------------------
// leaves

Var Tape::constant(double value) { return constant(std::span<const double>(&value, 1)); }

Var Tape::constant(std::span<const double> values) {
    Node n;
    n.r.assign(values.begin(), values.end());
    n.rows = values.size();
    return push(std::move(n));
}

Var Tape::constant(std::span<const Complex> values) {
    Node n;
    n.complex = true;
    n.c.assign(values.begin(), values.end());
    n.rows = values.size();
    return push(std::move(n));
}

Var Tape::constant_matrix(std::span<const double> values, std::size_t rows, std::size_t cols) {
    if (values.size() != rows * cols) {
        throw DimensionError("constant_matrix: value count does not match shape");
    }
    Node n;
    n.r.assign(values.begin(), values.end());
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
}

Var Tape::constant_matrix(std::span<const Complex> values, std::size_t rows, std::size_t cols) {
    if (values.size() != rows * cols) {
        throw DimensionError("constant_matrix: value count does not match shape");
    }
    Node n;
    n.complex = true;
    n.c.assign(values.begin(), values.end());
    n.rows = rows;
    n.cols = cols;
    return push(std::move(n));
}

Var Tape::parameter(std::span<const double> values) {
    Var v = constant(values);
    nodes_.back().needs_grad = true;
    return v;
}

Var Tape::parameter(std::span<const Complex> values) {
    Var v = constant(values);
    nodes_.back().needs_grad = true;
    return v;
}

Var Tape::parameter_matrix(std::span<const double> values, std::size_t rows, std::size_t cols) {
    Var v = constant_matrix(values, rows, cols);
    nodes_.back().needs_grad = true;
    return v;
}

// ---------------------------------------------------------------------------
// operation constructors

Var Tape::elementwise_binary(Primitive op, Var a, Var b) {
    const Node& na = node(a);
    const Node& nb = node(b);
    const std::size_t sa = na.size();
    const std::size_t sb = nb.size();
    if (sa != sb && sa != 1 && sb != 1) {
        throw DimensionError(std::string(primitive_name(op)) + ": operand sizes " + std::to_string(sa) + " and " +
                             std::to_string(sb) + " do not broadcast");
    }
    Node n;
    n.op = op;
    n.in = {a.id_, b.id_};
    n.complex = na.complex || nb.complex;
    n.needs_grad = na.needs_grad || nb.needs_grad;
    n.rows = std::max(sa, sb);
    compute(n);
    return push(std::move(n));
}

Var Tape::elementwise_unary(Primitive op, Var x, bool allow_complex) {
    const Node& nx = node(x);
    if (nx.complex && !allow_complex) {
        throw CapabilityError(std::string(primitive_name(op)) + " is defined for real values only");
    }
    Node n;
    n.op = op;
    n.in = {x.id_, -1};
    n.complex = nx.complex && op != Primitive::Magnitude;
    n.needs_grad = nx.needs_grad;
    n.rows = nx.size();
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return elementwise_binary(Primitive::Add, a, b); }
Var Tape::sub(Var a, Var b) { return elementwise_binary(Primitive::Subtract, a, b); }
Var Tape::mul(Var a, Var b) { return elementwise_binary(Primitive::Multiply, a, b); }
Var Tape::solve(Var numerator, Var denominator) { return elementwise_binary(Primitive::Solve, numerator, denominator); }

Var Tape::correlate(Var x, Var kernel) {
    const Node& nx = node(x);
    const Node& nk = node(kernel);
    if (!nx.complex || !nk.complex) {
        throw CapabilityError("correlate: operands must be complex");
    }
    if (nx.size() != nk.size()) {
        throw DimensionError("correlate: circular correlation needs equal lengths");
    }
    Node n;
    n.op = Primitive::Correlate;
    n.in = {x.id_, kernel.id_};
    n.complex = true;
    n.needs_grad = nx.needs_grad || nk.needs_grad;
    n.rows = nx.size();
    compute(n);
    return push(std::move(n));
}

Var Tape::matvec(Var matrix, Var vec) {
    const Node& nm = node(matrix);
    const Node& nv = node(vec);
    if (nm.cols != nv.size() || nm.rows * nm.cols != nm.size()) {
        throw DimensionError("matvec: matrix is " + std::to_string(nm.rows) + "x" + std::to_string(nm.cols) +
                             ", vector has " + std::to_string(nv.size()) + " entries");
    }
    Node n;
    n.op = Primitive::MatVec;
    n.in = {matrix.id_, vec.id_};
    n.complex = nm.complex || nv.complex;
    n.needs_grad = nm.needs_grad || nv.needs_grad;
    n.rows = nm.rows;
    compute(n);
    return push(std::move(n));
}

Var Tape::softplus(Var x) {
    Var v = elementwise_unary(Primitive::Softplus, x, false);
    compute(nodes_.back());
    return v;
}

Var Tape::sigmoid(Var x) {
    Var v = elementwise_unary(Primitive::Sigmoid, x, false);
    compute(nodes_.back());
    return v;
}

Var Tape::tanh(Var x) {
    Var v = elementwise_unary(Primitive::Tanh, x, true);
    compute(nodes_.back());
    return v;
}

Var Tape::log(Var x) {
    Var v = elementwise_unary(Primitive::Log, x, false);
    compute(nodes_.back());
    return v;
}

Var Tape::clip(Var x, double lo, double hi) {
    if (!(lo <= hi)) {
        throw std::invalid_argument("clip: lo must not exceed hi");
    }
    Var v = elementwise_unary(Primitive::Clip, x, false);
    nodes_.back().lo = lo;
    nodes_.back().hi = hi;
    compute(nodes_.back());
    return v;
}

Var Tape::magnitude(Var x) {
    Var v = elementwise_unary(Primitive::Magnitude, x, true);
    compute(nodes_.back());
    return v;
}

Var Tape::soft_threshold(Var u, Var level) {
    const Node& nu = node(u);
    const Node& nl = node(level);
    if (nl.complex) {
        throw CapabilityError("soft_threshold: level must be real");
    }
    if (nl.size() != nu.size() && nl.size() != 1) {
        throw DimensionError("soft_threshold: level size must be 1 or match the input");
    }
    Node n;
    n.op = Primitive::SoftThreshold;
    n.in = {u.id_, level.id_};
    n.complex = nu.complex;
    n.needs_grad = nu.needs_grad || nl.needs_grad;
    n.rows = nu.size();
    compute(n);
    return push(std::move(n));
}

Var Tape::reduce(Reduction kind, Var x, double floor) {
    switch (kind) {
        case Reduction::Sum:
        case Reduction::Mean:
        case Reduction::Norm:
            break;
        case Reduction::Max:
            if (node(x).complex) {
                throw CapabilityError("reduce(max) needs a real input");
            }
            break;
        case Reduction::Min:
            throw CapabilityError("reduce(min) has no exact gradient and is not supported on the tape");
        case Reduction::OrderStatistic:
            throw CapabilityError("reduce(order statistic) is not supported on the tape");
    }
    const Node& nx = node(x);
    if (nx.size() == 0) {
        throw DimensionError("reduce: empty input");
    }
    Node n;
    n.op = Primitive::Reduce;
    n.reduction = kind;
    n.in = {x.id_, -1};
    n.complex = nx.complex && kind != Reduction::Norm;
    n.needs_grad = nx.needs_grad;
    n.rows = 1;
    n.lo = floor;
    compute(n);
    return push(std::move(n));
}

Var Tape::concat(std::span<const Var> parts, std::size_t cols) {
    if (parts.empty()) {
        throw DimensionError("concat: no parts");
    }
    if (cols == 0) {
        throw DimensionError("concat: cols must be positive");
    }
    Node n;
    n.op = Primitive::Concat;
    std::size_t total = 0;
    for (const Var& p : parts) {
        const Node& np = node(p);
        n.parts.push_back(p.id_);
        n.complex = n.complex || np.complex;
        n.needs_grad = n.needs_grad || np.needs_grad;
        total += np.size();
    }
    if (total % cols != 0) {
        throw DimensionError("concat: total size is not a multiple of cols");
    }
    n.rows = total / cols;
    n.cols = cols;
    compute(n);
    return push(std::move(n));
}

// ---------------------------------------------------------------------------
// forward evaluation

void Tape::compute(Node& out) const {
    const auto input = [this](int id) -> const Node& { return nodes_[static_cast<std::size_t>(id)]; };
    const std::size_t n = out.rows;

    switch (out.op) {
        case Primitive::Leaf:
            return;

        case Primitive::Add:
        case Primitive::Subtract:
        case Primitive::Multiply:
        case Primitive::Solve: {
            const Node& a = input(out.in[0]);
            const Node& b = input(out.in[1]);
            const std::size_t sa = a.size() == 1 ? 0 : 1;
            const std::size_t sb = b.size() == 1 ? 0 : 1;
            if (!out.complex) {
                out.r.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = a.r[i * sa];
                    const double y = b.r[i * sb];
                    switch (out.op) {
                        case Primitive::Add: out.r[i] = x + y; break;
                        case Primitive::Subtract: out.r[i] = x - y; break;
                        case Primitive::Multiply: out.r[i] = x * y; break;
                        default: out.r[i] = x / y; break;
                    }
                }
            } else {
                out.c.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex x = read(a.r, a.c, a.complex, i * sa);
                    const Complex y = read(b.r, b.c, b.complex, i * sb);
                    switch (out.op) {
                        case Primitive::Add: out.c[i] = x + y; break;
                        case Primitive::Subtract: out.c[i] = x - y; break;
                        case Primitive::Multiply: out.c[i] = x * y; break;
                        default: out.c[i] = x / y; break;
                    }
                }
            }
            return;
        }

        case Primitive::Correlate:
            out.c = numerics::correlate_circular_fast(input(out.in[0]).c, input(out.in[1]).c);
            return;

        case Primitive::MatVec: {
            const Node& m = input(out.in[0]);
            const Node& v = input(out.in[1]);
            const std::size_t cols = m.cols;
            if (!out.complex) {
                out.r.assign(n, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    const double* row = m.r.data() + i * cols;
                    double acc = 0.0;
                    for (std::size_t j = 0; j < cols; ++j) {
                        acc += row[j] * v.r[j];
                    }
                    out.r[i] = acc;
                }
            } else {
                out.c.assign(n, Complex{});
                for (std::size_t i = 0; i < n; ++i) {
                    Complex acc{};
                    for (std::size_t j = 0; j < cols; ++j) {
                        acc += read(m.r, m.c, m.complex, i * cols + j) * read(v.r, v.c, v.complex, j);
                    }
                    out.c[i] = acc;
                }
            }
            return;
        }

        case Primitive::Softplus:
        case Primitive::Sigmoid:
        case Primitive::Log:
        case Primitive::Clip: {
            const Node& x = input(out.in[0]);
            out.r.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = x.r[i];
                switch (out.op) {
                    case Primitive::Softplus: out.r[i] = numerics::softplus(v); break;
                    case Primitive::Sigmoid: out.r[i] = numerics::sigmoid(v); break;
                    case Primitive::Log: out.r[i] = std::log(v); break;
                    default: out.r[i] = std::clamp(v, out.lo, out.hi); break;
                }
            }
            return;
        }

        case Primitive::Tanh: {
            const Node& x = input(out.in[0]);
            if (x.complex) {
                out.c.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    out.c[i] = {std::tanh(x.c[i].real()), std::tanh(x.c[i].imag())};
                }
            } else {
                out.r.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    out.r[i] = std::tanh(x.r[i]);
                }
            }
            return;
        }

        case Primitive::Magnitude: {
            const Node& x = input(out.in[0]);
            out.r.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                out.r[i] = x.complex ? std::abs(x.c[i]) : std::abs(x.r[i]);
            }
            return;
        }

        case Primitive::SoftThreshold: {
            const Node& u = input(out.in[0]);
            const Node& lv = input(out.in[1]);
            const std::size_t sl = lv.size() == 1 ? 0 : 1;
            if (u.complex) {
                out.c.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    out.c[i] = numerics::soft_threshold(u.c[i], lv.r[i * sl]);
                }
            } else {
                out.r.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    const double v = u.r[i];
                    const double mag = std::abs(v) - lv.r[i * sl];
                    out.r[i] = mag > 0.0 ? std::copysign(mag, v) : 0.0;
                }
            }
            return;
        }

        case Primitive::Reduce: {
            const Node& x = input(out.in[0]);
            const std::size_t m = x.size();
            if (out.reduction == Reduction::Max) {
                out.r.assign(1, *std::max_element(x.r.begin(), x.r.end()));
                return;
            }
            if (out.reduction == Reduction::Norm) {
                double ss = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    ss += x.complex ? std::norm(x.c[i]) : x.r[i] * x.r[i];
                }
                out.r.assign(1, std::max(std::sqrt(ss), out.lo));
                return;
            }
            const double scale = out.reduction == Reduction::Mean ? 1.0 / static_cast<double>(m) : 1.0;
            if (x.complex) {
                Complex acc{};
                for (const auto& v : x.c) {
                    acc += v;
                }
                out.c.assign(1, acc * scale);
            } else {
                double acc = 0.0;
                for (double v : x.r) {
                    acc += v;
                }
                out.r.assign(1, acc * scale);
            }
            return;
        }

        case Primitive::Concat: {
            if (out.complex) {
                out.c.clear();
                out.c.reserve(n);
                for (int id : out.parts) {
                    const Node& p = input(id);
                    for (std::size_t i = 0; i < p.size(); ++i) {
                        out.c.push_back(read(p.r, p.c, p.complex, i));
                    }
                }
            } else {
                out.r.clear();
                out.r.reserve(n);
                for (int id : out.parts) {
                    const Node& p = input(id);
                    out.r.insert(out.r.end(), p.r.begin(), p.r.end());
                }
            }
            return;
        }
    }
}

// ---------------------------------------------------------------------------
// reverse sweep

namespace {

struct GradSink {
    bool active;
    bool complex;
    bool broadcast;
    RVector* rg;
    CVector* cg;

    void add(std::size_t i, Complex g) const {
        if (!active) {
            return;
        }
        const std::size_t j = broadcast ? 0 : i;
        if (complex) {
            (*cg)[j] += g;
        } else {
            (*rg)[j] += g.real();
        }
    }
};

}  // namespace

void Tape::propagate(Node& out) {
    const std::size_t n = out.size();
    const auto upstream = [&out](std::size_t i) -> Complex {
        return out.complex ? out.cg[i] : Complex{out.rg[i], 0.0};
    };
    const auto sink = [this](int id, std::size_t out_size) -> GradSink {
        if (id < 0) {
            return {false, false, false, nullptr, nullptr};
        }
        Node& in = nodes_[static_cast<std::size_t>(id)];
        return {in.needs_grad, in.complex, in.size() == 1 && out_size != 1, &in.rg, &in.cg};
    };
    const auto value = [this](int id, std::size_t i) -> Complex {
        const Node& in = nodes_[static_cast<std::size_t>(id)];
        const std::size_t j = in.size() == 1 ? 0 : i;
        return read(in.r, in.c, in.complex, j);
    };

    switch (out.op) {
        case Primitive::Leaf:
            return;

        case Primitive::Add: {
            const GradSink a = sink(out.in[0], n);
            const GradSink b = sink(out.in[1], n);
            for (std::size_t i = 0; i < n; ++i) {
                const Complex g = upstream(i);
                a.add(i, g);
                b.add(i, g);
            }
            return;
        }

        case Primitive::Subtract: {
            const GradSink a = sink(out.in[0], n);
            const GradSink b = sink(out.in[1], n);
            for (std::size_t i = 0; i < n; ++i) {
                const Complex g = upstream(i);
                a.add(i, g);
                b.add(i, -g);
            }
            return;
        }

        case Primitive::Multiply: {
            const GradSink a = sink(out.in[0], n);
            const GradSink b = sink(out.in[1], n);
            if (!out.complex) {
                const Node& na = nodes_[static_cast<std::size_t>(out.in[0])];
                const Node& nb = nodes_[static_cast<std::size_t>(out.in[1])];
                const std::size_t sa = na.size() == 1 ? 0 : 1;
                const std::size_t sb = nb.size() == 1 ? 0 : 1;
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = out.rg[i];
                    if (a.active) (*a.rg)[i * sa] += g * nb.r[i * sb];
                    if (b.active) (*b.rg)[i * sb] += g * na.r[i * sa];
                }
                return;
            }
            for (std::size_t i = 0; i < n; ++i) {
                const Complex g = upstream(i);
                if (a.active) a.add(i, std::conj(value(out.in[1], i)) * g);
                if (b.active) b.add(i, std::conj(value(out.in[0], i)) * g);
            }
            return;
        }

        case Primitive::Solve: {
            const GradSink a = sink(out.in[0], n);
            const GradSink b = sink(out.in[1], n);
            for (std::size_t i = 0; i < n; ++i) {
                const Complex g = upstream(i);
                const Complex den = value(out.in[1], i);
                const Complex q = read(out.r, out.c, out.complex, i);
                if (a.active) a.add(i, g / std::conj(den));
                if (b.active) b.add(i, -std::conj(q / den) * g);
            }
            return;
        }

        case Primitive::Correlate: {
            Node& x = nodes_[static_cast<std::size_t>(out.in[0])];
            Node& k = nodes_[static_cast<std::size_t>(out.in[1])];
            if (x.needs_grad) {
                // dL/dx = convolve(g, conj(k))
                CVector ck(k.c.size());
                std::transform(k.c.begin(), k.c.end(), ck.begin(), [](const Complex& v) { return std::conj(v); });
                const CVector gx = numerics::convolve_circular_fast(out.cg, ck);
                for (std::size_t i = 0; i < n; ++i) x.cg[i] += gx[i];
            }
            if (k.needs_grad) {
                // dL/dk = correlate(conj(x), g)
                CVector cx(x.c.size());
                std::transform(x.c.begin(), x.c.end(), cx.begin(), [](const Complex& v) { return std::conj(v); });
                const CVector gk = numerics::correlate_circular_fast(cx, out.cg);
                for (std::size_t i = 0; i < n; ++i) k.cg[i] += gk[i];
            }
            return;
        }

        case Primitive::MatVec: {
            Node& m = nodes_[static_cast<std::size_t>(out.in[0])];
            Node& v = nodes_[static_cast<std::size_t>(out.in[1])];
            const std::size_t cols = m.cols;
            if (!out.complex) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double g = out.rg[i];
                    if (g == 0.0) continue;
                    const double* row = m.r.data() + i * cols;
                    if (v.needs_grad) {
                        for (std::size_t j = 0; j < cols; ++j) v.rg[j] += row[j] * g;
                    }
                    if (m.needs_grad) {
                        double* grow = m.rg.data() + i * cols;
                        for (std::size_t j = 0; j < cols; ++j) grow[j] += g * v.r[j];
                    }
                }
                return;
            }
            const GradSink gm = sink(out.in[0], 0);
            const GradSink gv = sink(out.in[1], 0);
            for (std::size_t i = 0; i < n; ++i) {
                const Complex g = out.cg[i];
                for (std::size_t j = 0; j < cols; ++j) {
                    const Complex mij = read(m.r, m.c, m.complex, i * cols + j);
                    if (gv.active) gv.add(j, std::conj(mij) * g);
                    if (gm.active) gm.add(i * cols + j, g * std::conj(read(v.r, v.c, v.complex, j)));
                }
            }
            return;
        }

        case Primitive::Softplus:
        case Primitive::Sigmoid:
        case Primitive::Log:
        case Primitive::Clip: {
            Node& x = nodes_[static_cast<std::size_t>(out.in[0])];
            for (std::size_t i = 0; i < n; ++i) {
                const double g = out.rg[i];
                double d = 0.0;
                switch (out.op) {
                    case Primitive::Softplus: d = numerics::sigmoid(x.r[i]); break;
                    case Primitive::Sigmoid: d = out.r[i] * (1.0 - out.r[i]); break;
                    case Primitive::Log: d = 1.0 / x.r[i]; break;
                    default: d = (x.r[i] > out.lo && x.r[i] < out.hi) ? 1.0 : 0.0; break;
                }
                x.rg[i] += g * d;
            }
            return;
        }

        case Primitive::Tanh: {
            Node& x = nodes_[static_cast<std::size_t>(out.in[0])];
            if (x.complex) {
                for (std::size_t i = 0; i < n; ++i) {
                    const Complex t = out.c[i];
                    const Complex g = out.cg[i];
                    x.cg[i] += Complex{g.real() * (1.0 - t.real() * t.real()), g.imag() * (1.0 - t.imag() * t.imag())};
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    x.rg[i] += out.rg[i] * (1.0 - out.r[i] * out.r[i]);
                }
            }
            return;
        }

        case Primitive::Magnitude: {
            Node& x = nodes_[static_cast<std::size_t>(out.in[0])];
            for (std::size_t i = 0; i < n; ++i) {
                const double g = out.rg[i];
                const double mag = out.r[i];
                if (mag == 0.0) continue;
                if (x.complex) {
                    x.cg[i] += x.c[i] * (g / mag);
                } else {
                    x.rg[i] += g * (x.r[i] > 0.0 ? 1.0 : -1.0);
                }
            }
            return;
        }

        case Primitive::SoftThreshold: {
            Node& u = nodes_[static_cast<std::size_t>(out.in[0])];
            const GradSink gl = sink(out.in[1], n);
            const Node& lv = nodes_[static_cast<std::size_t>(out.in[1])];
            const std::size_t sl = lv.size() == 1 ? 0 : 1;
            for (std::size_t i = 0; i < n; ++i) {
                const Complex uv = read(u.r, u.c, u.complex, i);
                const double level = lv.r[i * sl];
                const double mag = std::abs(uv);
                if (mag <= level || mag == 0.0) continue;
                const Complex g = upstream(i);
                const double proj = (std::conj(g) * uv).real();  // Re(conj(g) u)
                if (u.needs_grad) {
                    const Complex gu = g * (1.0 - level / mag) + uv * (proj * level / (mag * mag * mag));
                    if (u.complex) {
                        u.cg[i] += gu;
                    } else {
                        u.rg[i] += gu.real();
                    }
                }
                gl.add(i, Complex{-proj / mag, 0.0});
            }
            return;
        }

        case Primitive::Reduce: {
            Node& x = nodes_[static_cast<std::size_t>(out.in[0])];
            const std::size_t m = x.size();
            if (out.reduction == Reduction::Max) {
                // subgradient: first maximizer
                const auto at = std::max_element(x.r.begin(), x.r.end()) - x.r.begin();
                x.rg[static_cast<std::size_t>(at)] += out.rg[0];
                return;
            }
            if (out.reduction == Reduction::Norm) {
                const double norm = out.r[0];
                double ss = 0.0;
                for (std::size_t i = 0; i < m; ++i) ss += x.complex ? std::norm(x.c[i]) : x.r[i] * x.r[i];
                if (std::sqrt(ss) < out.lo || norm == 0.0) return;  // floored: locally constant
                const double g = out.rg[0] / norm;
                for (std::size_t i = 0; i < m; ++i) {
                    if (x.complex) {
                        x.cg[i] += x.c[i] * g;
                    } else {
                        x.rg[i] += x.r[i] * g;
                    }
                }
                return;
            }
            const double scale = out.reduction == Reduction::Mean ? 1.0 / static_cast<double>(m) : 1.0;
            const Complex g = upstream(0) * scale;
            for (std::size_t i = 0; i < m; ++i) {
                if (x.complex) {
                    x.cg[i] += g;
                } else {
                    x.rg[i] += g.real();
                }
            }
            return;
        }

        case Primitive::Concat: {
            std::size_t offset = 0;
            for (int id : out.parts) {
                Node& p = nodes_[static_cast<std::size_t>(id)];
                const std::size_t len = p.size();
                if (p.needs_grad) {
                    for (std::size_t i = 0; i < len; ++i) {
                        const Complex g = upstream(offset + i);
                        if (p.complex) {
                            p.cg[i] += g;
                        } else {
                            p.rg[i] += g.real();
                        }
                    }
                }
                offset += len;
            }
            return;
        }
    }
}

void Tape::backward(Var loss) {
    const Node& l = node(loss);
    if (l.complex || l.size() != 1) {
        throw DimensionError("backward: loss must be a real scalar");
    }
    for (auto& n : nodes_) {
        if (!n.needs_grad) continue;
        if (n.complex) {
            n.cg.assign(n.c.size(), Complex{});
        } else {
            n.rg.assign(n.r.size(), 0.0);
        }
    }
    Node& seed = nodes_[static_cast<std::size_t>(loss.id_)];
    if (!seed.needs_grad) {
        return;
    }
    seed.rg[0] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(loss.id_) + 1; i-- > 0;) {
        if (nodes_[i].needs_grad) {
            propagate(nodes_[i]);
        }
    }
}

// ---------------------------------------------------------------------------
// accessors

bool Tape::is_complex(Var v) const { return node(v).complex; }
std::size_t Tape::size(Var v) const { return node(v).size(); }

std::span<const double> Tape::real_value(Var v) const {
    const Node& n = node(v);
    if (n.complex) throw CapabilityError("real_value on a complex node");
    return n.r;
}

std::span<const Complex> Tape::complex_value(Var v) const {
    const Node& n = node(v);
    if (!n.complex) throw CapabilityError("complex_value on a real node");
    return n.c;
}

double Tape::scalar(Var v) const {
    const Node& n = node(v);
    if (n.complex || n.size() != 1) throw DimensionError("scalar: node is not a real scalar");
    return n.r[0];
}

std::span<const double> Tape::real_grad(Var v) const {
    const Node& n = node(v);
    if (n.complex) throw CapabilityError("real_grad on a complex node");
    return n.rg;
}

std::span<const Complex> Tape::complex_grad(Var v) const {
    const Node& n = node(v);
    if (!n.complex) throw CapabilityError("complex_grad on a real node");
    return n.cg;
}

bool Tape::replay_matches() const {
    for (const Node& recorded : nodes_) {
        if (recorded.op == Primitive::Leaf) continue;
        Node fresh;
        fresh.op = recorded.op;
        fresh.in = recorded.in;
        fresh.parts = recorded.parts;
        fresh.complex = recorded.complex;
        fresh.rows = recorded.rows;
        fresh.cols = recorded.cols;
        fresh.lo = recorded.lo;
        fresh.hi = recorded.hi;
        fresh.reduction = recorded.reduction;
        compute(fresh);
        if (fresh.complex ? !bitwise_equal(fresh.c, recorded.c) : !bitwise_equal(fresh.r, recorded.r)) {
            return false;
        }
    }
    return true;
}

Var operator+(Var a, Var b) { return a.tape().add(a, b); }
Var operator-(Var a, Var b) { return a.tape().sub(a, b); }
Var operator*(Var a, Var b) { return a.tape().mul(a, b); }
Var operator/(Var a, Var b) { return a.tape().solve(a, b); }

// ---------------------------------------------------------------------------
// parameter blocks

Var bind(Tape& tape, const ParamBlock& block) {
    const std::size_t count = block.element_count();
    if (block.complex) {
        if (block.values.size() != 2 * count) {
            throw DimensionError("parameter block '" + block.name + "' has inconsistent complex storage");
        }
        if (block.cols != 1) {
            throw CapabilityError("complex matrix parameters are not supported");
        }
        CVector values(count);
        for (std::size_t i = 0; i < count; ++i) {
            values[i] = {block.values[2 * i], block.values[2 * i + 1]};
        }
        return tape.parameter(std::span<const Complex>(values));
    }
    if (block.values.size() != count) {
        throw DimensionError("parameter block '" + block.name + "' has inconsistent storage");
    }
    if (block.cols > 1) {
        return tape.parameter_matrix(block.values, block.rows, block.cols);
    }
    return tape.parameter(std::span<const double>(block.values));
}

Var dropout(Tape& tape, Var x, double rate, Rng& rng) {
    if (rate <= 0.0) {
        return x;
    }
    if (rate >= 1.0) {
        throw std::invalid_argument("dropout rate must be below 1");
    }
    std::bernoulli_distribution keep(1.0 - rate);
    RVector mask(tape.size(x));
    const double scale = 1.0 / (1.0 - rate);
    for (auto& m : mask) {
        m = keep(rng) ? scale : 0.0;
    }
    return tape.mul(x, tape.constant(std::span<const double>(mask)));
}

namespace {

std::vector<Var> bind_all(Tape& tape, std::span<const ParamBlock> params) {
    std::vector<Var> leaves;
    leaves.reserve(params.size());
    for (const auto& block : params) {
        leaves.push_back(bind(tape, block));
    }
    return leaves;
}

}  // namespace

ValueAndGrad value_and_grad(const TapedFunction& fn, std::span<const ParamBlock> params) {
    Tape tape;
    const std::vector<Var> leaves = bind_all(tape, params);
    const Var loss = fn(tape, leaves);
    if (tape.is_complex(loss) || tape.size(loss) != 1) {
        throw DimensionError("value_and_grad: function must return a real scalar");
    }
    tape.backward(loss);

    ValueAndGrad result;
    result.value = tape.scalar(loss);
    result.gradients.reserve(params.size());
    for (std::size_t b = 0; b < params.size(); ++b) {
        RVector grad(params[b].values.size(), 0.0);
        if (params[b].complex) {
            const auto g = tape.complex_grad(leaves[b]);
            for (std::size_t i = 0; i < g.size(); ++i) {
                grad[2 * i] = g[i].real();
                grad[2 * i + 1] = g[i].imag();
            }
        } else {
            const auto g = tape.real_grad(leaves[b]);
            std::copy(g.begin(), g.end(), grad.begin());
        }
        result.gradients.push_back(std::move(grad));
    }
    return result;
}

double evaluate(const TapedFunction& fn, std::span<const ParamBlock> params) {
    Tape tape;
    const std::vector<Var> leaves = bind_all(tape, params);
    const Var loss = fn(tape, leaves);
    return tape.scalar(loss);
}

double finite_diff_check(const TapedFunction& fn, std::span<const ParamBlock> params, double step) {
    if (!(step > 0.0)) {
        throw std::invalid_argument("finite_diff_check: step must be positive");
    }
    if (params.empty()) {
        return 0.0;
    }
    const ValueAndGrad analytic = value_and_grad(fn, params);
    std::vector<ParamBlock> work(params.begin(), params.end());
    double worst = 0.0;
    for (std::size_t b = 0; b < work.size(); ++b) {
        for (std::size_t i = 0; i < work[b].values.size(); ++i) {
            const double saved = work[b].values[i];
            double f[4];
            const double offsets[4] = {2.0, 1.0, -1.0, -2.0};
            for (int k = 0; k < 4; ++k) {
                work[b].values[i] = saved + offsets[k] * step;
                f[k] = evaluate(fn, work);
                if (!std::isfinite(f[k])) {
                    work[b].values[i] = saved;
                    throw NumericError("finite_diff_check: non-finite loss while perturbing '" + work[b].name + "'");
                }
            }
            work[b].values[i] = saved;
            // fourth-order central stencil
            const double numeric = (8.0 * (f[1] - f[2]) - (f[0] - f[3])) / (12.0 * step);
            const double exact = analytic.gradients[b][i];
            const double denom = std::max({std::abs(exact), std::abs(numeric), kGradientFloor});
            worst = std::max(worst, std::abs(exact - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace rflego::ad

#pragma once

// Reverse-mode differentiation over a closed set of vector primitives.
//
// Every value on the tape is a real or complex vector (a matrix is a vector
// with a row/column shape). Complex quantities are differentiated through
// their real/imaginary decomposition: the gradient slot of a complex value
// holds dL/dRe + j dL/dIm, which for a real loss equals twice the conjugate
// Wirtinger derivative. Real values carry plain partials.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rflego/numerics.hpp"
#include "rflego/random.hpp"

namespace rflego::ad {

enum class Primitive : std::uint8_t {
    Leaf,
    Add,
    Subtract,
    Multiply,       // element-wise, real or complex, size-1 operands broadcast
    Solve,          // element-wise division (diagonal solve)
    Correlate,      // circular cross-correlation, complex
    MatVec,         // dense matrix times vector
    Softplus,
    Sigmoid,
    Tanh,           // complex inputs: applied to real and imaginary parts separately
    Log,
    Clip,
    Magnitude,
    SoftThreshold,  // phase-preserving shrinkage, R(0) = 0
    Reduce,
    Concat,
};

/// Reductions to a scalar. Max takes real input and routes its gradient to the first
/// maximizer; Min and OrderStatistic are rejected with CapabilityError.
enum class Reduction : std::uint8_t { Sum, Mean, Norm, Max, Min, OrderStatistic };

const char* primitive_name(Primitive p) noexcept;

class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;

    bool valid() const noexcept { return tape_ != nullptr; }
    Tape& tape() const;
    int id() const noexcept { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaves. Constants never receive gradient; parameters always get a slot.
    Var constant(double value);
    Var constant(std::span<const double> values);
    Var constant(std::span<const Complex> values);
    Var constant_matrix(std::span<const double> values, std::size_t rows, std::size_t cols);
    Var constant_matrix(std::span<const Complex> values, std::size_t rows, std::size_t cols);
    Var parameter(std::span<const double> values);
    Var parameter(std::span<const Complex> values);
    Var parameter_matrix(std::span<const double> values, std::size_t rows, std::size_t cols);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var solve(Var numerator, Var denominator);
    Var correlate(Var x, Var kernel);
    Var matvec(Var matrix, Var vec);
    Var softplus(Var x);
    Var sigmoid(Var x);
    Var tanh(Var x);
    Var log(Var x);
    Var clip(Var x, double lo, double hi);
    Var magnitude(Var x);
    Var soft_threshold(Var u, Var level);
    Var reduce(Reduction kind, Var x, double floor = 0.0);
    /// Concatenates parts; with cols > 1 the result is shaped as a (total/cols) x cols matrix.
    Var concat(std::span<const Var> parts, std::size_t cols = 1);

    /// Seeds d(loss)/d(loss) = 1 and propagates to every node. The loss must be a real scalar.
    void backward(Var loss);

    bool is_complex(Var v) const;
    std::size_t size(Var v) const;
    std::span<const double> real_value(Var v) const;
    std::span<const Complex> complex_value(Var v) const;
    double scalar(Var v) const;
    std::span<const double> real_grad(Var v) const;
    std::span<const Complex> complex_grad(Var v) const;

    /// Recomputes every non-leaf node from its inputs and reports whether the
    /// recomputed values are bit-identical to the recorded ones.
    bool replay_matches() const;

    std::size_t node_count() const noexcept { return nodes_.size(); }
    Primitive primitive(Var v) const;

private:
    struct Node {
        Primitive op = Primitive::Leaf;
        std::array<int, 2> in{-1, -1};
        std::vector<int> parts;  // Concat inputs
        bool complex = false;
        bool needs_grad = false;
        std::size_t rows = 0;
        std::size_t cols = 1;
        double lo = 0.0;
        double hi = 0.0;
        Reduction reduction = Reduction::Sum;
        RVector r;
        CVector c;
        RVector rg;
        CVector cg;

        std::size_t size() const noexcept { return complex ? c.size() : r.size(); }
    };

    Var push(Node node);
    const Node& node(Var v) const;
    Node& node(Var v);
    void compute(Node& out) const;
    void propagate(Node& out);
    Var elementwise_binary(Primitive op, Var a, Var b);
    Var elementwise_unary(Primitive op, Var x, bool allow_complex);

    std::vector<Node> nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);

/// A named block of trainable values. Complex blocks store interleaved re/im pairs,
/// so `values.size() == 2 * rows * cols` for complex blocks.
struct ParamBlock {
    std::string name;
    RVector values;
    bool complex = false;
    std::size_t rows = 0;
    std::size_t cols = 1;
    bool trainable = true;

    std::size_t element_count() const noexcept { return rows * cols; }
};

/// Inverted dropout on a real or complex value: each entry is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate). The mask is a tape constant.
Var dropout(Tape& tape, Var x, double rate, Rng& rng);

/// Records a parameter leaf for the block (matrix leaf when cols > 1).
Var bind(Tape& tape, const ParamBlock& block);

using TapedFunction = std::function<Var(Tape&, std::span<const Var>)>;

struct ValueAndGrad {
    double value = 0.0;
    /// One gradient per block, same layout as ParamBlock::values (re/im pairs for complex blocks).
    std::vector<RVector> gradients;
};

/// Tapes `fn` over fresh leaves for `params` and returns the loss and every parameter gradient.
ValueAndGrad value_and_grad(const TapedFunction& fn, std::span<const ParamBlock> params);

/// Forward-only evaluation of a real scalar function.
double evaluate(const TapedFunction& fn, std::span<const ParamBlock> params);

/// Gradients below this magnitude are compared in absolute terms by finite_diff_check.
inline constexpr double kGradientFloor = 1e-6;

/// Central-difference check (five-point stencil) of every real parameter component.
/// Returns max |analytic - numeric| / max(|analytic|, |numeric|, kGradientFloor); 0 for no parameters.
double finite_diff_check(const TapedFunction& fn, std::span<const ParamBlock> params, double step);

}  // namespace rflego::ad

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "milsent/errors.hpp"
#include "milsent/rng.hpp"

namespace milsent {

// Storage is always double; in f32 mode every primitive rounds its outputs
// (and the gradient entries it writes) through binary32, so numerics match a
// float build while tests and gradient checks can run the same binary in f64.
enum class Precision { f32, f64 };

void set_precision(Precision p);
Precision precision();

// RAII switch, mainly for tests
struct PrecisionGuard {
    explicit PrecisionGuard(Precision p) : saved_(precision()) { set_precision(p); }
    ~PrecisionGuard() { set_precision(saved_); }
private:
    Precision saved_;
};

using Real = double;
using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

namespace detail {
struct TensorNode {
    Shape shape;
    std::vector<Real> values;
    std::vector<Real> grad; // sized like values iff requires_grad
    bool requires_grad = false;
};
} // namespace detail

// Dense row-major tensor. Value-semantic handle: copies share the node, so a
// Tensor can sit both in a parameter registry and in a tape closure.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real v, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<Real> values, bool requires_grad = false);
    static Tensor scalar(Real v);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const;
    std::size_t rows() const; // rank-2 only
    std::size_t cols() const; // rank-2 only
    bool is_scalar() const { return defined() && size() == 1; }

    std::vector<Real>& values();
    const std::vector<Real>& values() const;
    std::vector<Real>& grad();
    const std::vector<Real>& grad() const;

    bool requires_grad() const { return defined() && n_->requires_grad; }
    void set_requires_grad(bool on);

    Real item() const;                        // scalar tensors only
    Real at(std::size_t i) const;             // flat index
    Real at(std::size_t r, std::size_t c) const;

    void fill(Real v);
    void zero_grad();

    // independent copy of values (no grad, no history)
    Tensor clone_values() const;

    std::shared_ptr<detail::TensorNode> node() const { return n_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> n_;
};

// Ordered record of executed primitives. Replaying backward in reverse
// execution order visits every node after all of its consumers. One tape per
// thread (define-by-run, rebuilt each step).
class Tape {
public:
    static Tape& active();

    void record(std::function<void()> backward_fn);
    void clear();
    std::size_t size() const { return ops_.size(); }

    // seeds d(loss)/d(loss) = 1 and propagates; grads accumulate until the
    // owning tensors are zeroed
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> ops_;
};

// Disables recording on this thread while alive (eval / numeric probes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// convenience wrapper over Tape::active().backward
void backward(const Tensor& loss);

// rounds a buffer through binary32 when the global precision is f32; no-op in
// f64 (optimizer updates go through this to stay at storage precision)
void quantize_storage(std::vector<Real>& buf);

// ---- primitives ------------------------------------------------------------
// Binary ops require equal shapes; add() additionally broadcasts a rank-1
// length-k vector across the rows of an [m x k] matrix.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor affine(const Tensor& a, Real scale, Real shift); // scale*a + shift
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor log_clamped(const Tensor& a); // log(max(a, 1e-12))
Tensor softmax(const Tensor& a);     // rank-1, max-subtracted
// softmax over the first n_valid entries; masked positions get exactly 0
// weight and no gradient (pad masking)
Tensor masked_softmax(const Tensor& a, std::size_t n_valid);
Tensor softmax_rows(const Tensor& a); // independent softmax per row
Tensor sum(const Tensor& a);
Tensor sum_squares(const Tensor& a);
Tensor pick(const Tensor& a, std::size_t flat_index); // scalar selection
Tensor dropout(const Tensor& a, double p, bool training, Rng& rng);
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);
Tensor row(const Tensor& a, std::size_t r);
Tensor stack_rows(const std::vector<Tensor>& rows);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& a, Shape shape);
Tensor detach(const Tensor& a);

constexpr double kLogClamp = 1e-12;

} // namespace milsent

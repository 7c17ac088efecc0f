#include "milsent/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace milsent {

namespace {

std::atomic<Precision> g_precision{Precision::f64};
thread_local int g_no_grad_depth = 0;

inline Real quantize_one(Real v) {
    return g_precision.load(std::memory_order_relaxed) == Precision::f32
               ? static_cast<Real>(static_cast<float>(v))
               : v;
}

inline void quantize(std::vector<Real>& buf) {
    if (g_precision.load(std::memory_order_relaxed) == Precision::f32) {
        for (Real& v : buf) v = static_cast<Real>(static_cast<float>(v));
    }
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return n;
}

void check_shape(const Shape& s) {
    if (s.empty()) throw DimensionError("tensor shape must have at least one extent");
    for (std::size_t e : s) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(s));
    }
}

using NodePtr = std::shared_ptr<detail::TensorNode>;

NodePtr require(const Tensor& t, const char* who) {
    if (!t.defined()) throw ContractError(std::string(who) + ": undefined tensor");
    return t.node();
}

void check_rank2(const Tensor& t, const char* who) {
    if (t.rank() != 2)
        throw DimensionError(std::string(who) + ": expected a rank-2 tensor, got " + shape_str(t.shape()));
}

} // namespace

void set_precision(Precision p) { g_precision.store(p, std::memory_order_relaxed); }
Precision precision() { return g_precision.load(std::memory_order_relaxed); }

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

// ---- Tensor -----------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    check_shape(shape);
    auto n = std::make_shared<detail::TensorNode>();
    n->values.assign(shape_numel(shape), 0.0);
    n->shape = std::move(shape);
    Tensor t(std::move(n));
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::full(Shape shape, Real v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    t.fill(v);
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<Real> values, bool requires_grad) {
    check_shape(shape);
    if (shape_numel(shape) != values.size())
        throw DimensionError("from_values: shape " + shape_str(shape) + " does not match " +
                             std::to_string(values.size()) + " values");
    quantize(values);
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    Tensor t(std::move(n));
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

Tensor Tensor::scalar(Real v) { return from_values({1}, {v}); }

const Shape& Tensor::shape() const { return require(*this, "shape")->shape; }
std::size_t Tensor::size() const { return require(*this, "size")->values.size(); }
std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::rows() const {
    check_rank2(*this, "rows");
    return shape()[0];
}

std::size_t Tensor::cols() const {
    check_rank2(*this, "cols");
    return shape()[1];
}

std::vector<Real>& Tensor::values() { return require(*this, "values")->values; }
const std::vector<Real>& Tensor::values() const { return require(*this, "values")->values; }

std::vector<Real>& Tensor::grad() {
    auto n = require(*this, "grad");
    if (!n->requires_grad) throw ContractError("grad: tensor does not require gradients");
    return n->grad;
}

const std::vector<Real>& Tensor::grad() const {
    return const_cast<Tensor*>(this)->grad();
}

void Tensor::set_requires_grad(bool on) {
    auto n = require(*this, "set_requires_grad");
    n->requires_grad = on;
    if (on)
        n->grad.assign(n->values.size(), 0.0);
    else
        n->grad.clear();
}

Real Tensor::item() const {
    if (!is_scalar()) throw ContractError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
    return values()[0];
}

Real Tensor::at(std::size_t i) const {
    const auto& v = values();
    if (i >= v.size()) throw ContractError("at: flat index " + std::to_string(i) + " out of range");
    return v[i];
}

Real Tensor::at(std::size_t r, std::size_t c) const {
    check_rank2(*this, "at");
    if (r >= rows() || c >= cols()) throw ContractError("at: index out of range");
    return values()[r * cols() + c];
}

void Tensor::fill(Real v) {
    for (Real& x : values()) x = quantize_one(v);
}

void Tensor::zero_grad() {
    auto n = require(*this, "zero_grad");
    if (n->requires_grad) std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

Tensor Tensor::clone_values() const {
    return Tensor::from_values(shape(), values());
}

// ---- Tape -------------------------------------------------------------------

Tape& Tape::active() {
    thread_local Tape tape;
    return tape;
}

void Tape::record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
}

void Tape::clear() { ops_.clear(); }

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || !loss.is_scalar())
        throw ContractError("backward: loss must be a scalar tensor");
    if (!loss.requires_grad())
        throw ContractError("backward: loss was not produced on the current tape");
    loss.node()->grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

bool grad_enabled() { return g_no_grad_depth == 0; }

void backward(const Tensor& loss) { Tape::active().backward(loss); }

void quantize_storage(std::vector<Real>& buf) { quantize(buf); }

// ---- primitive helpers -------------------------------------------------------

namespace {

// Accumulates `src` into dst with f32 rounding in f32 mode.
inline void axpy_into(std::vector<Real>& dst, std::size_t off, const Real* src, std::size_t n) {
    const bool f32 = precision() == Precision::f32;
    if (f32) {
        for (std::size_t i = 0; i < n; ++i)
            dst[off + i] = static_cast<Real>(static_cast<float>(dst[off + i] + src[i]));
    } else {
        for (std::size_t i = 0; i < n; ++i) dst[off + i] += src[i];
    }
}

inline void add_one(std::vector<Real>& dst, std::size_t i, Real v) {
    dst[i] = quantize_one(dst[i] + v);
}

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!grad_enabled()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

Tensor make_output(Shape shape, std::vector<Real> values, bool track) {
    quantize(values);
    Tensor out = Tensor::from_values(std::move(shape), std::move(values));
    if (track) out.set_requires_grad(true);
    return out;
}

// elementwise unary op with dy/dx expressed from (x, y)
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd) {
    auto na = require(a, "unary");
    std::vector<Real> out(na->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(na->values[i]);
    const bool track = should_record({&a});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, bwd]() {
            for (std::size_t i = 0; i < na->grad.size(); ++i)
                add_one(na->grad, i, no->grad[i] * bwd(na->values[i], no->values[i]));
        });
    }
    return res;
}

} // namespace

// ---- primitives ---------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    auto na = require(a, "matmul");
    auto nb = require(b, "matmul");
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const std::size_t m = na->shape[0], k = na->shape[1], k2 = nb->shape[0], n = nb->shape[1];
    if (k != k2)
        throw DimensionError("matmul: inner dimensions differ: " + shape_str(na->shape) + " vs " +
                             shape_str(nb->shape));
    std::vector<Real> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const Real* arow = na->values.data() + i * k;
        Real* orow = out.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const Real av = arow[kk];
            if (av == 0.0) continue;
            const Real* brow = nb->values.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    const bool track = should_record({&a, &b});
    Tensor res = make_output({m, n}, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, nb, no, m, k, n]() {
            if (na->requires_grad) {
                // dA += dOut * B^T
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        Real acc = 0.0;
                        const Real* grow = no->grad.data() + i * n;
                        const Real* brow = nb->values.data() + kk * n;
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        add_one(na->grad, i * k + kk, acc);
                    }
            }
            if (nb->requires_grad) {
                // dB += A^T * dOut
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t j = 0; j < n; ++j) {
                        Real acc = 0.0;
                        for (std::size_t i = 0; i < m; ++i)
                            acc += na->values[i * k + kk] * no->grad[i * n + j];
                        add_one(nb->grad, kk * n + j, acc);
                    }
            }
        });
    }
    return res;
}

Tensor transpose(const Tensor& a) {
    auto na = require(a, "transpose");
    check_rank2(a, "transpose");
    const std::size_t m = na->shape[0], n = na->shape[1];
    std::vector<Real> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = na->values[i * n + j];
    const bool track = should_record({&a});
    Tensor res = make_output({n, m}, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, m, n]() {
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    add_one(na->grad, i * n + j, no->grad[j * m + i]);
        });
    }
    return res;
}

Tensor add(const Tensor& a, const Tensor& b) {
    auto na = require(a, "add");
    auto nb = require(b, "add");
    const bool same = na->shape == nb->shape;
    const bool broadcast = !same && a.rank() == 2 && b.rank() == 1 && na->shape[1] == nb->shape[0];
    if (!same && !broadcast)
        throw DimensionError("add: incompatible shapes " + shape_str(na->shape) + " and " +
                             shape_str(nb->shape));
    std::vector<Real> out(na->values.size());
    if (same) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] + nb->values[i];
    } else {
        const std::size_t m = na->shape[0], n = na->shape[1];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out[i * n + j] = na->values[i * n + j] + nb->values[j];
    }
    const bool track = should_record({&a, &b});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        if (same) {
            Tape::active().record([na, nb, no]() {
                if (na->requires_grad) axpy_into(na->grad, 0, no->grad.data(), no->grad.size());
                if (nb->requires_grad) axpy_into(nb->grad, 0, no->grad.data(), no->grad.size());
            });
        } else {
            const std::size_t m = na->shape[0], n = na->shape[1];
            Tape::active().record([na, nb, no, m, n]() {
                if (na->requires_grad) axpy_into(na->grad, 0, no->grad.data(), no->grad.size());
                if (nb->requires_grad) {
                    for (std::size_t j = 0; j < n; ++j) {
                        Real acc = 0.0;
                        for (std::size_t i = 0; i < m; ++i) acc += no->grad[i * n + j];
                        add_one(nb->grad, j, acc);
                    }
                }
            });
        }
    }
    return res;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    auto na = require(a, "mul");
    auto nb = require(b, "mul");
    if (na->shape != nb->shape)
        throw DimensionError("mul: incompatible shapes " + shape_str(na->shape) + " and " +
                             shape_str(nb->shape));
    std::vector<Real> out(na->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = na->values[i] * nb->values[i];
    const bool track = should_record({&a, &b});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, nb, no]() {
            for (std::size_t i = 0; i < no->grad.size(); ++i) {
                if (na->requires_grad) add_one(na->grad, i, no->grad[i] * nb->values[i]);
                if (nb->requires_grad) add_one(nb->grad, i, no->grad[i] * na->values[i]);
            }
        });
    }
    return res;
}

Tensor affine(const Tensor& a, Real scale, Real shift) {
    return unary_op(
        a, [scale, shift](Real x) { return scale * x + shift; },
        [scale](Real, Real) { return scale; });
}

Tensor tanh(const Tensor& a) {
    return unary_op(
        a, [](Real x) { return std::tanh(x); },
        [](Real, Real y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(
        a, [](Real x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](Real, Real y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
    return unary_op(
        a, [](Real x) { return x > 0.0 ? x : 0.0; },
        [](Real x, Real) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor log_clamped(const Tensor& a) {
    // value and derivative are those of log(max(x, clamp)): zero slope in the
    // clamped region
    return unary_op(
        a, [](Real x) { return std::log(std::max(x, kLogClamp)); },
        [](Real x, Real) { return x > kLogClamp ? 1.0 / x : 0.0; });
}

namespace {

// shared softmax kernel over a contiguous range
void softmax_span(const Real* x, Real* y, std::size_t n) {
    Real mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    Real total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        total += y[i];
    }
    for (std::size_t i = 0; i < n; ++i) y[i] /= total;
}

void softmax_span_backward(const Real* y, const Real* dy, std::vector<Real>& dx,
                           std::size_t off, std::size_t n) {
    Real dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += dy[i] * y[i];
    for (std::size_t i = 0; i < n; ++i) add_one(dx, off + i, y[i] * (dy[i] - dot));
}

} // namespace

Tensor softmax(const Tensor& a) {
    auto na = require(a, "softmax");
    if (a.rank() != 1)
        throw DimensionError("softmax: expected a rank-1 tensor, got " + shape_str(na->shape));
    const std::size_t n = na->values.size();
    std::vector<Real> out(n);
    softmax_span(na->values.data(), out.data(), n);
    const bool track = should_record({&a});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, n]() {
            softmax_span_backward(no->values.data(), no->grad.data(), na->grad, 0, n);
        });
    }
    return res;
}

Tensor masked_softmax(const Tensor& a, std::size_t n_valid) {
    auto na = require(a, "masked_softmax");
    if (a.rank() != 1)
        throw DimensionError("masked_softmax: expected a rank-1 tensor, got " + shape_str(na->shape));
    const std::size_t n = na->values.size();
    if (n_valid == 0 || n_valid > n)
        throw DimensionError("masked_softmax: valid length " + std::to_string(n_valid) +
                             " out of range for " + shape_str(na->shape));
    std::vector<Real> out(n, 0.0);
    softmax_span(na->values.data(), out.data(), n_valid);
    const bool track = should_record({&a});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, n_valid]() {
            softmax_span_backward(no->values.data(), no->grad.data(), na->grad, 0, n_valid);
        });
    }
    return res;
}

Tensor softmax_rows(const Tensor& a) {
    auto na = require(a, "softmax_rows");
    check_rank2(a, "softmax_rows");
    const std::size_t m = na->shape[0], n = na->shape[1];
    std::vector<Real> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        softmax_span(na->values.data() + i * n, out.data() + i * n, n);
    const bool track = should_record({&a});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, m, n]() {
            for (std::size_t i = 0; i < m; ++i)
                softmax_span_backward(no->values.data() + i * n, no->grad.data() + i * n,
                                      na->grad, i * n, n);
        });
    }
    return res;
}

Tensor sum(const Tensor& a) {
    auto na = require(a, "sum");
    Real total = 0.0;
    for (Real v : na->values) total += v;
    const bool track = should_record({&a});
    Tensor res = make_output({1}, {total}, track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no]() {
            const Real g = no->grad[0];
            for (std::size_t i = 0; i < na->grad.size(); ++i) add_one(na->grad, i, g);
        });
    }
    return res;
}

Tensor sum_squares(const Tensor& a) {
    auto na = require(a, "sum_squares");
    Real total = 0.0;
    for (Real v : na->values) total += v * v;
    const bool track = should_record({&a});
    Tensor res = make_output({1}, {total}, track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no]() {
            const Real g = no->grad[0];
            for (std::size_t i = 0; i < na->grad.size(); ++i)
                add_one(na->grad, i, g * 2.0 * na->values[i]);
        });
    }
    return res;
}

Tensor pick(const Tensor& a, std::size_t flat_index) {
    auto na = require(a, "pick");
    if (flat_index >= na->values.size())
        throw ContractError("pick: index " + std::to_string(flat_index) + " out of range for " +
                            shape_str(na->shape));
    const bool track = should_record({&a});
    Tensor res = make_output({1}, {na->values[flat_index]}, track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, flat_index]() {
            add_one(na->grad, flat_index, no->grad[0]);
        });
    }
    return res;
}

Tensor dropout(const Tensor& a, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("dropout: probability must be in [0, 1), got " + std::to_string(p));
    auto na = require(a, "dropout");
    if (!training || p == 0.0) {
        // identity, but keep the graph edge
        return affine(a, 1.0, 0.0);
    }
    const Real keep_scale = 1.0 / (1.0 - p);
    auto mask = std::make_shared<std::vector<Real>>(na->values.size());
    std::vector<Real> out(na->values.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Real m = rng.bernoulli(p) ? 0.0 : keep_scale;
        (*mask)[i] = m;
        out[i] = na->values[i] * m;
    }
    const bool track = should_record({&a});
    Tensor res = make_output(na->shape, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, mask]() {
            for (std::size_t i = 0; i < na->grad.size(); ++i)
                add_one(na->grad, i, no->grad[i] * (*mask)[i]);
        });
    }
    return res;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
    auto nt = require(table, "gather_rows");
    check_rank2(table, "gather_rows");
    if (ids.empty()) throw DataError("gather_rows: empty index list");
    const std::size_t v = nt->shape[0], d = nt->shape[1];
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            throw DataError("gather_rows: index " + std::to_string(ids[i]) + " at position " +
                            std::to_string(i) + " out of range for table " + shape_str(nt->shape));
    }
    std::vector<Real> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(nt->values.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
    const bool track = should_record({&table});
    Tensor res = make_output({ids.size(), d}, std::move(out), track);
    if (track) {
        auto no = res.node();
        auto idx = ids; // captured copy
        Tape::active().record([nt, no, idx, d]() {
            for (std::size_t i = 0; i < idx.size(); ++i)
                axpy_into(nt->grad, static_cast<std::size_t>(idx[i]) * d, no->grad.data() + i * d, d);
        });
    }
    return res;
}

Tensor row(const Tensor& a, std::size_t r) {
    auto na = require(a, "row");
    check_rank2(a, "row");
    const std::size_t m = na->shape[0], n = na->shape[1];
    if (r >= m)
        throw DimensionError("row: index " + std::to_string(r) + " out of range for " +
                             shape_str(na->shape));
    std::vector<Real> out(na->values.begin() + r * n, na->values.begin() + (r + 1) * n);
    const bool track = should_record({&a});
    Tensor res = make_output({1, n}, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no, r, n]() {
            axpy_into(na->grad, r * n, no->grad.data(), n);
        });
    }
    return res;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw DimensionError("stack_rows: need at least one row");
    const std::size_t n = rows[0].cols();
    bool track = false;
    for (const Tensor& t : rows) {
        check_rank2(t, "stack_rows");
        if (t.rows() != 1 || t.cols() != n)
            throw DimensionError("stack_rows: expected rows of shape [1x" + std::to_string(n) +
                                 "], got " + shape_str(t.shape()));
        track = track || t.requires_grad();
    }
    track = track && grad_enabled();
    std::vector<Real> out;
    out.reserve(rows.size() * n);
    for (const Tensor& t : rows)
        out.insert(out.end(), t.values().begin(), t.values().end());
    Tensor res = make_output({rows.size(), n}, std::move(out), track);
    if (track) {
        auto no = res.node();
        std::vector<NodePtr> ins;
        ins.reserve(rows.size());
        for (const Tensor& t : rows) ins.push_back(t.node());
        Tape::active().record([ins, no, n]() {
            for (std::size_t i = 0; i < ins.size(); ++i)
                if (ins[i]->requires_grad)
                    axpy_into(ins[i]->grad, 0, no->grad.data() + i * n, n);
        });
    }
    return res;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    auto na = require(a, "concat_cols");
    auto nb = require(b, "concat_cols");
    check_rank2(a, "concat_cols");
    check_rank2(b, "concat_cols");
    if (na->shape[0] != nb->shape[0])
        throw DimensionError("concat_cols: row counts differ: " + shape_str(na->shape) + " vs " +
                             shape_str(nb->shape));
    const std::size_t m = na->shape[0], ca = na->shape[1], cb = nb->shape[1];
    std::vector<Real> out(m * (ca + cb));
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(na->values.data() + i * ca, ca, out.data() + i * (ca + cb));
        std::copy_n(nb->values.data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
    }
    const bool track = should_record({&a, &b});
    Tensor res = make_output({m, ca + cb}, std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, nb, no, m, ca, cb]() {
            for (std::size_t i = 0; i < m; ++i) {
                if (na->requires_grad)
                    axpy_into(na->grad, i * ca, no->grad.data() + i * (ca + cb), ca);
                if (nb->requires_grad)
                    axpy_into(nb->grad, i * cb, no->grad.data() + i * (ca + cb) + ca, cb);
            }
        });
    }
    return res;
}

Tensor reshape(const Tensor& a, Shape shape) {
    auto na = require(a, "reshape");
    check_shape(shape);
    if (shape_numel(shape) != na->values.size())
        throw DimensionError("reshape: cannot view " + shape_str(na->shape) + " as " +
                             shape_str(shape));
    std::vector<Real> out = na->values;
    const bool track = should_record({&a});
    Tensor res = make_output(std::move(shape), std::move(out), track);
    if (track) {
        auto no = res.node();
        Tape::active().record([na, no]() {
            axpy_into(na->grad, 0, no->grad.data(), no->grad.size());
        });
    }
    return res;
}

Tensor detach(const Tensor& a) {
    auto na = require(a, "detach");
    return Tensor::from_values(na->shape, na->values);
}

} // namespace milsent

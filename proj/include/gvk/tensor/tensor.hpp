#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvk {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or argument contract violated by the caller.
class ShapeError : public Error {
public:
    using Error::Error;
};

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(TensorImpl&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    void accumulate_grad(std::span<const float> g);
    std::vector<float>& ensure_grad();
};

}  // namespace detail

/// Dense row-major f32 array with optional reverse-mode gradient tracking.
///
/// Tensor is a shared handle: copies alias the same storage and graph node.
/// Ops never mutate their inputs; only optimizer steps and explicit
/// `mutable_data()` writes change a tensor after creation.
class Tensor {
public:
    Tensor();
    Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    const Shape& shape() const { return impl_->shape; }
    std::size_t dim(std::size_t axis) const;
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t size() const { return impl_->data.size(); }
    bool defined() const { return impl_ != nullptr; }

    std::span<const float> data() const { return impl_->data; }
    std::span<float> mutable_data() { return impl_->data; }
    float item() const;
    float at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool flag);
    bool has_grad() const { return !impl_->grad.empty(); }
    /// Gradient buffer; zeros of matching size when nothing was accumulated.
    std::span<const float> grad() const;
    std::span<float> mutable_grad();
    void zero_grad();

    /// Reverse-mode pass from a scalar root. Leaf gradients accumulate across
    /// calls; intermediate gradients are recomputed each call.
    void backward() const;

    /// Same storage values in a new graph-free leaf (copy of data).
    Tensor detach() const;
    Tensor clone() const { return detach(); }

    const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
    static Tensor from_impl(std::shared_ptr<detail::TensorImpl> impl);

private:
    std::shared_ptr<detail::TensorImpl> impl_;
};

/// Creates an op result. When any parent requires grad the node records
/// `backward` and its parents; otherwise the result is a plain leaf.
Tensor make_result(Shape shape, std::vector<float> data, std::vector<Tensor> parents,
                   std::function<void(detail::TensorImpl&)> backward);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

}  // namespace gvk

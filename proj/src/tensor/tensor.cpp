#include "gvk/tensor/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace gvk {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace detail {

std::vector<float>& TensorImpl::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
    return grad;
}

void TensorImpl::accumulate_grad(std::span<const float> g) {
    auto& dst = ensure_grad();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

}  // namespace detail

Tensor::Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
    if (numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<float>(n, 0.0f), requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return Tensor({}, {value}, requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= rank()) throw ShapeError("axis out of range for shape " + shape_str(shape()));
    return impl_->shape[axis];
}

float Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

float Tensor::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw ShapeError("index rank mismatch");
    std::size_t offset = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= impl_->shape[axis]) throw ShapeError("index out of range");
        offset = offset * impl_->shape[axis] + i;
        ++axis;
    }
    return impl_->data[offset];
}

void Tensor::set_requires_grad(bool flag) {
    if (!impl_->is_leaf()) throw Error("requires_grad can only be changed on leaf tensors");
    impl_->requires_grad = flag;
}

std::span<const float> Tensor::grad() const { return impl_->ensure_grad(); }

std::span<float> Tensor::mutable_grad() { return impl_->ensure_grad(); }

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

void Tensor::backward() const {
    if (size() != 1) throw ShapeError("backward() requires a scalar root, got " + shape_str(shape()));
    if (!impl_->requires_grad) return;

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<detail::TensorImpl*> order;
    std::unordered_set<detail::TensorImpl*> visited;
    std::vector<std::pair<detail::TensorImpl*, std::size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    visited.insert(impl_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            auto* parent = node->parents[next++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (auto* node : order) {
        if (!node->is_leaf()) {
            node->grad.assign(node->data.size(), 0.0f);
        }
    }
    impl_->ensure_grad()[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
    }
}

Tensor Tensor::detach() const {
    return Tensor(impl_->shape, impl_->data, false);
}

Tensor Tensor::from_impl(std::shared_ptr<detail::TensorImpl> impl) {
    Tensor t;
    t.impl_ = std::move(impl);
    return t;
}

Tensor make_result(Shape shape, std::vector<float> data, std::vector<Tensor> parents,
                   std::function<void(detail::TensorImpl&)> backward) {
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    bool tracked = false;
    if (g_grad_enabled) {
        for (const auto& p : parents) tracked = tracked || p.requires_grad();
    }
    if (tracked) {
        impl->requires_grad = true;
        impl->parents.reserve(parents.size());
        for (const auto& p : parents) impl->parents.push_back(p.impl());
        impl->backward_fn = std::move(backward);
    }
    return Tensor::from_impl(std::move(impl));
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

}  // namespace gvk

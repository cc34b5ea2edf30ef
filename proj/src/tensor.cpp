#include "forma/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace forma {

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    for (auto e : shape)
        if (e <= 0)
            throw DimensionError("tensor extent must be positive, got shape " +
                                 shape_str(shape));
    shape_ = std::move(shape);
    st_ = std::make_shared<Storage>();
    st_->v.assign(static_cast<std::size_t>(shape_numel(shape_)), fill);
    if (requires_grad) set_requires_grad(true);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    Tensor t(shape);
    if (static_cast<std::int64_t>(values.size()) != t.size())
        throw DimensionError("value count " + std::to_string(values.size()) +
                             " does not fill shape " + shape_str(shape));
    t.st_->v = std::move(values);
    if (requires_grad) t.set_requires_grad(true);
    return t;
}

double Tensor::item() const {
    if (!st_ || st_->v.size() != 1)
        throw DimensionError("item() needs a single-element tensor, got " +
                             shape_str(shape_));
    return st_->v[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
    if (!st_) throw UsageError("set_requires_grad on undefined tensor");
    if (on && !st_->rg) st_->g.assign(st_->v.size(), 0.0);
    if (!on) st_->g.clear();
    st_->rg = on;
    return *this;
}

void Tensor::zero_grad() {
    if (st_ && st_->rg) std::fill(st_->g.begin(), st_->g.end(), 0.0);
}

Tensor Tensor::clone() const {
    Tensor t;
    if (!st_) return t;
    t.shape_ = shape_;
    t.st_ = std::make_shared<Storage>();
    t.st_->v = st_->v;
    return t;
}

void Tensor::copy_from(const Tensor& src) {
    if (!st_ || !src.st_) throw UsageError("copy_from with undefined tensor");
    if (shape_ != src.shape_)
        throw DimensionError("copy_from shape mismatch: " + shape_str(shape_) +
                             " vs " + shape_str(src.shape_));
    st_->v = src.st_->v;
}

bool Tensor::all_finite() const {
    if (!st_) return true;
    for (double x : st_->v)
        if (!std::isfinite(x)) return false;
    return true;
}

void Graph::record(const char* tag, Tensor output, std::function<void()> backward) {
    produced_.insert(output.storage_id());
    nodes_.push_back(Node{tag, std::move(output), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw DimensionError("backward expects a scalar loss");
    if (!produced_.count(loss.storage_id()))
        throw DomainError("backward on a tensor detached from this graph");
    if (!std::isfinite(loss.item()))
        throw NumericError("backward on non-finite loss");
    // Intermediate grads are owned by the tape: reset them, then seed the loss.
    for (auto& n : nodes_) n.out.zero_grad();
    loss.grad()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
        if (it->back) it->back();
}

void Graph::clear() {
    nodes_.clear();
    produced_.clear();
}

}  // namespace forma

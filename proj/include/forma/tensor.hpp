#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "forma/common.hpp"

namespace forma {

// Dense row-major tensor of doubles. Copies share storage; use clone()
// for a deep copy. A tensor that requires grad carries a gradient buffer
// of the same size.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);

    static Tensor from_data(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
    static Tensor scalar(double v) { return from_data({1}, {v}); }

    bool defined() const { return static_cast<bool>(st_); }
    const Shape& shape() const { return shape_; }
    std::int64_t ndim() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t dim(std::int64_t i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return st_ ? static_cast<std::int64_t>(st_->v.size()) : 0; }

    // Copies alias the same storage, so accessors hand out mutable views
    // even through a const Tensor (pointer semantics).
    double* data() const { return st_->v.data(); }
    std::vector<double>& vec() const { return st_->v; }

    double item() const;

    bool requires_grad() const { return st_ && st_->rg; }
    Tensor& set_requires_grad(bool on);
    double* grad() const { return st_ && st_->rg ? st_->g.data() : nullptr; }
    void zero_grad();

    Tensor clone() const;     // deep copy of values, grad not carried over
    void copy_from(const Tensor& src);  // in-place value copy, shapes must match

    bool all_finite() const;
    const void* storage_id() const { return st_.get(); }

    // Convenience index accessors (row-major), mainly for tests.
    double& at(std::int64_t i) const { return st_->v[static_cast<std::size_t>(i)]; }
    double& at(std::int64_t i, std::int64_t j) const {
        return st_->v[static_cast<std::size_t>(i * shape_[1] + j)];
    }
    double& at(std::int64_t i, std::int64_t j, std::int64_t k) const {
        return st_->v[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

  private:
    struct Storage {
        std::vector<double> v;
        std::vector<double> g;  // allocated only while rg is set
        bool rg = false;
    };
    Shape shape_;
    std::shared_ptr<Storage> st_;
};

// Reverse-mode tape. Operations append nodes in execution order; backward
// seeds d(loss)=1 and replays the tape in reverse. Gradients of leaf
// tensors (parameters) accumulate, so zero them between optimizer steps.
class Graph {
  public:
    void set_recording(bool on) { recording_ = on; }
    bool recording() const { return recording_; }

    void record(const char* tag, Tensor output, std::function<void()> backward);
    void backward(const Tensor& loss);

    std::size_t node_count() const { return nodes_.size(); }
    void clear();

  private:
    struct Node {
        const char* tag;
        Tensor out;
        std::function<void()> back;
    };
    std::vector<Node> nodes_;
    std::unordered_set<const void*> produced_;
    bool recording_ = true;
};

// True when recording is on and at least one input participates in
// autodiff; ops use this to decide whether to tape a node.
inline bool track(const Graph& g, std::initializer_list<const Tensor*> ins) {
    if (!g.recording()) return false;
    for (const Tensor* t : ins)
        if (t->defined() && t->requires_grad()) return true;
    return false;
}

}  // namespace forma

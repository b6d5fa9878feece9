#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "vstar/tensor.hpp"

namespace vstar::nn {

/// A value in the computation graph together with its gradient buffer.
struct Node {
    Tensor value;
    Tensor grad;

    explicit Node(Tensor v) : value(std::move(v)), grad(value.shape()) {}
};

using NodePtr = std::shared_ptr<Node>;

inline NodePtr make_node(Tensor v) { return std::make_shared<Node>(std::move(v)); }

/// Records backward closures during the forward pass; backward() runs them in
/// reverse. A null Tape* means inference: ops skip recording entirely.
class Tape {
public:
    void push(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

    void backward() {
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
        ops_.clear();
    }

    std::size_t size() const { return ops_.size(); }

private:
    std::vector<std::function<void()>> ops_;
};

}  // namespace vstar::nn

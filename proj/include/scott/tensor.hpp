#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "scott/errors.hpp"

namespace scott {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
concept Real = std::same_as<T, float> || std::same_as<T, double>;

namespace detail {

template <Real T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something flows into it
  bool requires_grad = false;
  bool leaf = true;

  std::vector<T>& grad_buffer() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

/// Dense row-major n-dimensional array.
///
/// A Tensor is a shared handle: copies alias the same storage. Values are
/// treated as immutable once an op has consumed them; only leaves (parameters,
/// inputs) are written through mutable_data(), and only outside a recording.
template <Real T>
class Tensor {
 public:
  using value_type = T;
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }
  static Tensor from_node(NodePtr node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(node_->shape.size()); }
  /// Extent of `axis`; negative axes count from the back.
  std::int64_t dim(std::int64_t axis) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T operator[](std::size_t i) const { return node_->data[i]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on = true);
  bool is_leaf() const { return node_->leaf; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient as a fresh tensor; zeros when nothing has flowed in.
  Tensor grad() const;
  std::span<const T> grad_data() const { return node_->grad; }
  void zero_grad();
  void clear_grad() { node_->grad.clear(); node_->grad.shrink_to_fit(); }

  /// Same values, cut from any recording.
  Tensor detach() const;
  /// Deep copy of the values (no gradient, not recorded).
  Tensor clone() const;

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Ordered record of executed differentiable ops.
///
/// Constructing a Tape makes it the active recorder for its scalar type on the
/// current thread; ops executed while it is active and touching a tensor that
/// requires grad append a backward closure. Destruction restores the previous
/// recorder. backward() replays closures in exact reverse execution order and
/// can be called once.
template <Real T>
class Tape {
 public:
  using NodePtr = std::shared_ptr<detail::Node<T>>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() noexcept;

  void record(std::function<void()> backward, std::span<const NodePtr> inputs);
  void backward(const Tensor<T>& loss);

  std::size_t size() const noexcept { return ops_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  std::vector<std::function<void()>> ops_;
  std::vector<NodePtr> kept_;
  Tape* previous_ = nullptr;
  bool consumed_ = false;
};

/// Suspends recording for its lifetime (both scalar types).
class NoGrad {
 public:
  NoGrad();
  ~NoGrad();
  NoGrad(const NoGrad&) = delete;
  NoGrad& operator=(const NoGrad&) = delete;

 private:
  Tape<float>* saved_f_;
  Tape<double>* saved_d_;
};

namespace detail {

/// Build an op result and, when recording, register its backward closure.
/// `backward` receives the output node (values and incoming gradient); it runs
/// only if a gradient reached the output.
template <Real T, typename Backward>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::span<const Tensor<T>> inputs,
                      Backward&& backward) {
  auto out = std::make_shared<Node<T>>();
  out->shape = std::move(shape);
  out->data = std::move(values);
  Tape<T>* tape = Tape<T>::active();
  bool needs = false;
  if (tape != nullptr) {
    for (const auto& in : inputs) needs = needs || (in.defined() && in.requires_grad());
  }
  if (needs) {
    out->requires_grad = true;
    out->leaf = false;
    std::vector<typename Tape<T>::NodePtr> nodes;
    nodes.reserve(inputs.size());
    for (const auto& in : inputs) {
      if (in.defined()) nodes.push_back(in.node());
    }
    std::weak_ptr<Node<T>> weak = out;
    tape->record(
        [weak, fn = std::forward<Backward>(backward)]() mutable {
          auto o = weak.lock();
          if (!o || o->grad.empty()) return;
          fn(*o);
        },
        nodes);
  }
  return Tensor<T>::from_node(std::move(out));
}

template <Real T, typename Backward>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::initializer_list<Tensor<T>> inputs,
                      Backward&& backward) {
  return make_result<T>(std::move(shape), std::move(values),
                        std::span<const Tensor<T>>(inputs.begin(), inputs.size()),
                        std::forward<Backward>(backward));
}

/// Gradient buffer of `t` if it participates in differentiation, else nullptr.
template <Real T>
T* grad_target(const Tensor<T>& t) {
  if (!t.defined() || !t.requires_grad()) return nullptr;
  return t.node()->grad_buffer().data();
}

}  // namespace detail

}  // namespace scott

#include "scott/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace scott {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <Real T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<detail::Node<T>>()) {
  const auto n = shape_numel(shape);
  node_->shape = std::move(shape);
  node_->data.assign(static_cast<std::size_t>(n), fill);
}

template <Real T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<detail::Node<T>>()) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <Real T>
std::int64_t Tensor<T>::dim(std::int64_t axis) const {
  const auto r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw DimensionError("axis out of range for shape " + shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(axis)];
}

template <Real T>
T Tensor<T>::item() const {
  if (node_->data.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  }
  return node_->data[0];
}

template <Real T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!node_->leaf) throw ContractError("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
  return *this;
}

template <Real T>
Tensor<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) return Tensor(node_->shape, T(0));
  return Tensor(node_->shape, node_->grad);
}

template <Real T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->data.size(), T(0));
}

template <Real T>
Tensor<T> Tensor<T>::detach() const {
  auto n = std::make_shared<detail::Node<T>>();
  n->shape = node_->shape;
  n->data = node_->data;
  return from_node(std::move(n));
}

template <Real T>
Tensor<T> Tensor<T>::clone() const {
  return detach();
}

// ---------------------------------------------------------------------------

namespace detail {
template <Real T>
Tape<T>*& active_tape_slot() {
  static thread_local Tape<T>* slot = nullptr;
  return slot;
}
}  // namespace detail

template <Real T>
Tape<T>::Tape() : previous_(detail::active_tape_slot<T>()) {
  detail::active_tape_slot<T>() = this;
}

template <Real T>
Tape<T>::~Tape() {
  if (detail::active_tape_slot<T>() == this) detail::active_tape_slot<T>() = previous_;
}

template <Real T>
Tape<T>* Tape<T>::active() noexcept {
  return detail::active_tape_slot<T>();
}

template <Real T>
void Tape<T>::record(std::function<void()> backward, std::span<const NodePtr> inputs) {
  if (consumed_) throw ContractError("recording onto a tape that already ran backward");
  ops_.push_back(std::move(backward));
  for (const auto& n : inputs) kept_.push_back(n);
}

template <Real T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw ContractError("backward called twice on the same tape");
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  if (!loss.requires_grad() || loss.is_leaf()) {
    throw ContractError("loss was not produced by a recorded op");
  }
  consumed_ = true;
  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  for (const auto& n : kept_) {
    if (n->leaf && n->requires_grad) n->grad_buffer();
  }
  ops_.clear();
  ops_.shrink_to_fit();
  kept_.clear();
  kept_.shrink_to_fit();
}

NoGrad::NoGrad()
    : saved_f_(detail::active_tape_slot<float>()), saved_d_(detail::active_tape_slot<double>()) {
  detail::active_tape_slot<float>() = nullptr;
  detail::active_tape_slot<double>() = nullptr;
}

NoGrad::~NoGrad() {
  detail::active_tape_slot<float>() = saved_f_;
  detail::active_tape_slot<double>() = saved_d_;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace scott

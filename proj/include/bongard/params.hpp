#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "bongard/types.hpp"

namespace bongard {

struct TensorSlot {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

// Named matrices packed into one contiguous buffer (column-major per slot). Optimizers,
// gradient checks and checkpoints operate on the flat buffer; models read slots as Eigen maps.
class ParamStore {
 public:
  using MatMap = Eigen::Map<Matrix>;
  using ConstMatMap = Eigen::Map<const Matrix>;

  std::size_t add(std::string name, Index rows, Index cols) {
    slots_.push_back({std::move(name), rows, cols, data_.size()});
    data_.resize(data_.size() + slots_.back().size(), 0.0);
    return slots_.size() - 1;
  }

  MatMap mat(std::size_t slot) { return mat(slot, std::span<double>(data_)); }
  ConstMatMap mat(std::size_t slot) const { return mat(slot, std::span<const double>(data_)); }

  // Same layout over an external buffer, e.g. a gradient.
  MatMap mat(std::size_t slot, std::span<double> buf) const {
    const auto& s = slots_[slot];
    return MatMap(buf.data() + s.offset, s.rows, s.cols);
  }
  ConstMatMap mat(std::size_t slot, std::span<const double> buf) const {
    const auto& s = slots_[slot];
    return ConstMatMap(buf.data() + s.offset, s.rows, s.cols);
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  const std::vector<TensorSlot>& slots() const { return slots_; }
  std::size_t size() const { return data_.size(); }
  std::vector<double> zeros_like() const { return std::vector<double>(data_.size(), 0.0); }

  bool same_layout(const ParamStore& o) const {
    if (slots_.size() != o.slots_.size()) return false;
    for (std::size_t i = 0; i < slots_.size(); ++i)
      if (slots_[i].name != o.slots_[i].name || slots_[i].rows != o.slots_[i].rows || slots_[i].cols != o.slots_[i].cols)
        return false;
    return true;
  }

  template <class Rng>
  void fill_normal(std::size_t slot, double stddev, Rng& rng) {
    std::normal_distribution<double> nd(0.0, stddev);
    auto m = mat(slot);
    for (Index c = 0; c < m.cols(); ++c)
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = nd(rng);
  }
  void fill(std::size_t slot, double v) { mat(slot).setConstant(v); }

 private:
  std::vector<TensorSlot> slots_;
  std::vector<double> data_;
};

}  // namespace bongard

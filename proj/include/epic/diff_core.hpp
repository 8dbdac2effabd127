#pragma once

// Reverse-mode substrate for the fixed feedforward architecture: a flat
// parameter vector with named segments, multilayer perceptrons with
// hand-written backward rules, and a central-difference gradient checker.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace epic::diff {

struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Flat parameter storage. Segments are appended back to back, so their
/// offsets never overlap and together cover the whole vector.
class ParamVector {
 public:
  std::size_t add_segment(std::string name, std::size_t rows, std::size_t cols);

  const std::vector<Segment>& layout() const { return layout_; }
  const Segment& segment(std::size_t index) const { return layout_.at(index); }
  const Segment& segment(const std::string& name) const;

  std::span<double> view(const Segment& s) { return {values_.data() + s.offset, s.size()}; }
  std::span<const double> view(const Segment& s) const { return {values_.data() + s.offset, s.size()}; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  /// Replace the values wholesale; length must match the layout.
  void assign(std::vector<double> values);

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<Segment> layout_;
  std::vector<double> values_;
};

/// Activations cached by one Mlp forward pass. Single use: backward consumes it.
class GradTape {
 public:
  bool ready() const { return ready_; }

 private:
  friend class Mlp;
  std::vector<std::vector<double>> inputs_;  // input seen by each affine layer
  std::vector<std::vector<double>> pre_;     // pre-activation of each affine layer
  std::vector<std::vector<double>> mask_;    // inverted-dropout scale after each hidden layer
  bool ready_ = false;
};

/// Stack of affine layers with ReLU (and optional inverted dropout) after every
/// layer except the last. Weights are stored out x in, row-major.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamVector& params, const std::string& prefix, std::vector<std::size_t> dims, double dropout);

  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t depth() const { return weight_segments_.size(); }
  double dropout() const { return dropout_; }
  const std::vector<std::size_t>& dims() const { return dims_; }

  /// `rng` null means eval mode (dropout is the identity). `tape` may be null
  /// when no backward pass follows.
  std::vector<double> forward(const ParamVector& params, std::span<const double> x, GradTape* tape,
                              std::mt19937_64* rng) const;

  /// Accumulates d(loss)/d(params) into `param_grad` and returns d(loss)/d(input).
  std::vector<double> backward(const ParamVector& params, GradTape& tape, std::span<const double> grad_out,
                               std::span<double> param_grad) const;

  /// Glorot-uniform weights, zero biases.
  void init_glorot(ParamVector& params, std::mt19937_64& rng) const;

  const Segment& weight_segment(const ParamVector& params, std::size_t layer) const {
    return params.segment(weight_segments_[layer]);
  }
  const Segment& bias_segment(const ParamVector& params, std::size_t layer) const {
    return params.segment(bias_segments_[layer]);
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::size_t> weight_segments_;
  std::vector<std::size_t> bias_segments_;
  double dropout_ = 0.0;
};

/// Scalar loss with optional analytic gradient: when `grad` is nonempty the
/// callee fills it (same length as x).
using LossFn = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|, |numeric|).
double grad_check(const LossFn& loss, std::span<const double> x, double epsilon);

}  // namespace epic::diff

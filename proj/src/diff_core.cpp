#include "epic/diff_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace epic::diff {

std::size_t ParamVector::add_segment(std::string name, std::size_t rows, std::size_t cols) {
  for (const auto& s : layout_) {
    if (s.name == name) throw std::invalid_argument("duplicate parameter segment '" + name + "'");
  }
  layout_.push_back({std::move(name), values_.size(), rows, cols});
  values_.resize(values_.size() + rows * cols, 0.0);
  return layout_.size() - 1;
}

const Segment& ParamVector::segment(const std::string& name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no parameter segment '" + name + "'");
}

void ParamVector::assign(std::vector<double> values) {
  if (values.size() != values_.size()) {
    throw std::invalid_argument("parameter count " + std::to_string(values.size()) +
                                " does not match layout size " + std::to_string(values_.size()));
  }
  values_ = std::move(values);
}

Mlp::Mlp(ParamVector& params, const std::string& prefix, std::vector<std::size_t> dims, double dropout)
    : dims_(std::move(dims)), dropout_(dropout) {
  if (dims_.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  if (dropout_ < 0.0 || dropout_ >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    if (dims_[l] == 0 || dims_[l + 1] == 0) throw std::invalid_argument("Mlp layer width must be positive");
    const std::string tag = prefix + "." + std::to_string(l);
    weight_segments_.push_back(params.add_segment(tag + ".weight", dims_[l + 1], dims_[l]));
    bias_segments_.push_back(params.add_segment(tag + ".bias", dims_[l + 1], 1));
  }
}

std::vector<double> Mlp::forward(const ParamVector& params, std::span<const double> x, GradTape* tape,
                                 std::mt19937_64* rng) const {
  if (x.size() != input_dim()) {
    throw std::invalid_argument("Mlp input has " + std::to_string(x.size()) + " features, expected " +
                                std::to_string(input_dim()));
  }
  if (tape) {
    tape->inputs_.assign(depth(), {});
    tape->pre_.assign(depth(), {});
    tape->mask_.assign(depth(), {});
    tape->ready_ = false;
  }
  std::vector<double> h(x.begin(), x.end());
  for (std::size_t l = 0; l < depth(); ++l) {
    const auto w = params.view(params.segment(weight_segments_[l]));
    const auto b = params.view(params.segment(bias_segments_[l]));
    const std::size_t in = dims_[l], out = dims_[l + 1];
    std::vector<double> z(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* wr = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) s += wr[i] * h[i];
      z[o] = s;
    }
    if (tape) {
      tape->inputs_[l] = h;
      tape->pre_[l] = z;
    }
    const bool last = l + 1 == depth();
    if (!last) {
      for (auto& v : z) v = v > 0.0 ? v : 0.0;
      if (rng && dropout_ > 0.0) {
        std::bernoulli_distribution keep(1.0 - dropout_);
        const double scale = 1.0 / (1.0 - dropout_);
        std::vector<double> mask(out);
        for (std::size_t o = 0; o < out; ++o) {
          mask[o] = keep(*rng) ? scale : 0.0;
          z[o] *= mask[o];
        }
        if (tape) tape->mask_[l] = std::move(mask);
      }
    }
    h = std::move(z);
  }
  if (tape) tape->ready_ = true;
  return h;
}

std::vector<double> Mlp::backward(const ParamVector& params, GradTape& tape, std::span<const double> grad_out,
                                  std::span<double> param_grad) const {
  if (!tape.ready_) throw std::logic_error("Mlp::backward called without a preceding forward pass");
  if (param_grad.size() != params.size()) {
    throw std::invalid_argument("gradient accumulator length does not match parameter vector");
  }
  if (grad_out.size() != output_dim()) throw std::invalid_argument("Mlp::backward: bad output gradient size");
  tape.ready_ = false;

  std::vector<double> g(grad_out.begin(), grad_out.end());
  for (std::size_t l = depth(); l-- > 0;) {
    const bool last = l + 1 == depth();
    const std::size_t in = dims_[l], out = dims_[l + 1];
    if (!last) {
      const auto& mask = tape.mask_[l];
      for (std::size_t o = 0; o < out; ++o) {
        if (!mask.empty()) g[o] *= mask[o];
        if (!(tape.pre_[l][o] > 0.0)) g[o] = 0.0;
      }
    }
    const Segment& ws = params.segment(weight_segments_[l]);
    const Segment& bs = params.segment(bias_segments_[l]);
    const auto w = params.view(ws);
    const auto& input = tape.inputs_[l];
    double* gw = param_grad.data() + ws.offset;
    double* gb = param_grad.data() + bs.offset;
    std::vector<double> g_in(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double go = g[o];
      if (go == 0.0) continue;
      gb[o] += go;
      const double* wr = w.data() + o * in;
      double* gwr = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gwr[i] += go * input[i];
        g_in[i] += go * wr[i];
      }
    }
    g = std::move(g_in);
  }
  return g;
}

void Mlp::init_glorot(ParamVector& params, std::mt19937_64& rng) const {
  for (std::size_t l = 0; l < depth(); ++l) {
    const double a = std::sqrt(6.0 / static_cast<double>(dims_[l] + dims_[l + 1]));
    std::uniform_real_distribution<double> dist(-a, a);
    for (auto& v : params.view(params.segment(weight_segments_[l]))) v = dist(rng);
    for (auto& v : params.view(params.segment(bias_segments_[l]))) v = 0.0;
  }
}

double grad_check(const LossFn& loss, std::span<const double> x, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw std::invalid_argument("grad_check: epsilon must be in (0, 1e-2]");
  std::vector<double> analytic(x.size(), 0.0);
  const double base = loss(x, analytic);
  if (!std::isfinite(base)) throw std::runtime_error("grad_check: loss is not finite at the base point");

  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + epsilon;
    const double up = loss(probe, {});
    probe[i] = orig - epsilon;
    const double down = loss(probe, {});
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      std::ostringstream msg;
      msg << "grad_check: non-finite loss while probing coordinate " << i;
      throw std::runtime_error(msg.str());
    }
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace epic::diff

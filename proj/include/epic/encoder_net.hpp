#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "epic/diff_core.hpp"
#include "epic/matrix.hpp"

namespace epic::net {

struct EncoderConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t waist_dim = 16;
  std::size_t n_parts = 16;
  std::vector<std::size_t> head_dims{128, 64};
  double dropout = 0.0;
  bool encoder_dropout = false;  // dropout inside the tile encoder as well as the head
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Tile encoder (features -> waist embedding) followed by a risk head
/// (k concatenated parts -> scalar risk), sharing one flat parameter vector.
class EpicNet {
 public:
  explicit EpicNet(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  const diff::Mlp& encoder() const { return encoder_; }
  const diff::Mlp& head() const { return head_; }

  /// Zero-valued parameters with this network's layout.
  diff::ParamVector blank_params() const { return prototype_; }
  /// Seeded Glorot-uniform initialization.
  diff::ParamVector init_params() const;
  /// Throws unless `params` has this network's layout.
  void check_params(const diff::ParamVector& params) const;

  /// Row-wise encoding. `rng` null is eval mode; otherwise encoder dropout
  /// applies when enabled in the config.
  Matrix encode_tiles(const Matrix& tiles, const diff::ParamVector& params, std::mt19937_64* rng) const;

  std::vector<double> encode_tile(std::span<const double> tile, const diff::ParamVector& params,
                                  diff::GradTape* tape, std::mt19937_64* rng) const;

  /// Flattens the k x waist part matrix and runs the head. Empty parts must be
  /// zero rows.
  double risk_head(const Matrix& parts, const std::vector<bool>& empty_mask, const diff::ParamVector& params,
                   diff::GradTape* tape, std::mt19937_64* rng) const;

  /// Backward through the head for d(loss)/d(risk) = `grad_risk`; returns
  /// d(loss)/d(parts) as a k x waist matrix.
  Matrix risk_head_backward(const diff::ParamVector& params, diff::GradTape& tape, double grad_risk,
                            std::span<double> param_grad) const;

  std::vector<double> encode_tile_backward(const diff::ParamVector& params, diff::GradTape& tape,
                                           std::span<const double> grad_embedding,
                                           std::span<double> param_grad) const;

 private:
  EncoderConfig config_;
  diff::ParamVector prototype_;
  diff::Mlp encoder_;
  diff::Mlp head_;
};

}  // namespace epic::net

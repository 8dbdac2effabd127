#include "epic/encoder_net.hpp"

#include <stdexcept>
#include <string>

namespace epic::net {

void EncoderConfig::validate() const {
  if (input_dim == 0) throw std::invalid_argument("input_dim must be >= 1");
  if (waist_dim == 0) throw std::invalid_argument("waist_dim must be >= 1");
  if (n_parts == 0) throw std::invalid_argument("n_parts must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
  for (auto d : hidden_dims) {
    if (d == 0) throw std::invalid_argument("hidden_dims entries must be >= 1");
  }
  for (auto d : head_dims) {
    if (d == 0) throw std::invalid_argument("head_dims entries must be >= 1");
  }
}

namespace {
std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}
}  // namespace

EpicNet::EpicNet(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  encoder_ = diff::Mlp(prototype_, "encoder", chain(config_.input_dim, config_.hidden_dims, config_.waist_dim),
                       config_.encoder_dropout ? config_.dropout : 0.0);
  head_ = diff::Mlp(prototype_, "head", chain(config_.n_parts * config_.waist_dim, config_.head_dims, 1),
                    config_.dropout);
}

diff::ParamVector EpicNet::init_params() const {
  diff::ParamVector params = prototype_;
  std::mt19937_64 rng(config_.seed);
  encoder_.init_glorot(params, rng);
  head_.init_glorot(params, rng);
  return params;
}

void EpicNet::check_params(const diff::ParamVector& params) const {
  if (params.layout() != prototype_.layout()) {
    throw std::invalid_argument("parameter layout does not match the network architecture");
  }
}

std::vector<double> EpicNet::encode_tile(std::span<const double> tile, const diff::ParamVector& params,
                                         diff::GradTape* tape, std::mt19937_64* rng) const {
  return encoder_.forward(params, tile, tape, rng);
}

Matrix EpicNet::encode_tiles(const Matrix& tiles, const diff::ParamVector& params, std::mt19937_64* rng) const {
  if (!tiles.empty() && tiles.cols() != config_.input_dim) {
    throw std::invalid_argument("tile rows have " + std::to_string(tiles.cols()) + " features, encoder expects " +
                                std::to_string(config_.input_dim));
  }
  Matrix out(tiles.rows(), config_.waist_dim);
  for (std::size_t i = 0; i < tiles.rows(); ++i) {
    const auto z = encoder_.forward(params, tiles.row(i), nullptr, rng);
    std::copy(z.begin(), z.end(), out.row(i).begin());
  }
  return out;
}

double EpicNet::risk_head(const Matrix& parts, const std::vector<bool>& empty_mask, const diff::ParamVector& params,
                          diff::GradTape* tape, std::mt19937_64* rng) const {
  if (parts.rows() != config_.n_parts || parts.cols() != config_.waist_dim) {
    throw std::invalid_argument("part matrix is " + std::to_string(parts.rows()) + "x" +
                                std::to_string(parts.cols()) + ", head expects " + std::to_string(config_.n_parts) +
                                "x" + std::to_string(config_.waist_dim));
  }
  if (empty_mask.size() != config_.n_parts) throw std::invalid_argument("empty mask length must equal n_parts");
  for (std::size_t j = 0; j < parts.rows(); ++j) {
    if (!empty_mask[j]) continue;
    for (double v : parts.row(j)) {
      if (v != 0.0) throw std::invalid_argument("empty part " + std::to_string(j) + " has a nonzero row");
    }
  }
  return head_.forward(params, parts.data(), tape, rng).front();
}

Matrix EpicNet::risk_head_backward(const diff::ParamVector& params, diff::GradTape& tape, double grad_risk,
                                   std::span<double> param_grad) const {
  const double g[1] = {grad_risk};
  auto flat = head_.backward(params, tape, g, param_grad);
  Matrix out(config_.n_parts, config_.waist_dim);
  out.data() = std::move(flat);
  return out;
}

std::vector<double> EpicNet::encode_tile_backward(const diff::ParamVector& params, diff::GradTape& tape,
                                                  std::span<const double> grad_embedding,
                                                  std::span<double> param_grad) const {
  return encoder_.backward(params, tape, grad_embedding, param_grad);
}

}  // namespace epic::net

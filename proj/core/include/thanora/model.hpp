// SPDX-License-Identifier: Apache-2.0
//
// A stack of adapted linear layers with an optional tanh between them (never
// after the last layer). Gradients flow only into adapter factors.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "thanora/hasi.hpp"
#include "thanora/linalg.hpp"
#include "thanora/spr.hpp"

namespace thanora {

enum class Nonlinearity { none, tanh };

std::string_view to_string(Nonlinearity n);
Nonlinearity nonlinearity_from_string(std::string_view name);

enum class BaseInit { orthogonal, gaussian };

std::string_view to_string(BaseInit b);
BaseInit base_init_from_string(std::string_view name);

struct ModelSnapshot {
  std::vector<AdaptedLayer> layers;
  Nonlinearity nonlinearity = Nonlinearity::none;

  /// (d_0, d_1, …, d_L)
  std::vector<std::size_t> dims() const;
  /// Dense effective weights base_w + ΔW, one per layer.
  std::vector<DenseMatrix> merged_weights() const;
  void validate() const;
};

/// Adapter with no blocks, for layers that carry only a base weight.
BlockAdapter empty_adapter(std::size_t d_out, std::size_t d_in, std::size_t layer_id);

/// Frozen weights wrapped in empty adapters.
ModelSnapshot model_from_weights(std::vector<DenseMatrix> weights, Nonlinearity nonlinearity);

/// Random "pretrained" weights for dims (d_0, …, d_L). Orthogonal layers use
/// the leading block of a Haar draw; gaussian layers have N(0, 1/d_in) entries.
std::vector<DenseMatrix> random_base_weights(std::span<const std::size_t> dims, BaseInit init,
                                             std::uint64_t seed);

struct ForwardTrace {
  std::vector<DenseMatrix> inputs;          // h_ℓ, input to layer ℓ
  std::vector<DenseMatrix> pre_activations; // z_ℓ = W_ℓ h_ℓ + B(A h_ℓ)
  DenseMatrix output;
};

/// Factored forward pass; the dense update is never formed.
ForwardTrace forward(const ModelSnapshot& model, const DenseMatrix& x);

/// Forward pass through plain dense weights.
DenseMatrix forward_dense(std::span<const DenseMatrix> weights, Nonlinearity nonlinearity,
                          const DenseMatrix& x);

/// (1/N) Σ_n ‖prediction_n − target_n‖², 0 for an empty batch.
double mse(const DenseMatrix& prediction, const DenseMatrix& target);

struct ModelGradient {
  std::vector<AdapterGradient> layers;
  double task_loss = 0.0;
  std::vector<double> spr_per_layer;
  double total_loss = 0.0;
};

/// Exact gradient of mse(output, targets) + lambda · Σ_ℓ spr_ℓ with respect
/// to every adapter factor. The SPR terms are skipped entirely when
/// lambda == 0.
ModelGradient backward(const ModelSnapshot& model, const ForwardTrace& trace,
                       const DenseMatrix& targets, double lambda);

/// factor -= lr · grad for every adapter factor. Base weights are untouched.
void sgd_step(ModelSnapshot& model, const ModelGradient& grads, double lr);

}  // namespace thanora

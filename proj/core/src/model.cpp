// SPDX-License-Identifier: Apache-2.0
#include "thanora/model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "thanora/error.hpp"

namespace thanora {

namespace {

void apply_tanh(DenseMatrix& m) {
  for (double& x : m.data()) x = std::tanh(x);
}

void step_factor(DenseMatrix& param, const DenseMatrix& grad, double lr) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw DimensionError("sgd_step: gradient shape mismatch");
  }
  auto p = param.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
  for (double x : p) {
    if (!std::isfinite(x)) throw NumericError("sgd_step: parameters diverged");
  }
}

}  // namespace

std::string_view to_string(Nonlinearity n) { return n == Nonlinearity::tanh ? "tanh" : "none"; }

Nonlinearity nonlinearity_from_string(std::string_view name) {
  if (name == "none") return Nonlinearity::none;
  if (name == "tanh") return Nonlinearity::tanh;
  throw ConfigError(fmt::format("unknown nonlinearity '{}'", name));
}

std::string_view to_string(BaseInit b) {
  return b == BaseInit::orthogonal ? "orthogonal" : "gaussian";
}

BaseInit base_init_from_string(std::string_view name) {
  if (name == "orthogonal") return BaseInit::orthogonal;
  if (name == "gaussian") return BaseInit::gaussian;
  throw ConfigError(fmt::format("unknown base_init '{}'", name));
}

std::vector<std::size_t> ModelSnapshot::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().base_w.cols());
  for (const auto& l : layers) d.push_back(l.base_w.rows());
  return d;
}

std::vector<DenseMatrix> ModelSnapshot::merged_weights() const {
  std::vector<DenseMatrix> w;
  w.reserve(layers.size());
  for (const auto& l : layers) w.push_back(merge(l));
  return w;
}

void ModelSnapshot::validate() const {
  if (layers.empty()) throw DimensionError("model: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.base_w.rows() != l.adapter.d_out || l.base_w.cols() != l.adapter.d_in) {
      throw DimensionError(fmt::format("model: layer {} adapter does not match its weight", i));
    }
    if (i > 0 && l.base_w.cols() != layers[i - 1].base_w.rows()) {
      throw DimensionError(fmt::format("model: layer {} input width does not chain", i));
    }
    l.adapter.validate();
  }
}

BlockAdapter empty_adapter(std::size_t d_out, std::size_t d_in, std::size_t layer_id) {
  BlockAdapter adp;
  adp.layer_id = layer_id;
  adp.d_out = d_out;
  adp.d_in = d_in;
  adp.coop_b = DenseMatrix(d_out, 0);
  adp.coop_a = DenseMatrix(0, d_in);
  adp.rebuild_layout();
  return adp;
}

ModelSnapshot model_from_weights(std::vector<DenseMatrix> weights, Nonlinearity nonlinearity) {
  ModelSnapshot model;
  model.nonlinearity = nonlinearity;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const std::size_t r = weights[i].rows();
    const std::size_t c = weights[i].cols();
    model.layers.push_back(
        {std::move(weights[i]), empty_adapter(r, c, i), CompensationMode::injective});
  }
  model.validate();
  return model;
}

std::vector<DenseMatrix> random_base_weights(std::span<const std::size_t> dims, BaseInit init,
                                             std::uint64_t seed) {
  if (dims.size() < 2) throw DimensionError("random_base_weights: need at least two dims");
  Rng rng(seed);
  std::vector<DenseMatrix> weights;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t d_in = dims[l];
    const std::size_t d_out = dims[l + 1];
    if (init == BaseInit::orthogonal) {
      const DenseMatrix q = random_orthogonal(rng, std::max(d_in, d_out));
      weights.push_back(slice_cols(slice_rows(q, 0, d_out), 0, d_in));
    } else {
      weights.push_back(gaussian_matrix(rng, d_out, d_in, 1.0 / std::sqrt(double(d_in))));
    }
  }
  return weights;
}

ForwardTrace forward(const ModelSnapshot& model, const DenseMatrix& x) {
  const auto dims = model.dims();
  if (dims.empty() || x.rows() != dims.front()) {
    throw DimensionError(fmt::format("forward: input has {} rows, model expects {}", x.rows(),
                                     dims.empty() ? 0 : dims.front()));
  }
  ForwardTrace trace;
  DenseMatrix h = x;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    DenseMatrix z = matmul(layer.base_w, h);
    z += apply_adapter(layer.adapter, h);
    trace.inputs.push_back(std::move(h));
    h = z;
    if (model.nonlinearity == Nonlinearity::tanh && l + 1 < model.layers.size()) apply_tanh(h);
    trace.pre_activations.push_back(std::move(z));
  }
  trace.output = std::move(h);
  return trace;
}

DenseMatrix forward_dense(std::span<const DenseMatrix> weights, Nonlinearity nonlinearity,
                          const DenseMatrix& x) {
  DenseMatrix h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = matmul(weights[l], h);
    if (nonlinearity == Nonlinearity::tanh && l + 1 < weights.size()) apply_tanh(h);
  }
  return h;
}

double mse(const DenseMatrix& prediction, const DenseMatrix& target) {
  if (prediction.rows() != target.rows() || prediction.cols() != target.cols()) {
    throw DimensionError("mse: prediction and target shapes differ");
  }
  if (prediction.cols() == 0) return 0.0;
  double s = 0.0;
  auto p = prediction.data();
  auto t = target.data();
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return s / static_cast<double>(prediction.cols());
}

ModelGradient backward(const ModelSnapshot& model, const ForwardTrace& trace,
                       const DenseMatrix& targets, double lambda) {
  const std::size_t n_layers = model.layers.size();
  const std::size_t n = targets.cols();
  if (trace.inputs.size() != n_layers) throw DimensionError("backward: trace does not match model");

  ModelGradient out;
  out.task_loss = mse(trace.output, targets);
  out.layers.reserve(n_layers);
  for (const auto& l : model.layers) out.layers.push_back(AdapterGradient::zeros_like(l.adapter));

  if (n > 0) {
    DenseMatrix dz = (2.0 / static_cast<double>(n)) * (trace.output - targets);
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = model.layers[l];
      const auto& adp = layer.adapter;
      const DenseMatrix& h = trace.inputs[l];
      auto& g = out.layers[l];

      DenseMatrix dh = l > 0 ? matmul_tn(layer.base_w, dz) : DenseMatrix();
      auto block_grad = [&](const DenseMatrix& b, const DenseMatrix& a, FactorPair& gp) {
        if (b.cols() == 0) return;
        const DenseMatrix u = matmul(a, h);       // r x N
        const DenseMatrix du = matmul_tn(b, dz);  // r x N
        gp.b = matmul_nt(dz, u);
        gp.a = matmul_nt(du, h);
        if (l > 0) dh += matmul_tn(a, du);
      };
      for (std::size_t t = 0; t < adp.task_blocks.size(); ++t) {
        block_grad(adp.task_blocks[t].b, adp.task_blocks[t].a, g.task_blocks[t]);
      }
      block_grad(adp.coop_b, adp.coop_a, g.coop);

      if (l > 0) {
        if (model.nonlinearity == Nonlinearity::tanh) {
          const DenseMatrix& z = trace.pre_activations[l - 1];
          auto d = dh.data();
          auto zz = z.data();
          for (std::size_t i = 0; i < d.size(); ++i) {
            const double th = std::tanh(zz[i]);
            d[i] *= 1.0 - th * th;
          }
        }
        dz = std::move(dh);
      }
    }
  }

  out.spr_per_layer.assign(n_layers, 0.0);
  if (lambda != 0.0) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& adp = model.layers[l].adapter;
      out.spr_per_layer[l] = spr_loss(adp);
      out.layers[l].add_scaled(spr_grad(adp), lambda);
    }
  }
  out.total_loss = total_loss(out.task_loss, out.spr_per_layer, lambda);
  return out;
}

void sgd_step(ModelSnapshot& model, const ModelGradient& grads, double lr) {
  if (grads.layers.size() != model.layers.size()) {
    throw DimensionError("sgd_step: gradient has the wrong number of layers");
  }
  if (lr == 0.0) return;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& adp = model.layers[l].adapter;
    const auto& g = grads.layers[l];
    if (g.task_blocks.size() != adp.task_blocks.size()) {
      throw DimensionError("sgd_step: gradient block count mismatch");
    }
    for (std::size_t t = 0; t < adp.task_blocks.size(); ++t) {
      step_factor(adp.task_blocks[t].b, g.task_blocks[t].b, lr);
      step_factor(adp.task_blocks[t].a, g.task_blocks[t].a, lr);
    }
    step_factor(adp.coop_b, g.coop.b, lr);
    step_factor(adp.coop_a, g.coop.a, lr);
  }
}

}  // namespace thanora

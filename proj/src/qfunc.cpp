#include "pevdn/qfunc.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace pevdn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

int QParams::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int QParams::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

Eigen::Index QParams::param_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Eigen::VectorXd QParams::flatten() const {
  Eigen::VectorXd flat(param_count());
  Eigen::Index offset = 0;
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      flat.segment(offset, l.weight.cols()) = l.weight.row(r);
      offset += l.weight.cols();
    }
    flat.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return flat;
}

void QParams::set_from_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != param_count()) {
    throw std::invalid_argument("QParams::set_from_flat: length mismatch");
  }
  Eigen::Index offset = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      l.weight.row(r) = flat.segment(offset, l.weight.cols());
      offset += l.weight.cols();
    }
    l.bias = flat.segment(offset, l.bias.size());
    offset += l.bias.size();
  }
}

QParams init_qparams(int input_dim, const std::vector<int>& hidden_dims, int n_actions, Rng& rng) {
  if (input_dim < 1 || n_actions < 1) {
    throw std::invalid_argument("init_qparams: dimensions must be positive");
  }
  std::vector<int> dims;
  dims.push_back(input_dim);
  for (int h : hidden_dims) {
    if (h < 1) throw std::invalid_argument("init_qparams: hidden width must be positive");
    dims.push_back(h);
  }
  dims.push_back(n_actions);

  QParams params;
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        w(r, c) = (2.0 * rng.next_double() - 1.0) * limit;
      }
    }
    params.layers.push_back({std::move(w), Eigen::VectorXd::Zero(fan_out)});
  }
  return params;
}

Eigen::VectorXd q_forward(const QParams& params, std::span<const double> input) {
  if (static_cast<int>(input.size()) != params.input_dim()) {
    throw std::invalid_argument("q_forward: input width mismatch");
  }
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (size_t l = 0; l < params.layers.size(); ++l) {
    x = (params.layers[l].weight * x + params.layers[l].bias).eval();
    if (l + 1 < params.layers.size()) x = x.cwiseMax(0.0);
  }
  return x;
}

Eigen::VectorXd q_grad(const QParams& params, std::span<const double> input, int action) {
  if (action < 0 || action >= params.output_dim()) {
    throw std::invalid_argument("q_grad: action out of range");
  }
  if (static_cast<int>(input.size()) != params.input_dim()) {
    throw std::invalid_argument("q_grad: input width mismatch");
  }
  const size_t n_layers = params.layers.size();
  std::vector<Eigen::VectorXd> acts(n_layers + 1);
  acts[0] = Eigen::Map<const Eigen::VectorXd>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (size_t l = 0; l < n_layers; ++l) {
    acts[l + 1] = params.layers[l].weight * acts[l] + params.layers[l].bias;
    if (l + 1 < n_layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
  }

  Eigen::VectorXd grad(params.param_count());
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(params.output_dim());
  delta(action) = 1.0;

  Eigen::Index offset = grad.size();
  for (size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    offset -= layer.bias.size();
    grad.segment(offset, layer.bias.size()) = delta;
    offset -= layer.weight.size();
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      grad.segment(offset + r * layer.weight.cols(), layer.weight.cols()) =
          delta(r) * acts[l].transpose();
    }
    if (l > 0) {
      delta = layer.weight.transpose() * delta;
      // ReLU gate: activations retained post-activation, so > 0 marks the
      // pass-through units.
      delta = (acts[l].array() > 0.0).select(delta, 0.0);
    }
  }
  return grad;
}

int select_action(const QParams& params, std::span<const double> input, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) {
    throw std::invalid_argument("select_action: epsilon outside [0, 1]");
  }
  const int n_actions = params.output_dim();
  if (epsilon > 0.0 && rng.next_double() < epsilon) {
    return static_cast<int>(rng.uniform_below(static_cast<uint64_t>(n_actions)));
  }
  const Eigen::VectorXd q = q_forward(params, input);
  int best = 0;
  for (int a = 1; a < n_actions; ++a) {
    if (q(a) > q(best)) best = a;
  }
  return best;
}

QParams copy_target(const QParams& params) { return params; }

void save_checkpoint(const QParams& params, std::ostream& out) {
  const auto put_u32 = [&out](uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  };
  put_u32(static_cast<uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    put_u32(static_cast<uint32_t>(l.weight.cols()));
    put_u32(static_cast<uint32_t>(l.weight.rows()));
  }
  const Eigen::VectorXd flat = params.flatten();
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(sizeof(double)) * flat.size());
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

void save_checkpoint(const QParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  save_checkpoint(params, out);
}

QParams load_checkpoint(std::istream& in) {
  const auto get_u32 = [&in]() {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
  };
  const uint32_t n_layers = get_u32();
  if (!in || n_layers == 0 || n_layers > 64) {
    throw std::runtime_error("load_checkpoint: bad layer count");
  }
  QParams params;
  for (uint32_t l = 0; l < n_layers; ++l) {
    const uint32_t in_dim = get_u32();
    const uint32_t out_dim = get_u32();
    if (!in || in_dim == 0 || out_dim == 0) {
      throw std::runtime_error("load_checkpoint: bad layer dims");
    }
    params.layers.push_back(
        {Eigen::MatrixXd::Zero(out_dim, in_dim), Eigen::VectorXd::Zero(out_dim)});
  }
  Eigen::VectorXd flat(params.param_count());
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(sizeof(double)) * flat.size());
  if (!in) throw std::runtime_error("load_checkpoint: truncated parameter payload");
  params.set_from_flat(flat);
  return params;
}

QParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  return load_checkpoint(in);
}

Eigen::MatrixXd q_forward_batch(const QParams& params, const Eigen::MatrixXd& inputs,
                                BatchCache* cache) {
  if (static_cast<int>(inputs.cols()) != params.input_dim()) {
    throw std::invalid_argument("q_forward_batch: input width mismatch");
  }
  if (cache != nullptr) {
    cache->activations.clear();
    cache->activations.reserve(params.layers.size());
  }
  Eigen::MatrixXd x = inputs;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    if (cache != nullptr) cache->activations.push_back(x);
    x = (x * params.layers[l].weight.transpose()).rowwise() + params.layers[l].bias.transpose();
    if (l + 1 < params.layers.size()) x = x.cwiseMax(0.0);
  }
  return x;
}

Eigen::VectorXd q_backward_weighted(const QParams& params, const BatchCache& cache,
                                    std::span<const int> actions, std::span<const double> weights,
                                    Eigen::Index row_begin) {
  if (cache.activations.size() != params.layers.size()) {
    throw std::invalid_argument("q_backward_weighted: cache does not match network");
  }
  if (actions.size() != weights.size()) {
    throw std::invalid_argument("q_backward_weighted: actions/weights size mismatch");
  }
  const auto batch = static_cast<Eigen::Index>(actions.size());
  if (row_begin < 0 || row_begin + batch > cache.activations.front().rows()) {
    throw std::invalid_argument("q_backward_weighted: row range outside cache");
  }
  const size_t n_layers = params.layers.size();

  Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(batch, params.output_dim());
  for (Eigen::Index t = 0; t < batch; ++t) {
    const int a = actions[static_cast<size_t>(t)];
    if (a < 0 || a >= params.output_dim()) {
      throw std::invalid_argument("q_backward_weighted: action out of range");
    }
    delta(t, a) = weights[static_cast<size_t>(t)];
  }

  Eigen::VectorXd grad(params.param_count());
  Eigen::Index offset = grad.size();
  for (size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto acts = cache.activations[l].middleRows(row_begin, batch);
    offset -= layer.bias.size();
    grad.segment(offset, layer.bias.size()) = delta.colwise().sum();
    offset -= layer.weight.size();
    const Eigen::MatrixXd gw = delta.transpose() * acts;  // out x in
    for (Eigen::Index r = 0; r < gw.rows(); ++r) {
      grad.segment(offset + r * gw.cols(), gw.cols()) = gw.row(r);
    }
    if (l > 0) {
      delta = (delta * layer.weight).eval();
      delta = (acts.array() > 0.0).select(delta, 0.0);
    }
  }
  return grad;
}

}  // namespace pevdn

#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pevdn/rng.hpp"

namespace pevdn {

// Per-agent action-value network: a fully connected stack with ReLU hidden
// activations and a linear head of width n_actions. All math runs in 64-bit
// floating point so the decentralization-equivalence checks stay tight.
struct QParams {
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
  };

  std::vector<Layer> layers;

  int input_dim() const;
  int output_dim() const;
  Eigen::Index param_count() const;

  // Canonical flat layout: per layer, weights row-major then bias.
  Eigen::VectorXd flatten() const;
  void set_from_flat(const Eigen::VectorXd& flat);
};

// Target parameters are a frozen deep copy of the live ones.
using TargetParams = QParams;

// Scaled-uniform fan-in initializer: weights ~ U(-1/sqrt(fan_in),
// 1/sqrt(fan_in)) drawn row-major in layer order, biases zero.
QParams init_qparams(int input_dim, const std::vector<int>& hidden_dims, int n_actions, Rng& rng);

Eigen::VectorXd q_forward(const QParams& params, std::span<const double> input);

// Exact reverse-mode gradient of the scalar Q(input, action) w.r.t. all
// parameters, in flatten() layout.
Eigen::VectorXd q_grad(const QParams& params, std::span<const double> input, int action);

// Epsilon-greedy with lowest-index tie-breaking. epsilon == 0 draws nothing
// from the RNG.
int select_action(const QParams& params, std::span<const double> input, double epsilon, Rng& rng);

QParams copy_target(const QParams& params);

// Checkpoint: shape header (u32 layer count, then u32 in/out per layer)
// followed by the flat parameter vector as 64-bit little-endian reals.
void save_checkpoint(const QParams& params, std::ostream& out);
void save_checkpoint(const QParams& params, const std::string& path);
QParams load_checkpoint(std::istream& in);
QParams load_checkpoint(const std::string& path);

// Batched forward over one row per sample. When a cache is supplied the
// post-activation values are retained for the backward pass.
struct BatchCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[l] = input to layer l
};

Eigen::MatrixXd q_forward_batch(const QParams& params, const Eigen::MatrixXd& inputs,
                                BatchCache* cache = nullptr);

// sum_t weights[t] * d Q(inputs.row(t), actions[t]) / d theta, accumulated
// with one matrix product per layer. The flat layout matches flatten().
// actions and weights are indexed relative to row_begin, so a contiguous
// row range of a cached batch (one episode, say) can be backpropagated on
// its own.
Eigen::VectorXd q_backward_weighted(const QParams& params, const BatchCache& cache,
                                    std::span<const int> actions, std::span<const double> weights,
                                    Eigen::Index row_begin = 0);

}  // namespace pevdn

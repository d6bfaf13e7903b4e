#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "pevdn/env.hpp"
#include "pevdn/qfunc.hpp"

namespace pevdn {

// m_i = gamma * max_a' Q_i(tau', a'; theta_i^-) - Q_i(tau, a_i; theta_i).
// Terminal transitions take a zero bootstrap, the standard episodic
// treatment; single-step tasks would otherwise regress on a self-referential
// target.
double compute_m(const QParams& live, const TargetParams& target, const Transition& t,
                 double gamma);

// A = r + sum_i m_i, accumulated in ascending agent order. Every site that
// assembles the coupling term goes through this function so the
// centralized and decentralized paths evaluate the identical
// floating-point expression.
double term_a(double reward, std::span<const double> m_values);

inline double vdn_loss(double term_a_value) { return term_a_value * term_a_value; }

// Per-transition gradient of the squared loss w.r.t. one agent's
// parameters: -2 * A * B, with B the local network gradient.
Eigen::VectorXd local_gradient(double term_a_value, const Eigen::VectorXd& grad_b);

// Minibatch of episode indices into the (index-aligned) replay buffers.
using Minibatch = std::vector<size_t>;

// One agent's minibatch flattened in canonical order: episodes in index
// order, transitions in episode order. Shared by every update path.
struct EntryBatch {
  Eigen::MatrixXd taus;       // one row per transition
  Eigen::MatrixXd tau_nexts;  // rows aligned with taus
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<uint8_t> terminal;
  std::vector<Eigen::Index> episode_begin;  // per sampled episode, offset of its first row
  std::vector<Eigen::Index> episode_length;

  Eigen::Index n_entries() const { return static_cast<Eigen::Index>(actions.size()); }
  size_t n_episodes() const { return episode_begin.size(); }
};

EntryBatch collect_entries(const ReplayBuffer& buffer, std::span<const size_t> minibatch);

// Per-entry m values for one agent, batched; identical numerics to
// compute_m applied entry by entry.
std::vector<double> compute_m_batch(const QParams& live, const TargetParams& target,
                                    const EntryBatch& batch, double gamma,
                                    const BatchCache* forward_cache = nullptr);

// Forward pass over batch.taus kept for the gradient step.
BatchCache make_forward_cache(const QParams& live, const EntryBatch& batch);

struct SgdConfig {
  double learning_rate = 0.0;
  double momentum = 0.0;
  double weight_decay = 0.0;
};

// SGD with optional momentum and decoupled-from-nothing weight decay:
// g <- g + wd * theta; v <- mu * v + g; theta <- theta - lr * v.
class SgdOptimizer {
 public:
  void step(QParams& params, const Eigen::VectorXd& grad, const SgdConfig& cfg);

 private:
  Eigen::VectorXd velocity_;
};

struct UpdateStats {
  double loss_sum = 0.0;
  long n_entries = 0;
};

// Vanilla VDN reference update: summed per-transition gradients over all
// transitions of the sampled episodes, plain SGD, single-threaded, canonical
// order. PE-VDN A is tested for elementwise equality against this path.
UpdateStats centralized_vdn_update(std::vector<QParams>& params,
                                   const std::vector<TargetParams>& targets,
                                   const std::vector<ReplayBuffer>& buffers,
                                   std::span<const size_t> minibatch, double learning_rate,
                                   double gamma);

// Independent Q-learning update for one agent on its local transitions,
// with the team reward standing in as its own.
UpdateStats iql_update(QParams& params, const TargetParams& target, const ReplayBuffer& buffer,
                       std::span<const size_t> minibatch, double learning_rate, double gamma);

// Shared gradient core: theta -= lr * sum_t (-2 * A_t) * dQ(tau_t, a_t)/dtheta.
// A forward cache computed against the current parameters may be supplied
// to avoid a second pass.
UpdateStats apply_sum_gradient_update(QParams& params, const EntryBatch& batch,
                                      std::span<const double> term_a_values, double learning_rate,
                                      const BatchCache* cache = nullptr);

}  // namespace pevdn

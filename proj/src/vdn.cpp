#include "pevdn/vdn.hpp"

#include <stdexcept>
#include <string>

namespace pevdn {

double compute_m(const QParams& live, const TargetParams& target, const Transition& t,
                 double gamma) {
  const double q_taken = q_forward(live, t.tau)(t.action);
  if (t.terminal) return -q_taken;
  const double max_next = q_forward(target, t.tau_next).maxCoeff();
  return gamma * max_next - q_taken;
}

double term_a(double reward, std::span<const double> m_values) {
  double a = reward;
  for (const double m : m_values) a += m;
  return a;
}

Eigen::VectorXd local_gradient(double term_a_value, const Eigen::VectorXd& grad_b) {
  return -2.0 * term_a_value * grad_b;
}

EntryBatch collect_entries(const ReplayBuffer& buffer, std::span<const size_t> minibatch) {
  EntryBatch batch;
  Eigen::Index total = 0;
  for (const size_t idx : minibatch) {
    if (idx >= buffer.size()) {
      throw std::out_of_range("collect_entries: episode index " + std::to_string(idx) +
                              " outside buffer of size " + std::to_string(buffer.size()));
    }
    total += static_cast<Eigen::Index>(buffer[idx].transitions.size());
  }
  if (total == 0) return batch;

  const auto width = static_cast<Eigen::Index>(buffer[minibatch[0]].transitions[0].tau.size());
  batch.taus.resize(total, width);
  batch.tau_nexts.resize(total, width);
  batch.actions.reserve(static_cast<size_t>(total));
  batch.rewards.reserve(static_cast<size_t>(total));
  batch.terminal.reserve(static_cast<size_t>(total));

  Eigen::Index row = 0;
  for (const size_t idx : minibatch) {
    const auto& transitions = buffer[idx].transitions;
    batch.episode_begin.push_back(row);
    batch.episode_length.push_back(static_cast<Eigen::Index>(transitions.size()));
    for (const Transition& t : transitions) {
      batch.taus.row(row) = Eigen::Map<const Eigen::RowVectorXd>(t.tau.data(), width);
      batch.tau_nexts.row(row) = Eigen::Map<const Eigen::RowVectorXd>(t.tau_next.data(), width);
      batch.actions.push_back(t.action);
      batch.rewards.push_back(t.reward);
      batch.terminal.push_back(t.terminal ? 1 : 0);
      ++row;
    }
  }
  return batch;
}

BatchCache make_forward_cache(const QParams& live, const EntryBatch& batch) {
  BatchCache cache;
  if (batch.n_entries() > 0) q_forward_batch(live, batch.taus, &cache);
  return cache;
}

std::vector<double> compute_m_batch(const QParams& live, const TargetParams& target,
                                    const EntryBatch& batch, double gamma,
                                    const BatchCache* forward_cache) {
  const Eigen::Index n = batch.n_entries();
  std::vector<double> m(static_cast<size_t>(n));
  if (n == 0) return m;

  Eigen::MatrixXd q_live;
  if (forward_cache != nullptr && !forward_cache->activations.empty()) {
    // Recompute the head from the cached last activation; cheaper than a
    // full pass and numerically identical to q_forward_batch.
    const auto& last = forward_cache->activations.back();
    q_live = (last * live.layers.back().weight.transpose()).rowwise() +
             live.layers.back().bias.transpose();
  } else {
    q_live = q_forward_batch(live, batch.taus);
  }
  const Eigen::MatrixXd q_next = q_forward_batch(target, batch.tau_nexts);

  for (Eigen::Index t = 0; t < n; ++t) {
    const double q_taken = q_live(t, batch.actions[static_cast<size_t>(t)]);
    if (batch.terminal[static_cast<size_t>(t)] != 0) {
      m[static_cast<size_t>(t)] = -q_taken;
    } else {
      m[static_cast<size_t>(t)] = gamma * q_next.row(t).maxCoeff() - q_taken;
    }
  }
  return m;
}

void SgdOptimizer::step(QParams& params, const Eigen::VectorXd& grad, const SgdConfig& cfg) {
  Eigen::VectorXd g = grad;
  if (cfg.weight_decay != 0.0) g += cfg.weight_decay * params.flatten();
  if (cfg.momentum != 0.0) {
    if (velocity_.size() != g.size()) velocity_ = Eigen::VectorXd::Zero(g.size());
    velocity_ = cfg.momentum * velocity_ + g;
    g = velocity_;
  }
  Eigen::VectorXd flat = params.flatten();
  flat -= cfg.learning_rate * g;
  params.set_from_flat(flat);
}

UpdateStats apply_sum_gradient_update(QParams& params, const EntryBatch& batch,
                                      std::span<const double> term_a_values, double learning_rate,
                                      const BatchCache* cache) {
  UpdateStats stats;
  const Eigen::Index n = batch.n_entries();
  if (n == 0) return stats;
  if (static_cast<Eigen::Index>(term_a_values.size()) != n) {
    throw std::invalid_argument("apply_sum_gradient_update: term-A count mismatch");
  }
  std::vector<double> weights(static_cast<size_t>(n));
  for (Eigen::Index t = 0; t < n; ++t) {
    const double a = term_a_values[static_cast<size_t>(t)];
    weights[static_cast<size_t>(t)] = -2.0 * a;
    stats.loss_sum += vdn_loss(a);
  }
  stats.n_entries = n;

  BatchCache local_cache;
  if (cache == nullptr) {
    q_forward_batch(params, batch.taus, &local_cache);
    cache = &local_cache;
  }
  const Eigen::VectorXd grad = q_backward_weighted(params, *cache, batch.actions, weights);
  Eigen::VectorXd flat = params.flatten();
  flat -= learning_rate * grad;
  params.set_from_flat(flat);
  return stats;
}

UpdateStats centralized_vdn_update(std::vector<QParams>& params,
                                   const std::vector<TargetParams>& targets,
                                   const std::vector<ReplayBuffer>& buffers,
                                   std::span<const size_t> minibatch, double learning_rate,
                                   double gamma) {
  const size_t n_agents = params.size();
  if (targets.size() != n_agents || buffers.size() != n_agents) {
    throw std::invalid_argument("centralized_vdn_update: agent count mismatch");
  }
  for (size_t i = 1; i < n_agents; ++i) {
    if (buffers[i].size() != buffers[0].size()) {
      throw std::invalid_argument("centralized_vdn_update: misaligned buffers");
    }
  }
  if (minibatch.empty()) return {};

  std::vector<EntryBatch> batches;
  std::vector<BatchCache> caches(n_agents);
  std::vector<std::vector<double>> m_per_agent;
  batches.reserve(n_agents);
  m_per_agent.reserve(n_agents);
  for (size_t i = 0; i < n_agents; ++i) {
    batches.push_back(collect_entries(buffers[i], minibatch));
    q_forward_batch(params[i], batches[i].taus, &caches[i]);
    m_per_agent.push_back(compute_m_batch(params[i], targets[i], batches[i], gamma, &caches[i]));
  }

  const size_t n_entries = m_per_agent[0].size();
  std::vector<double> term_a_values(n_entries);
  std::vector<double> m_here(n_agents);
  for (size_t t = 0; t < n_entries; ++t) {
    for (size_t i = 0; i < n_agents; ++i) m_here[i] = m_per_agent[i][t];
    term_a_values[t] = term_a(batches[0].rewards[t], m_here);
  }

  UpdateStats stats;
  for (size_t i = 0; i < n_agents; ++i) {
    stats = apply_sum_gradient_update(params[i], batches[i], term_a_values, learning_rate,
                                      &caches[i]);
  }
  return stats;
}

UpdateStats iql_update(QParams& params, const TargetParams& target, const ReplayBuffer& buffer,
                       std::span<const size_t> minibatch, double learning_rate, double gamma) {
  if (minibatch.empty()) return {};
  const EntryBatch batch = collect_entries(buffer, minibatch);
  BatchCache cache;
  q_forward_batch(params, batch.taus, &cache);
  const std::vector<double> m = compute_m_batch(params, target, batch, gamma, &cache);
  // The agent's own TD error is the single-agent coupling term: d = r + m.
  std::vector<double> td(m.size());
  for (size_t t = 0; t < m.size(); ++t) {
    td[t] = term_a(batch.rewards[t], std::span<const double>(&m[t], 1));
  }
  return apply_sum_gradient_update(params, batch, td, learning_rate, &cache);
}

}  // namespace pevdn

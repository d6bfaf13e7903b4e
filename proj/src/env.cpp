#include "pevdn/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pevdn {

HistoryWindow::HistoryWindow(int window, int obs_dim, int n_actions)
    : window_(window), obs_dim_(obs_dim), n_actions_(n_actions) {
  if (window < 1 || obs_dim < 1 || n_actions < 1) {
    throw std::invalid_argument("HistoryWindow: window, obs_dim, n_actions must be positive");
  }
  data_.assign(static_cast<size_t>(window) * static_cast<size_t>(obs_dim + n_actions), 0.0);
}

void HistoryWindow::push(const Observation& obs, int prev_action) {
  if (static_cast<int>(obs.size()) != obs_dim_) {
    throw std::invalid_argument("HistoryWindow::push: observation size mismatch");
  }
  if (prev_action >= n_actions_) {
    throw std::invalid_argument("HistoryWindow::push: action out of range");
  }
  const size_t slot = static_cast<size_t>(slot_width());
  std::move(data_.begin() + slot, data_.end(), data_.begin());
  const size_t base = data_.size() - slot;
  for (int i = 0; i < obs_dim_; ++i) data_[base + static_cast<size_t>(i)] = obs[static_cast<size_t>(i)];
  for (int a = 0; a < n_actions_; ++a) {
    data_[base + static_cast<size_t>(obs_dim_ + a)] = (a == prev_action) ? 1.0 : 0.0;
  }
}

Episode Episode::build(std::vector<std::vector<Transition>> per_agent, bool success) {
  if (per_agent.empty()) throw std::invalid_argument("Episode: no agents");
  const size_t len = per_agent[0].size();
  for (const auto& seq : per_agent) {
    if (seq.size() != len) throw std::invalid_argument("Episode: per-agent lengths differ");
  }
  for (size_t t = 0; t < len; ++t) {
    const double r = per_agent[0][t].reward;
    for (const auto& seq : per_agent) {
      if (seq[t].reward != r) {
        throw std::invalid_argument("Episode: team reward differs across agents at step " +
                                    std::to_string(t));
      }
    }
  }
  Episode ep;
  ep.per_agent = std::move(per_agent);
  ep.success = success;
  return ep;
}

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::append(long episode_id, std::vector<Transition> transitions, bool success) {
  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(Entry{episode_id, std::move(transitions), success});
}

std::vector<std::vector<double>> MatrixGame::climbing_payoff() {
  return {{11, -30, 0}, {-30, 7, 6}, {0, 0, 5}};
}

MatrixGame::MatrixGame(std::vector<std::vector<double>> payoff, double gamma)
    : payoff_(std::move(payoff)) {
  if (payoff_.empty()) throw std::invalid_argument("MatrixGame: empty payoff table");
  const size_t n = payoff_[0].size();
  if (n < 2) throw std::invalid_argument("MatrixGame: need at least 2 actions");
  for (const auto& row : payoff_) {
    if (row.size() != n) throw std::invalid_argument("MatrixGame: ragged payoff table");
  }
  if (payoff_.size() != n) throw std::invalid_argument("MatrixGame: payoff table must be square");
  max_payoff_ = payoff_[0][0];
  for (const auto& row : payoff_) {
    for (double v : row) max_payoff_ = std::max(max_payoff_, v);
  }
  spec_ = EnvSpec{2, 1, static_cast<int>(n), gamma, 1};
}

std::vector<Observation> MatrixGame::reset(Rng& /*rng*/) {
  done_ = false;
  return {Observation{1.0}, Observation{1.0}};
}

StepResult MatrixGame::step(const std::vector<int>& joint_action) {
  if (done_) throw std::logic_error("MatrixGame::step: episode already done");
  if (static_cast<int>(joint_action.size()) != spec_.n_agents) {
    throw std::invalid_argument("MatrixGame::step: joint action size mismatch");
  }
  for (int a : joint_action) {
    if (a < 0 || a >= spec_.n_actions) {
      throw std::invalid_argument("MatrixGame::step: action out of range");
    }
  }
  done_ = true;
  const double reward = payoff_[static_cast<size_t>(joint_action[0])][static_cast<size_t>(joint_action[1])];
  return StepResult{{Observation{1.0}, Observation{1.0}}, reward, true, reward == max_payoff_};
}

GridWorld::GridWorld(GridWorldConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.width < 2 || cfg_.height < 2) throw std::invalid_argument("GridWorld: grid too small");
  if (cfg_.n_agents < 2) throw std::invalid_argument("GridWorld: need at least 2 agents");
  if (cfg_.goal.first < 0 || cfg_.goal.first >= cfg_.width || cfg_.goal.second < 0 ||
      cfg_.goal.second >= cfg_.height) {
    throw std::invalid_argument("GridWorld: goal outside the grid");
  }
  spec_ = EnvSpec{cfg_.n_agents, 2, 5, cfg_.gamma, cfg_.max_steps};
}

Observation GridWorld::observe(int agent) const {
  const auto [x, y] = positions_[static_cast<size_t>(agent)];
  return {static_cast<double>(x) / (cfg_.width - 1), static_cast<double>(y) / (cfg_.height - 1)};
}

std::vector<Observation> GridWorld::reset(Rng& rng) {
  positions_.clear();
  if (!cfg_.fixed_starts.empty()) {
    if (static_cast<int>(cfg_.fixed_starts.size()) != cfg_.n_agents) {
      throw std::invalid_argument("GridWorld: fixed_starts size must match n_agents");
    }
    positions_ = cfg_.fixed_starts;
  } else {
    // Distinct non-goal cells, drawn uniformly one agent at a time.
    std::vector<std::pair<int, int>> free_cells;
    for (int x = 0; x < cfg_.width; ++x) {
      for (int y = 0; y < cfg_.height; ++y) {
        if (std::pair{x, y} != cfg_.goal) free_cells.emplace_back(x, y);
      }
    }
    for (int i = 0; i < cfg_.n_agents; ++i) {
      const size_t pick = rng.uniform_below(free_cells.size());
      positions_.push_back(free_cells[pick]);
      free_cells.erase(free_cells.begin() + static_cast<std::ptrdiff_t>(pick));
    }
  }
  steps_taken_ = 0;
  done_ = false;
  std::vector<Observation> obs;
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return obs;
}

StepResult GridWorld::step(const std::vector<int>& joint_action) {
  if (done_) throw std::logic_error("GridWorld::step: episode already done");
  if (static_cast<int>(joint_action.size()) != cfg_.n_agents) {
    throw std::invalid_argument("GridWorld::step: joint action size mismatch");
  }
  // 0 stay, 1 north (+y), 2 south (-y), 3 east (+x), 4 west (-x)
  static constexpr int kDx[5] = {0, 0, 0, 1, -1};
  static constexpr int kDy[5] = {0, 1, -1, 0, 0};
  for (int a : joint_action) {
    if (a < 0 || a >= 5) throw std::invalid_argument("GridWorld::step: action out of range");
  }
  for (int i = 0; i < cfg_.n_agents; ++i) {
    auto& [x, y] = positions_[static_cast<size_t>(i)];
    x = std::clamp(x + kDx[joint_action[static_cast<size_t>(i)]], 0, cfg_.width - 1);
    y = std::clamp(y + kDy[joint_action[static_cast<size_t>(i)]], 0, cfg_.height - 1);
  }
  ++steps_taken_;
  const bool all_on_goal =
      std::all_of(positions_.begin(), positions_.end(), [&](auto p) { return p == cfg_.goal; });
  double reward = cfg_.step_cost;
  if (all_on_goal) reward += cfg_.goal_reward;
  done_ = all_on_goal || steps_taken_ >= cfg_.max_steps;
  std::vector<Observation> obs;
  for (int i = 0; i < cfg_.n_agents; ++i) obs.push_back(observe(i));
  return StepResult{std::move(obs), reward, done_, all_on_goal};
}

OptimalJoint brute_force_optimal(const Environment& env) {
  const auto* game = dynamic_cast<const MatrixGame*>(&env);
  if (game == nullptr) {
    throw std::invalid_argument("brute_force_optimal: only single-step matrix games are supported");
  }
  const auto& table = game->payoff();
  OptimalJoint best{{0, 0}, table[0][0]};
  for (size_t a0 = 0; a0 < table.size(); ++a0) {
    for (size_t a1 = 0; a1 < table.size(); ++a1) {
      if (table[a0][a1] > best.value) {
        best.value = table[a0][a1];
        best.joint_action = {static_cast<int>(a0), static_cast<int>(a1)};
      }
    }
  }
  return best;
}

std::unique_ptr<Environment> make_environment(const std::string& key,
                                              const std::vector<double>& payoff_override,
                                              const GridWorldConfig& grid_cfg) {
  if (key == "climbing") {
    if (payoff_override.empty()) return std::make_unique<MatrixGame>();
    const auto n = static_cast<size_t>(std::llround(std::sqrt(static_cast<double>(payoff_override.size()))));
    if (n * n != payoff_override.size() || n < 2) {
      throw std::invalid_argument("make_environment: payoff override must be a square table");
    }
    std::vector<std::vector<double>> table(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < n; ++j) table[i][j] = payoff_override[i * n + j];
    }
    return std::make_unique<MatrixGame>(std::move(table));
  }
  if (key == "gridworld") return std::make_unique<GridWorld>(grid_cfg);
  throw std::invalid_argument("make_environment: unknown env key '" + key + "'");
}

}  // namespace pevdn

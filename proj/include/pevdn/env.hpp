#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <utility>
#include <vector>

#include "pevdn/rng.hpp"

namespace pevdn {

struct EnvSpec {
  int n_agents = 0;
  int obs_dim = 0;
  int n_actions = 0;
  double gamma = 0.0;
  int max_steps = 0;
};

using Observation = std::vector<double>;

// Fixed-length history of (observation, previous-action one-hot) pairs for
// one agent, zero-padded at episode start, flattened oldest slot first.
class HistoryWindow {
 public:
  HistoryWindow() = default;
  HistoryWindow(int window, int obs_dim, int n_actions);

  // Appends the newest pair, shifting older contents one slot back.
  // prev_action < 0 stands for "no previous action" (zero one-hot).
  void push(const Observation& obs, int prev_action);

  const std::vector<double>& flat() const { return data_; }
  int width() const { return static_cast<int>(data_.size()); }
  int slot_width() const { return obs_dim_ + n_actions_; }

 private:
  int window_ = 0;
  int obs_dim_ = 0;
  int n_actions_ = 0;
  std::vector<double> data_;
};

struct Transition {
  std::vector<double> tau;       // flattened history before acting
  int action = 0;
  std::vector<double> tau_next;  // flattened history after the step
  double reward = 0.0;
  bool terminal = false;         // episode ended on this step
};

// One episode as seen by every agent. All per-agent sequences share length
// and rewards; construction validates both.
struct Episode {
  std::vector<std::vector<Transition>> per_agent;
  bool success = false;

  int length() const { return per_agent.empty() ? 0 : static_cast<int>(per_agent[0].size()); }

  static Episode build(std::vector<std::vector<Transition>> per_agent, bool success);
};

// Episode-granular ring buffer for one agent; the oldest episode is evicted
// first. Indices are stable between appends: 0 is the oldest retained entry.
class ReplayBuffer {
 public:
  struct Entry {
    long episode_id = 0;
    std::vector<Transition> transitions;
    bool success = false;
  };

  explicit ReplayBuffer(size_t capacity);

  void append(long episode_id, std::vector<Transition> transitions, bool success);

  size_t size() const { return entries_.size(); }
  size_t capacity() const { return capacity_; }
  const Entry& operator[](size_t idx) const { return entries_.at(idx); }

 private:
  size_t capacity_;
  std::deque<Entry> entries_;
};

struct StepResult {
  std::vector<Observation> observations;
  double reward = 0.0;
  bool done = false;
  bool success = false;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<Observation> reset(Rng& rng) = 0;

  // Throws std::invalid_argument on out-of-range actions and
  // std::logic_error when stepping a finished episode.
  virtual StepResult step(const std::vector<int>& joint_action) = 0;

  virtual bool done() const = 0;
};

// Single-step cooperative matrix game for two agents. Both agents observe
// the constant vector [1.0]; the team reward comes from the payoff table and
// the episode ends after one step. Success means the joint action attains
// the table maximum.
class MatrixGame final : public Environment {
 public:
  // The climbing game: independent learners settle on the risk-dominant
  // suboptimum because the off-diagonal penalties dominate their
  // action-value estimates.
  static std::vector<std::vector<double>> climbing_payoff();

  explicit MatrixGame(std::vector<std::vector<double>> payoff = climbing_payoff(),
                      double gamma = 0.9);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<Observation> reset(Rng& rng) override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool done() const override { return done_; }

  const std::vector<std::vector<double>>& payoff() const { return payoff_; }
  double max_payoff() const { return max_payoff_; }

 private:
  std::vector<std::vector<double>> payoff_;
  double max_payoff_ = 0.0;
  EnvSpec spec_;
  bool done_ = true;
};

struct GridWorldConfig {
  int width = 5;
  int height = 5;
  int n_agents = 3;
  std::pair<int, int> goal{2, 2};
  double step_cost = -0.05;
  double goal_reward = 1.0;
  int max_steps = 25;
  double gamma = 0.9;
  // When nonempty, agents start at these cells; otherwise starts are drawn
  // uniformly over distinct non-goal cells.
  std::vector<std::pair<int, int>> fixed_starts;
};

// Cooperative gridworld: agents move on a bounded grid (stay/N/S/E/W with
// wall clipping), observe only their own normalized position, pay a step
// cost each move, and succeed when all of them occupy the goal cell at once.
class GridWorld final : public Environment {
 public:
  explicit GridWorld(GridWorldConfig cfg = {});

  const EnvSpec& spec() const override { return spec_; }
  std::vector<Observation> reset(Rng& rng) override;
  StepResult step(const std::vector<int>& joint_action) override;
  bool done() const override { return done_; }

  const std::vector<std::pair<int, int>>& positions() const { return positions_; }
  const GridWorldConfig& config() const { return cfg_; }

 private:
  Observation observe(int agent) const;

  GridWorldConfig cfg_;
  EnvSpec spec_;
  std::vector<std::pair<int, int>> positions_;
  int steps_taken_ = 0;
  bool done_ = true;
};

struct OptimalJoint {
  std::vector<int> joint_action;
  double value = 0.0;
};

// Exhaustive enumeration of all joint actions of a single-step matrix game,
// lowest-index tie-breaking. Throws std::invalid_argument for other
// environments.
OptimalJoint brute_force_optimal(const Environment& env);

// Environment factory for the config keys "climbing" and "gridworld".
std::unique_ptr<Environment> make_environment(const std::string& key,
                                              const std::vector<double>& payoff_override = {},
                                              const GridWorldConfig& grid_cfg = {});

}  // namespace pevdn

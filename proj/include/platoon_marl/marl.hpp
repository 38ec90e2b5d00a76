#pragma once

// Multi-agent actor-critic training: twin delayed global critics, holistic or
// task-decomposed local critics, and the DDPG / decentralized / random
// baselines.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "platoon_marl/config.hpp"
#include "platoon_marl/env.hpp"
#include "platoon_marl/errors.hpp"
#include "platoon_marl/nn.hpp"
#include "platoon_marl/replay.hpp"
#include "platoon_marl/reward.hpp"
#include "platoon_marl/rng.hpp"

namespace platoon_marl::marl {

using nn::AdamState;
using nn::DenseNet;
using nn::Matrix;
using nn::Vector;

inline constexpr double kActionLow = -1.0;
inline constexpr double kActionHigh = 1.0;

/// Gaussian perturbation clipped to [-clip, clip].
struct NoiseSpec {
  double std = 0.2;
  double clip = 0.5;
};

/// One draw is consumed per call whatever the std, so streams stay aligned.
inline double clipped_noise(const NoiseSpec& n, Rng& rng) {
  const double x = n.std * standard_normal(rng);
  return std::clamp(x, -n.clip, n.clip);
}

/// Main network, its target copy and the optimizer state of the main.
struct NetPair {
  DenseNet main;
  DenseNet target;
  AdamState opt;
};

inline NetPair make_net_pair(std::vector<int> sizes, std::vector<nn::Activation> out, double lr, Rng& rng) {
  NetPair p;
  p.main = DenseNet(std::move(sizes), std::move(out));
  p.main.initialize(rng);
  p.target = p.main;
  p.opt = AdamState(p.main, lr);
  return p;
}

/// Sizes of the joint vectors stored in the replay buffer.
struct Layout {
  int agents = 1;
  int obs = 1;
  int act = 1;

  int joint_obs() const { return agents * obs; }
  int joint_act() const { return agents * act; }
  int critic_input() const { return joint_obs() + joint_act(); }
};

inline Layout layout_of(const EnvConfig& cfg) {
  return {cfg.num_platoons, cfg.observation_size(), cfg.action_size()};
}

struct AgentNets {
  NetPair actor;
  std::vector<NetPair> critics;  // one holistic critic, or two task critics
};

struct GlobalCritics {
  NetPair twin1;
  NetPair twin2;
};

/// Replay samples stacked column-wise.
struct Minibatch {
  Matrix states;         // joint_obs x S
  Matrix actions;        // joint_act x S
  Matrix next_states;    // joint_obs x S
  Matrix local_rewards;  // agents x S
  Matrix task1_rewards;  // agents x S
  Matrix task2_rewards;  // agents x S
  Vector global_rewards;
  Vector continuation;  // 0 where the transition ended an episode, else 1

  Eigen::Index size() const { return states.cols(); }
};

inline Minibatch make_minibatch(std::span<const Transition* const> rows, const Layout& l) {
  const auto s = static_cast<Eigen::Index>(rows.size());
  Minibatch b;
  b.states.resize(l.joint_obs(), s);
  b.actions.resize(l.joint_act(), s);
  b.next_states.resize(l.joint_obs(), s);
  b.local_rewards.resize(l.agents, s);
  b.task1_rewards.resize(l.agents, s);
  b.task2_rewards.resize(l.agents, s);
  b.global_rewards.resize(s);
  b.continuation.resize(s);
  auto fill = [](Matrix& m, Eigen::Index c, const std::vector<double>& v) {
    if (static_cast<Eigen::Index>(v.size()) != m.rows()) throw ShapeError("make_minibatch: transition layout mismatch");
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = v[static_cast<std::size_t>(r)];
  };
  for (Eigen::Index c = 0; c < s; ++c) {
    const Transition& t = *rows[static_cast<std::size_t>(c)];
    fill(b.states, c, t.state);
    fill(b.actions, c, t.action);
    fill(b.next_states, c, t.next_state);
    fill(b.local_rewards, c, t.local_reward);
    fill(b.task1_rewards, c, t.task1_reward);
    fill(b.task2_rewards, c, t.task2_reward);
    b.global_rewards(c) = t.global_reward;
    b.continuation(c) = t.terminal ? 0.0 : 1.0;
  }
  return b;
}

inline Matrix vstack(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw ShapeError("vstack: column count mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

/// a'_j = clamp(pi'_j(s'_j) + clipped noise) for every agent and raw entry.
inline Matrix smoothed_target_actions(std::span<const DenseNet* const> target_actors, const Matrix& next_states,
                                      const Layout& l, const NoiseSpec& noise, Rng& rng) {
  if (static_cast<int>(target_actors.size()) != l.agents) throw ShapeError("smoothed_target_actions: actor count");
  Matrix out(l.joint_act(), next_states.cols());
  for (int j = 0; j < l.agents; ++j) {
    Matrix a = target_actors[static_cast<std::size_t>(j)]->evaluate(next_states.middleRows(j * l.obs, l.obs));
    for (Eigen::Index c = 0; c < a.cols(); ++c)
      for (Eigen::Index r = 0; r < a.rows(); ++r)
        a(r, c) = std::clamp(a(r, c) + clipped_noise(noise, rng), kActionLow, kActionHigh);
    out.middleRows(j * l.act, l.act) = a;
  }
  return out;
}

/// y = r + gamma * cont * min(q1, q2), row-wise.
inline Vector td3_global_target(const Vector& reward, const Vector& q1, const Vector& q2, double gamma,
                                const Vector& continuation) {
  const auto n = reward.size();
  if (q1.size() != n || q2.size() != n || continuation.size() != n) throw ShapeError("td3_global_target: sizes");
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = gamma * continuation(i);
    y(i) = reward(i) + c * std::min(q1(i), q2(i));
  }
  return y;
}

inline Vector td3_global_target(const Vector& reward, const Vector& q1, const Vector& q2, double gamma) {
  return td3_global_target(reward, q1, q2, gamma, Vector::Ones(reward.size()));
}

/// Number of rows where y exceeds r + gamma * cont * q for the given twin.
inline std::size_t pessimism_violations(const Vector& y, const Vector& reward, const Vector& q, double gamma,
                                        const Vector& continuation) {
  std::size_t bad = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double c = gamma * continuation(i);
    if (!(y(i) <= reward(i) + c * q(i))) ++bad;
  }
  return bad;
}

struct RegressionResult {
  double loss = 0.0;
  bool applied = false;
};

/// Mean squared error over the batch and its gradient w.r.t. the outputs.
inline double mse(const Matrix& q, const Vector& y, Matrix* grad = nullptr) {
  if (q.rows() != 1 || q.cols() != y.size()) throw ShapeError("mse: critic output must be 1 x S");
  const Matrix diff = q - y.transpose();
  const double s = static_cast<double>(y.size());
  if (grad) *grad = (2.0 / s) * diff;
  return diff.squaredNorm() / s;
}

/// One optimizer step of `critic.main` towards the constant targets y.
inline RegressionResult regress(NetPair& critic, const Matrix& inputs, const Vector& y) {
  Matrix grad;
  RegressionResult r;
  r.loss = mse(critic.main.forward(inputs), y, &grad);
  if (!std::isfinite(r.loss)) return r;
  r.applied = nn::optimize_step(critic.main, critic.main.backward(grad), critic.opt);
  return r;
}

/// Both twins regress to the same y on (s, a).
inline std::pair<RegressionResult, RegressionResult> update_global_critics(GlobalCritics& g, const Minibatch& b,
                                                                           const Vector& y) {
  const Matrix in = vstack(b.states, b.actions);
  return {regress(g.twin1, in, y), regress(g.twin2, in, y)};
}

/// Reward row feeding critic c of an agent with `num_critics` critics.
inline const Matrix& critic_rewards(const Minibatch& b, std::size_t num_critics, std::size_t c) {
  if (num_critics == 1) return b.local_rewards;
  return c == 0 ? b.task1_rewards : b.task2_rewards;
}

/// Local critics of agent j regress to r + gamma * cont * Q'(s'_j, pi'_j(s'_j)).
inline std::vector<RegressionResult> update_local_critics(AgentNets& a, int j, const Minibatch& b, const Layout& l,
                                                          double gamma) {
  const Matrix s = b.states.middleRows(j * l.obs, l.obs);
  const Matrix s_next = b.next_states.middleRows(j * l.obs, l.obs);
  const Matrix in = vstack(s, b.actions.middleRows(j * l.act, l.act));
  const Matrix in_next = vstack(s_next, a.actor.target.evaluate(s_next));
  std::vector<RegressionResult> out;
  for (std::size_t c = 0; c < a.critics.size(); ++c) {
    auto& critic = a.critics[c];
    const Matrix q_next = critic.target.evaluate(in_next);
    const auto& rewards = critic_rewards(b, a.critics.size(), c);
    Vector y(b.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rewards(j, i) + gamma * b.continuation(i) * q_next(0, i);
    out.push_back(regress(critic, in, y));
  }
  return out;
}

/// Gradient of penalty * mean_batch(|z|^2) w.r.t. the actor's output
/// pre-activation z for the cached batch.
inline Matrix preactivation_penalty_gradient(const DenseNet& actor, double penalty) {
  const Matrix z = actor.output_preactivation();
  return (2.0 * penalty / static_cast<double>(z.cols())) * z;
}

/// Policy gradient of agent j's actor (descent direction on -Q): the global
/// term uses twin 1 with the other agents' actions taken from the batch, the
/// local term sums over the agent's critics. Null / empty terms are skipped.
inline DenseNet::Gradients actor_gradient(DenseNet& actor, int j, const Minibatch& b, const Layout& l,
                                          DenseNet* global_twin1, std::span<DenseNet* const> local_critics,
                                          double preactivation_penalty = 0.0) {
  const Matrix s = b.states.middleRows(j * l.obs, l.obs);
  const Matrix a = actor.forward(s);
  const double scale = -1.0 / static_cast<double>(b.size());
  const Matrix up = Matrix::Constant(1, b.size(), scale);
  Matrix da = Matrix::Zero(l.act, b.size());
  if (global_twin1 != nullptr) {
    Matrix actions = b.actions;
    actions.middleRows(j * l.act, l.act) = a;
    global_twin1->forward(vstack(b.states, actions));
    const auto g = global_twin1->backward(up);
    da += g.input.middleRows(l.joint_obs() + j * l.act, l.act);
  }
  for (DenseNet* critic : local_critics) {
    critic->forward(vstack(s, a));
    const auto g = critic->backward(up);
    da += g.input.bottomRows(l.act);
  }
  if (preactivation_penalty > 0.0) {
    const Matrix pz = preactivation_penalty_gradient(actor, preactivation_penalty);
    return actor.backward(da, &pz);
  }
  return actor.backward(da);
}

inline bool update_actor(AgentNets& a, int j, const Minibatch& b, const Layout& l, DenseNet* global_twin1,
                         double preactivation_penalty = 0.0) {
  std::vector<DenseNet*> locals;
  for (auto& c : a.critics) locals.push_back(&c.main);
  const auto g = actor_gradient(a.actor.main, j, b, l, global_twin1, locals, preactivation_penalty);
  return nn::optimize_step(a.actor.main, g, a.actor.opt);
}

/// Actor step with one holistic local critic.
inline bool update_actor_modified(AgentNets& a, int j, const Minibatch& b, const Layout& l, DenseNet* global_twin1,
                                  double preactivation_penalty = 0.0) {
  if (a.critics.size() != 1) throw ShapeError("update_actor_modified: expected one local critic");
  return update_actor(a, j, b, l, global_twin1, preactivation_penalty);
}

/// Actor step with the sum of the two task critics as local term.
inline bool update_actor_decomposed(AgentNets& a, int j, const Minibatch& b, const Layout& l,
                                    DenseNet* global_twin1, double preactivation_penalty = 0.0) {
  if (a.critics.size() != 2) throw ShapeError("update_actor_decomposed: expected two task critics");
  return update_actor(a, j, b, l, global_twin1, preactivation_penalty);
}

inline void soft_update(NetPair& p, double tau) { nn::soft_update(p.target, p.main, tau); }

// ---------------------------------------------------------------------------
// Training loop

struct EpisodeRecord {
  int episode = 0;
  std::vector<double> local_reward;  // per agent, mean per slot
  std::vector<double> task1_reward;
  std::vector<double> task2_reward;
  double global_reward = 0.0;  // mean per slot
  double mean_aoi_s = 0.0;     // over slots and platoons, after each slot
  std::vector<int> cam_delivered;  // per platoon, at episode end
  double mean_power_w = 0.0;
  double wall_clock_s = 0.0;

  double mean_local_reward() const {
    double s = 0.0;
    for (double r : local_reward) s += r;
    return local_reward.empty() ? 0.0 : s / static_cast<double>(local_reward.size());
  }
  double cam_delivery_rate() const {
    double s = 0.0;
    for (int d : cam_delivered) s += d;
    return cam_delivered.empty() ? 0.0 : s / static_cast<double>(cam_delivered.size());
  }
};

struct TrainingDiagnostics {
  std::size_t update_blocks = 0;       // minibatch blocks executed
  std::size_t warmup_blocks = 0;       // blocks skipped because the buffer held < S transitions
  std::size_t policy_blocks = 0;       // blocks that also updated actors / local critics
  std::size_t skipped_updates = 0;     // optimizer steps dropped for non-finite values
  std::size_t pessimism_rows = 0;      // global-target rows checked against both twins
  std::size_t pessimism_violations = 0;
};

struct TrainingLog {
  Algorithm algorithm = Algorithm::tdec;
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  TrainingDiagnostics diagnostics;
};

class Trainer {
 public:
  using EpisodeCallback = std::function<void(const Trainer&, const EpisodeRecord&)>;

  Trainer(EnvConfig env, RewardWeights weights, TrainConfig train, std::uint64_t seed)
      : env_(std::move(env)),
        weights_(weights),
        train_(std::move(train)),
        seed_(seed),
        layout_(layout_of(env_)),
        buffer_(train_.buffer_capacity),
        env_rng_(make_rng(seed, Stream::environment)),
        explore_rng_(make_rng(seed, Stream::exploration)),
        replay_rng_(make_rng(seed, Stream::replay)),
        smooth_rng_(make_rng(seed, Stream::smoothing)) {
    env_.validate();
    weights_.validate();
    train_.validate();
    build_networks();
  }

  const EnvConfig& env_config() const { return env_; }
  const TrainConfig& train_config() const { return train_; }
  const Layout& layout() const { return layout_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const TrainingDiagnostics& diagnostics() const { return diag_; }
  int episodes_done() const { return episode_; }

  std::vector<AgentNets>& agents() { return agents_; }
  const std::vector<AgentNets>& agents() const { return agents_; }
  GlobalCritics* global() { return global_ ? &*global_ : nullptr; }
  const GlobalCritics* global() const { return global_ ? &*global_ : nullptr; }
  AgentNets* central() { return central_ ? &*central_ : nullptr; }
  const AgentNets* central() const { return central_ ? &*central_ : nullptr; }

  /// Hash over every actor and local critic (main and target).
  std::uint64_t policy_hash() const {
    std::uint64_t h = 0;
    auto mix = [&h](const DenseNet& n) { h = h * 1099511628211ull ^ nn::parameter_hash(n); };
    for (const auto& a : agents_) {
      mix(a.actor.main);
      mix(a.actor.target);
      for (const auto& c : a.critics) {
        mix(c.main);
        mix(c.target);
      }
    }
    if (central_) {
      mix(central_->actor.main);
      mix(central_->actor.target);
    }
    return h;
  }

  /// Linear schedule from `first` at episode 0 to `last` at the final episode.
  double anneal(int episode, double first, double last) const {
    if (train_.episodes <= 1) return first;
    const double f = static_cast<double>(episode) / static_cast<double>(train_.episodes - 1);
    return first + (last - first) * std::min(f, 1.0);
  }
  double exploration_std(int episode) const {
    return anneal(episode, train_.explore_std_initial, train_.explore_std_final);
  }
  double uniform_action_prob(int episode) const {
    return anneal(episode, train_.explore_uniform_prob, train_.explore_uniform_prob_final);
  }

  /// Greedy (explore_std = 0) or noisy raw actions for every agent.
  std::vector<std::vector<double>> act(const std::vector<Observation>& obs, double explore_std) {
    std::vector<std::vector<double>> raw(static_cast<std::size_t>(layout_.agents));
    const NoiseSpec noise{explore_std, train_.noise_clip};
    if (train_.algorithm == Algorithm::random) return random_actions();
    auto perturb = [&](double x) { return std::clamp(x + clipped_noise(noise, explore_rng_), kActionLow, kActionHigh); };
    if (central_) {
      Vector joint(layout_.joint_obs());
      for (int j = 0; j < layout_.agents; ++j) {
        const auto f = obs[static_cast<std::size_t>(j)].flatten();
        for (int i = 0; i < layout_.obs; ++i) joint(j * layout_.obs + i) = f[static_cast<std::size_t>(i)];
      }
      const Vector a = central_->actor.main.predict(joint);
      for (int j = 0; j < layout_.agents; ++j)
        for (int i = 0; i < layout_.act; ++i) raw[static_cast<std::size_t>(j)].push_back(perturb(a(j * layout_.act + i)));
      return raw;
    }
    for (int j = 0; j < layout_.agents; ++j) {
      const auto f = obs[static_cast<std::size_t>(j)].flatten();
      const Vector a = agents_[static_cast<std::size_t>(j)].actor.main.predict(
          Eigen::Map<const Vector>(f.data(), static_cast<Eigen::Index>(f.size())));
      for (int i = 0; i < layout_.act; ++i) raw[static_cast<std::size_t>(j)].push_back(perturb(a(i)));
    }
    return raw;
  }

  /// Exploratory joint action: actor output plus clipped noise, replaced per
  /// agent by a uniform draw with probability `uniform_prob`.
  std::vector<std::vector<double>> explore(const std::vector<Observation>& obs, double explore_std,
                                           double uniform_prob) {
    auto raw = act(obs, explore_std);
    if (train_.explore_uniform_prob <= 0.0 && train_.explore_uniform_prob_final <= 0.0) return raw;
    for (auto& r : raw) {
      const bool replace = uniform(explore_rng_, 0.0, 1.0) < uniform_prob;
      for (auto& x : r) {
        const double u = uniform(explore_rng_, kActionLow, kActionHigh);
        if (replace) x = u;
      }
    }
    return raw;
  }

  /// Slot loop of one episode followed by its update blocks.
  EpisodeRecord run_episode() {
    const auto t0 = std::chrono::steady_clock::now();
    const int e = episode_;
    env_state_ = state_started_ ? init_episode(env_, env_rng_, &env_state_) : init_episode(env_, env_rng_);
    state_started_ = true;
    const auto p = static_cast<std::size_t>(layout_.agents);
    EpisodeRecord rec;
    rec.episode = e;
    rec.local_reward.assign(p, 0.0);
    rec.task1_reward.assign(p, 0.0);
    rec.task2_reward.assign(p, 0.0);
    auto obs = build_observations(env_state_, env_);
    const double noise_std = exploration_std(e);
    const double uniform_prob = uniform_action_prob(e);
    for (int t = 0; t < env_.episode_slots; ++t) {
      const auto raw = e < train_.warmup_episodes ? random_actions() : explore(obs, noise_std, uniform_prob);
      const auto result = step(env_state_, raw, env_, env_rng_);
      const auto rewards = reward::compute_rewards(env_state_, result.outcome, env_, weights_);
      Transition tr;
      tr.state = joint(obs);
      for (const auto& r : raw) tr.action.insert(tr.action.end(), r.begin(), r.end());
      tr.local_reward = rewards.local;
      tr.task1_reward = rewards.task1;
      tr.task2_reward = rewards.task2;
      tr.global_reward = rewards.global;
      tr.next_state = joint(result.observations);
      tr.terminal = train_.terminal_at_episode_end && t + 1 == env_.episode_slots;
      buffer_.push(std::move(tr));
      for (std::size_t j = 0; j < p; ++j) {
        rec.local_reward[j] += rewards.local[j];
        rec.task1_reward[j] += rewards.task1[j];
        rec.task2_reward[j] += rewards.task2[j];
        rec.mean_aoi_s += env_state_.platoons[j].aoi_s;
        rec.mean_power_w += result.outcome.platoons[j].action.power_w;
      }
      rec.global_reward += rewards.global;
      obs = result.observations;
    }
    const double slots = env_.episode_slots;
    for (std::size_t j = 0; j < p; ++j) {
      rec.local_reward[j] /= slots;
      rec.task1_reward[j] /= slots;
      rec.task2_reward[j] /= slots;
      rec.cam_delivered.push_back(env_state_.platoons[j].cam_delivered ? 1 : 0);
    }
    rec.global_reward /= slots;
    rec.mean_aoi_s /= slots * static_cast<double>(p);
    rec.mean_power_w /= slots * static_cast<double>(p);
    for (int u = 0; u < train_.updates_per_episode; ++u) train_block(e);
    ++episode_;
    rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  TrainingLog run(const EpisodeCallback& callback = {}) {
    TrainingLog log;
    log.algorithm = train_.algorithm;
    log.seed = seed_;
    while (episode_ < train_.episodes) {
      log.episodes.push_back(run_episode());
      if (callback) callback(*this, log.episodes.back());
    }
    log.diagnostics = diag_;
    return log;
  }

  /// One minibatch update block for episode `episode`.
  void train_block(int episode) {
    if (train_.algorithm == Algorithm::random) return;
    if (buffer_.size() < static_cast<std::size_t>(train_.minibatch)) {
      ++diag_.warmup_blocks;
      return;
    }
    ++diag_.update_blocks;
    const auto rows = buffer_.sample(static_cast<std::size_t>(train_.minibatch), replay_rng_);
    const Minibatch b = make_minibatch(rows, layout_);
    if (central_) {
      train_central(b);
      return;
    }
    if (global_) train_global(b);
    if (episode % train_.policy_delay != 0) return;
    ++diag_.policy_blocks;
    for (int j = 0; j < layout_.agents; ++j) {
      auto& a = agents_[static_cast<std::size_t>(j)];
      for (const auto& r : update_local_critics(a, j, b, layout_, train_.discount))
        if (!r.applied) ++diag_.skipped_updates;
      if (!update_actor(a, j, b, layout_, global_ ? &global_->twin1.main : nullptr,
                        train_.actor_preactivation_penalty))
        ++diag_.skipped_updates;
      soft_update(a.actor, train_.tau);
      for (auto& c : a.critics) soft_update(c, train_.tau);
    }
  }

  /// Writes every network (main and target) under `dir`.
  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for_each_net([&](const std::string& name, const DenseNet& n) { nn::save_checkpoint((dir / name).string(), n); });
  }

  /// Restores networks written by `save`; shapes must match this trainer.
  void load(const std::filesystem::path& dir) {
    for_each_net_mut([&](const std::string& name, DenseNet& n) {
      DenseNet loaded = nn::load_checkpoint((dir / name).string());
      if (!loaded.same_shape(n) || loaded.output_activations() != n.output_activations())
        throw ShapeError("checkpoint " + name + " does not match the configured network");
      n = std::move(loaded);
    });
  }

 private:
  std::vector<std::vector<double>> random_actions() {
    std::vector<std::vector<double>> raw(static_cast<std::size_t>(layout_.agents));
    for (auto& r : raw)
      for (int i = 0; i < layout_.act; ++i) r.push_back(uniform(explore_rng_, kActionLow, kActionHigh));
    return raw;
  }

  std::vector<double> joint(const std::vector<Observation>& obs) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(layout_.joint_obs()));
    for (const auto& o : obs) {
      const auto f = o.flatten();
      out.insert(out.end(), f.begin(), f.end());
    }
    return out;
  }

  static std::vector<int> sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> s{in};
    s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(out);
    return s;
  }

  void build_networks() {
    Rng init = make_rng(seed_, Stream::init);
    const auto& t = train_;
    const auto& l = layout_;
    switch (t.algorithm) {
      case Algorithm::random: return;
      case Algorithm::ddpg: {
        AgentNets c;
        c.actor = make_net_pair(sizes(l.joint_obs(), t.actor_hidden, l.joint_act()), {nn::Activation::tanh},
                                t.actor_lr, init);
        c.critics.push_back(make_net_pair(sizes(l.critic_input(), t.global_critic_hidden, 1),
                                          {nn::Activation::identity}, t.critic_lr, init));
        central_ = std::move(c);
        return;
      }
      default: break;
    }
    const std::size_t per_agent = t.algorithm == Algorithm::tdec ? 2 : 1;
    for (int j = 0; j < l.agents; ++j) {
      AgentNets a;
      a.actor = make_net_pair(sizes(l.obs, t.actor_hidden, l.act), {nn::Activation::tanh}, t.actor_lr, init);
      for (std::size_t c = 0; c < per_agent; ++c)
        a.critics.push_back(make_net_pair(sizes(l.obs + l.act, t.local_critic_hidden, 1), {nn::Activation::identity},
                                          t.critic_lr, init));
      agents_.push_back(std::move(a));
    }
    if (t.algorithm != Algorithm::decentralized) {
      GlobalCritics g;
      g.twin1 = make_net_pair(sizes(l.critic_input(), t.global_critic_hidden, 1), {nn::Activation::identity},
                              t.critic_lr, init);
      g.twin2 = make_net_pair(sizes(l.critic_input(), t.global_critic_hidden, 1), {nn::Activation::identity},
                              t.critic_lr, init);
      global_ = std::move(g);
    }
  }

  void train_global(const Minibatch& b) {
    std::vector<const DenseNet*> targets;
    for (const auto& a : agents_) targets.push_back(&a.actor.target);
    const NoiseSpec smooth{train_.smoothing_noise_std, train_.noise_clip};
    const Matrix a_next = smoothed_target_actions(targets, b.next_states, layout_, smooth, smooth_rng_);
    const Matrix in_next = vstack(b.next_states, a_next);
    const Vector q1 = global_->twin1.target.evaluate(in_next).row(0).transpose();
    const Vector q2 = global_->twin2.target.evaluate(in_next).row(0).transpose();
    const double g = train_.discount;
    const Vector y = td3_global_target(b.global_rewards, q1, q2, g, b.continuation);
    diag_.pessimism_rows += 2 * static_cast<std::size_t>(y.size());
    diag_.pessimism_violations += pessimism_violations(y, b.global_rewards, q1, g, b.continuation) +
                                  pessimism_violations(y, b.global_rewards, q2, g, b.continuation);
    const auto [r1, r2] = update_global_critics(*global_, b, y);
    if (!r1.applied) ++diag_.skipped_updates;
    if (!r2.applied) ++diag_.skipped_updates;
    soft_update(global_->twin1, train_.tau);
    soft_update(global_->twin2, train_.tau);
  }

  /// Plain DDPG on the joint observation; reward = mean local + global.
  void train_central(const Minibatch& b) {
    auto& c = *central_;
    auto& critic = c.critics[0];
    const Matrix in_next = vstack(b.next_states, c.actor.target.evaluate(b.next_states));
    const Matrix q_next = critic.target.evaluate(in_next);
    Vector y(b.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double r = b.local_rewards.col(i).mean() + b.global_rewards(i);
      y(i) = r + train_.discount * b.continuation(i) * q_next(0, i);
    }
    if (!regress(critic, vstack(b.states, b.actions), y).applied) ++diag_.skipped_updates;

    const Matrix a = c.actor.main.forward(b.states);
    critic.main.forward(vstack(b.states, a));
    const auto g = critic.main.backward(Matrix::Constant(1, b.size(), -1.0 / static_cast<double>(b.size())));
    const Matrix da = g.input.bottomRows(layout_.joint_act());
    const Matrix pz = preactivation_penalty_gradient(c.actor.main, train_.actor_preactivation_penalty);
    if (!nn::optimize_step(c.actor.main, c.actor.main.backward(da, &pz), c.actor.opt)) ++diag_.skipped_updates;
    ++diag_.policy_blocks;
    soft_update(c.actor, train_.tau);
    soft_update(critic, train_.tau);
  }

  template <typename F>
  void for_each_net(F&& f) const {
    const_cast<Trainer*>(this)->for_each_net_mut([&](const std::string& n, DenseNet& net) { f(n, net); });
  }

  template <typename F>
  void for_each_net_mut(F&& f) {
    auto pair = [&](const std::string& base, NetPair& p) {
      f(base + ".net", p.main);
      f(base + "_target.net", p.target);
    };
    for (std::size_t j = 0; j < agents_.size(); ++j) {
      pair("actor_" + std::to_string(j), agents_[j].actor);
      for (std::size_t c = 0; c < agents_[j].critics.size(); ++c)
        pair("local_critic_" + std::to_string(j) + "_" + std::to_string(c), agents_[j].critics[c]);
    }
    if (global_) {
      pair("global_critic_1", global_->twin1);
      pair("global_critic_2", global_->twin2);
    }
    if (central_) {
      pair("central_actor", central_->actor);
      pair("central_critic", central_->critics[0]);
    }
  }

  EnvConfig env_;
  RewardWeights weights_;
  TrainConfig train_;
  std::uint64_t seed_;
  Layout layout_;
  ReplayBuffer buffer_;
  Rng env_rng_;
  Rng explore_rng_;
  Rng replay_rng_;
  Rng smooth_rng_;
  std::vector<AgentNets> agents_;
  std::optional<GlobalCritics> global_;
  std::optional<AgentNets> central_;
  EnvState env_state_;
  bool state_started_ = false;
  int episode_ = 0;
  TrainingDiagnostics diag_;
};

/// Runs any selector through the shared training loop.
inline TrainingLog run_training(Algorithm algorithm, const EnvConfig& env, const RewardWeights& weights,
                                TrainConfig train, std::uint64_t seed, const Trainer::EpisodeCallback& cb = {}) {
  train.algorithm = algorithm;
  Trainer t(env, weights, std::move(train), seed);
  return t.run(cb);
}

inline TrainingLog run_baseline(Algorithm algorithm, const EnvConfig& env, const RewardWeights& weights,
                                TrainConfig train, std::uint64_t seed, const Trainer::EpisodeCallback& cb = {}) {
  if (algorithm != Algorithm::ddpg && algorithm != Algorithm::decentralized && algorithm != Algorithm::random)
    throw ConfigError("run_baseline: selector must be ddpg, decentralized or random");
  return run_training(algorithm, env, weights, std::move(train), seed, cb);
}

}  // namespace platoon_marl::marl

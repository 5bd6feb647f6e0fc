#pragma once

#include <vector>

#include "monoscale/world.hpp"

namespace monoscale {

/**
 * The stage-k contextual bandit: a feature space, a pool, the plan space
 * Y_k and the reward table r_k(x, y), enumerated once.
 *
 * Rewards are indexed [context][plan] in enumerate_contexts and plan_space
 * order. Because plan_space is prefix-stable, the table of an expanded
 * bandit agrees with the pre-expansion table on the leading columns.
 */
class Bandit {
 public:
  Bandit(FeatureSpace space, AgentPool pool, RewardModel model, int l_max)
      : space_(std::move(space)),
        pool_(std::move(pool)),
        model_(model),
        l_max_(l_max),
        contexts_(enumerate_contexts(space_)),
        plans_(plan_space(pool_, l_max)) {
    model_.validate();
    rewards_.resize(contexts_.size());
    for (std::size_t i = 0; i < contexts_.size(); ++i) {
      rewards_[i].reserve(plans_.size());
      for (const auto& y : plans_) rewards_[i].push_back(success_prob(space_, pool_, contexts_[i], y, model_));
    }
  }

  const FeatureSpace& space() const noexcept { return space_; }
  const AgentPool& pool() const noexcept { return pool_; }
  const RewardModel& model() const noexcept { return model_; }
  int l_max() const noexcept { return l_max_; }
  const std::vector<TaskContext>& contexts() const noexcept { return contexts_; }
  const std::vector<Plan>& plans() const noexcept { return plans_; }
  double reward(std::size_t context, std::size_t plan) const { return rewards_[context][plan]; }
  const std::vector<double>& rewards(std::size_t context) const { return rewards_[context]; }

  /// Same space, model and plan length over an expanded pool.
  Bandit expanded(AgentProfile agent) const {
    return Bandit(space_, expand_pool(pool_, std::move(agent)), model_, l_max_);
  }

 private:
  FeatureSpace space_;
  AgentPool pool_;
  RewardModel model_;
  int l_max_;
  std::vector<TaskContext> contexts_;
  std::vector<Plan> plans_;
  std::vector<std::vector<double>> rewards_;
};

}  // namespace monoscale

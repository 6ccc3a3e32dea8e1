#pragma once

#include <optional>

#include "basis/irl.hpp"

namespace basis {

enum class Variant { basis, no_pretraining, no_sf_dqn, irl_pretraining };
const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct EvalConfig {
  std::vector<int> demo_counts{10, 30, 100, 300, 1000};
  std::vector<Variant> variants{Variant::basis, Variant::no_pretraining,
                                Variant::no_sf_dqn};
  int seeds = 5;
  int episodes = 200;        // Monte Carlo budget where exact evaluation is unavailable
  bool phi_ablation = true;  // extra unfrozen-phi arm at the largest demo count
  int irl_pretrain_demos_per_task = 100;
  uint64_t seed = 0;
  void validate() const;
};

struct ReportRow {
  std::string variant;
  std::string env;
  int n_demos = 0;
  uint64_t seed = 0;
  double value_difference = 0.0;
  double reward_mse = 0.0;  // NaN when the variant recovers no reward
  Eigen::VectorXd dist;     // behavior distribution (collection / lane occupancy)
};

struct MetricsReport {
  std::vector<ReportRow> rows;
  double expert_return = 0.0;
  std::string env;
  std::string notes;  // evaluation conventions (exact vs MC, return convention)

  // mean and standard deviation of value_difference over seeds
  std::pair<double, double> value_difference_stats(const std::string& variant,
                                                   int n_demos) const;
};

// Exact undiscounted finite-horizon value difference on the enumerated MDP.
double value_difference_exact(const EnumeratedMdp& tab, const PolicyTable& expert,
                              const PolicyTable& inferred, int task, int horizon);

// Monte Carlo value difference in environment mode: expert minus inferred
// expected return, independent episode streams.
double value_difference(Env& env, const ObsPolicy& expert, const ObsPolicy& inferred,
                        int episodes, int horizon, Rng& rng);

// Mean squared error of r_hat(s,a) = phi(s,a)^T w_e against the sealed demo
// rewards, over all demo steps.
double reward_mse(const BasisModel& model, const DemoSet& demos);

// Exact occupancy-weighted event distribution: FruitGrid collection shares by
// color. Falls back to uniform (with a warning flag) if nothing is collected.
Eigen::VectorXd behavior_distribution_exact(const EnumeratedMdp& tab,
                                            const PolicyTable& policy, int horizon,
                                            int num_events);

// Lane-occupancy distribution over an exact horizon rollout of state masses.
Eigen::VectorXd lane_occupancy_exact(const EnumeratedMdp& tab, const PolicyTable& policy,
                                     int horizon, int num_lanes);

// Monte Carlo behavior distribution in environment mode (event counts).
Eigen::VectorXd behavior_distribution(Env& env, const ObsPolicy& policy, int episodes,
                                      int horizon, int num_events, Rng& rng);

// Everything the grid consumes. Pre-trained models are shared across seeds;
// each seed draws its own demo sets and IRL initialization streams.
struct GridInputs {
  const BasisModel* basis = nullptr;  // for variants basis / irl_pretraining init spec
  const DqnModel* dqn = nullptr;      // for variant no_sf_dqn
  const EnumeratedMdp* tab = nullptr;
  const Expert* expert = nullptr;
  const TaskSuite* suite = nullptr;
  int test_task = 0;  // reward-table index of the held-out task inside tab
  int horizon = 40;
  std::string env_name;
};

MetricsReport run_experiment_grid(const GridInputs& in, const IRLConfig& irl,
                                  const EvalConfig& cfg);

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path);
MetricsReport read_report_csv(const std::filesystem::path& path);

// Learning-curve and distribution plots rendered from a report.
void write_report_plots(const MetricsReport& report,
                        const std::filesystem::path& out_dir);

}  // namespace basis

#include "basis/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <stdexcept>

namespace basis {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::basis: return "basis";
    case Variant::no_pretraining: return "no_pretraining";
    case Variant::no_sf_dqn: return "no_sf_dqn";
    case Variant::irl_pretraining: return "irl_pretraining";
  }
  throw std::invalid_argument("variant_name: unknown variant");
}

Variant parse_variant(const std::string& name) {
  if (name == "basis") return Variant::basis;
  if (name == "no_pretraining") return Variant::no_pretraining;
  if (name == "no_sf_dqn") return Variant::no_sf_dqn;
  if (name == "irl_pretraining") return Variant::irl_pretraining;
  throw std::invalid_argument("parse_variant: unknown variant " + name);
}

void EvalConfig::validate() const {
  if (demo_counts.empty() || variants.empty())
    throw std::invalid_argument("eval: demo_counts and variants must be nonempty");
  for (int n : demo_counts)
    if (n < 1) throw std::invalid_argument("eval: demo counts must be >= 1");
  if (seeds < 1 || episodes < 1 || irl_pretrain_demos_per_task < 1)
    throw std::invalid_argument("eval: counts must be >= 1");
}

std::pair<double, double> MetricsReport::value_difference_stats(
    const std::string& variant, int n_demos) const {
  std::vector<double> vals;
  for (const auto& row : rows)
    if (row.variant == variant && row.n_demos == n_demos)
      vals.push_back(row.value_difference);
  if (vals.empty()) throw std::invalid_argument("report: no rows for " + variant);
  double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var = vals.size() > 1 ? var / (vals.size() - 1) : 0.0;
  return {mean, std::sqrt(var)};
}

double value_difference_exact(const EnumeratedMdp& tab, const PolicyTable& expert,
                              const PolicyTable& inferred, int task, int horizon) {
  return finite_horizon_return(tab.mdp, expert, task, horizon) -
         finite_horizon_return(tab.mdp, inferred, task, horizon);
}

double value_difference(Env& env, const ObsPolicy& expert, const ObsPolicy& inferred,
                        int episodes, int horizon, Rng& rng) {
  Rng expert_rng = rng.stream("vd-expert");
  Rng inferred_rng = rng.stream("vd-inferred");
  return expected_return(env, expert, episodes, horizon, expert_rng) -
         expected_return(env, inferred, episodes, horizon, inferred_rng);
}

double reward_mse(const BasisModel& model, const DemoSet& demos) {
  demos.validate();
  for (const auto& t : demos.trajectories)
    if (t.rewards.size() != t.length())
      throw std::invalid_argument("reward_mse: sealed reward channel missing");
  TransitionBatch batch = demo_batch(demos);
  Eigen::VectorXd pred = model.predict_reward_batch(batch.obs, batch.task, batch.action,
                                                    model.preferences().col(0));
  double mse = 0.0;
  for (int i = 0; i < batch.size(); ++i) {
    double e = pred[i] - batch.reward[i];
    mse += e * e;
  }
  return mse / batch.size();
}

namespace {

// One exact forward sweep of state mass under the policy; calls visit(t, mass)
// before each transition step.
template <typename Visit>
void sweep_mass(const EnumeratedMdp& tab, const PolicyTable& policy, int horizon,
                Visit&& visit) {
  Eigen::VectorXd mass = tab.mdp.initial_dist;
  for (int t = 0; t < horizon; ++t) {
    visit(t, mass);
    Eigen::VectorXd next = Eigen::VectorXd::Zero(tab.mdp.num_states);
    for (int a = 0; a < tab.mdp.num_actions; ++a) {
      Eigen::VectorXd ua = mass.cwiseProduct(policy.probs.col(a));
      next += tab.mdp.transition[a].transpose() * ua;
    }
    mass = std::move(next);
  }
}

}  // namespace

Eigen::VectorXd behavior_distribution_exact(const EnumeratedMdp& tab,
                                            const PolicyTable& policy, int horizon,
                                            int num_events) {
  if (tab.event.size() == 0)
    throw std::invalid_argument("behavior_distribution_exact: no event channel");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_events);
  sweep_mass(tab, policy, horizon, [&](int, const Eigen::VectorXd& mass) {
    for (int a = 0; a < tab.mdp.num_actions; ++a)
      for (int s = 0; s < tab.mdp.num_states; ++s) {
        int e = tab.event(s, a);
        if (e >= 0) counts[e] += mass[s] * policy.probs(s, a);
      }
  });
  double total = counts.sum();
  if (total <= 0.0) return Eigen::VectorXd::Constant(num_events, 1.0 / num_events);
  return counts / total;
}

Eigen::VectorXd lane_occupancy_exact(const EnumeratedMdp& tab, const PolicyTable& policy,
                                     int horizon, int num_lanes) {
  if (tab.state_lane.empty())
    throw std::invalid_argument("lane_occupancy_exact: no lane channel");
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_lanes);
  sweep_mass(tab, policy, horizon, [&](int, const Eigen::VectorXd& mass) {
    for (int s = 0; s < tab.mdp.num_states; ++s)
      if (tab.state_lane[s] >= 0) counts[tab.state_lane[s]] += mass[s];
  });
  double total = counts.sum();
  if (total <= 0.0) return Eigen::VectorXd::Constant(num_lanes, 1.0 / num_lanes);
  return counts / total;
}

Eigen::VectorXd behavior_distribution(Env& env, const ObsPolicy& policy, int episodes,
                                      int horizon, int num_events, Rng& rng) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(num_events);
  for (int e = 0; e < episodes; ++e) {
    Rng ep = rng.stream("behavior", static_cast<uint64_t>(e));
    Observation obs = env.reset(ep);
    for (int t = 0; t < horizon; ++t) {
      Eigen::VectorXd p = policy(obs);
      int a = ep.choice(std::span<const double>(p.data(), p.size()));
      StepOutcome out = env.step(a, ep);
      if (out.event >= 0 && out.event < num_events) counts[out.event] += 1.0;
      obs = std::move(out.obs);
      if (out.done) break;
    }
  }
  double total = counts.sum();
  if (total <= 0.0) return Eigen::VectorXd::Constant(num_events, 1.0 / num_events);
  return counts / total;
}

namespace {

// BC-only IRL for the plain-Q ablation: epochs of shuffled cross-entropy
// batches, no reward recovery.
DqnModel run_bc_dqn(DqnModel model, const DemoSet& demos, const IRLConfig& config) {
  TransitionBatch all = demo_batch(demos);
  const long n = all.size();
  const int B = std::min<long>(config.batch_size, n);
  const int epochs = config.epochs_for(n);
  Rng order_rng = Rng(config.seed).stream("irl-order");

  DqnGrads grads(model);
  AdamState opt_q(model.q_head().params().size());
  AdamState opt_trunk(model.has_trunk() ? model.trunk().params().size() : 0);

  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  TransitionBatch mb;
  mb.obs.resize(all.obs.rows(), B);
  mb.next_obs.resize(all.obs.rows(), B);
  mb.action.resize(B);
  mb.next_action.resize(B);
  mb.task.resize(B);
  mb.reward.resize(B);
  mb.done.resize(B);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    order_rng.shuffle(order);
    for (long start = 0; start + B <= n; start += B) {
      for (int j = 0; j < B; ++j) {
        long i = order[start + j];
        mb.obs.col(j) = all.obs.col(i);
        mb.next_obs.col(j) = all.next_obs.col(i);
        mb.action[j] = all.action[i];
        mb.next_action[j] = all.next_action[i];
        mb.task[j] = all.task[i];
        mb.reward[j] = all.reward[i];
        mb.done[j] = all.done[i];
      }
      loss_bc_dqn(model, mb, grads);
      if (model.has_trunk())
        optimizer_step(model.trunk().params(), grads.trunk, opt_trunk,
                       config.lr * config.bc_weight);
      optimizer_step(model.q_head().params(), grads.q, opt_q,
                     config.lr * config.bc_weight);
    }
  }
  return model;
}

PolicyTable dqn_tabular_policy(const DqnModel& model, const EnumeratedMdp& tab) {
  const int S = tab.mdp.num_states;
  QTable q;
  q.values.resize(S, tab.mdp.num_actions);
  Eigen::MatrixXd X;
  std::vector<int> ids;
  constexpr int kChunk = 4096;
  for (int start = 0; start < S; start += kChunk) {
    int n = std::min(kChunk, S - start);
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), start);
    tab.fill_features(ids, X);
    std::vector<int> tasks(n, -1);
    q.values.middleRows(start, n) = model.q_values_batch(X, tasks).transpose();
  }
  return greedy_policy(q);
}

// Multi-task BC+ITD pre-training on demo sets of the pre-training tasks (the
// IRL-pre-training baseline): same loop as run_irl but task-conditioned.
BasisModel irl_style_pretrain(const BasisSpec& spec, const GridInputs& in,
                              const IRLConfig& irl, int demos_per_task, Rng& rng) {
  const int K = static_cast<int>(in.suite->tasks.size());
  DemoSet merged;
  merged.feature_dim = in.tab->feature_dim;
  for (int k = 0; k < K; ++k) {
    Expert expert_k = make_exact_expert(*in.tab, k, in.horizon);
    Rng demo_rng = rng.stream("irl-pretrain-demos", static_cast<uint64_t>(k));
    DemoSet dk =
        sample_demos(*in.tab, expert_k, k, demos_per_task, in.horizon, demo_rng);
    for (auto& t : dk.trajectories) {
      t.rewards.clear();  // reward-free, but keep the task id via batch patching
      merged.trajectories.push_back(std::move(t));
    }
  }
  BasisSpec pre_spec = spec;
  pre_spec.num_prefs = K;
  BasisModel model(pre_spec);
  Rng init_rng = rng.stream("irl-pretrain-init");
  model.init(init_rng);

  TransitionBatch all = demo_batch(merged);
  // demo_batch hides task identity; restore it (pre-training tasks are known)
  long col = 0;
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < demos_per_task; ++i) {
      long len =
          static_cast<long>(merged.trajectories[k * demos_per_task + i].length());
      for (long s = 0; s < len; ++s) all.task[col++] = k;
    }

  const long n = all.size();
  const int B = std::min<long>(irl.batch_size, n);
  const int epochs = irl.epochs_for(n);
  Rng order_rng = rng.stream("irl-pretrain-order");
  BasisGrads grads(model);
  AdamState bc_psi(model.psi().params().size()), bc_w(model.preferences().size());
  AdamState itd_psi(model.psi().params().size()), itd_phi(model.phi().params().size());
  AdamState bc_trunk(model.has_trunk() ? model.trunk().params().size() : 0);
  AdamState itd_trunk(bc_trunk.m.size());
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  TransitionBatch mb;
  mb.obs.resize(all.obs.rows(), B);
  mb.next_obs.resize(all.obs.rows(), B);
  mb.action.resize(B);
  mb.next_action.resize(B);
  mb.task.resize(B);
  mb.reward.resize(B);
  mb.done.resize(B);
  long gstep = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    order_rng.shuffle(order);
    for (long start = 0; start + B <= n; start += B) {
      for (int j = 0; j < B; ++j) {
        long i = order[start + j];
        mb.obs.col(j) = all.obs.col(i);
        mb.next_obs.col(j) = all.next_obs.col(i);
        mb.action[j] = all.action[i];
        mb.next_action[j] = all.next_action[i];
        mb.task[j] = all.task[i];
        mb.reward[j] = all.reward[i];
        mb.done[j] = all.done[i];
      }
      loss_bc(model, mb, grads);
      if (model.has_trunk())
        optimizer_step(model.trunk().params(), grads.trunk, bc_trunk, irl.lr);
      optimizer_step(model.psi().params(), grads.psi, bc_psi, irl.lr);
      optimizer_step(
          std::span<double>(model.preferences().data(), model.preferences().size()),
          std::span<const double>(grads.w.data(), grads.w.size()), bc_w, irl.lr);
      loss_itd(model, mb, irl.gamma, grads, /*freeze_phi=*/false);
      if (model.has_trunk())
        optimizer_step(model.trunk().params(), grads.trunk, itd_trunk, irl.lr);
      optimizer_step(model.psi().params(), grads.psi, itd_psi, irl.lr);
      optimizer_step(model.phi().params(), grads.phi, itd_phi, irl.lr);
      if (++gstep % irl.target_update_interval == 0) model.sync_target();
    }
  }
  return model;
}

}  // namespace

MetricsReport run_experiment_grid(const GridInputs& in, const IRLConfig& irl,
                                  const EvalConfig& cfg) {
  cfg.validate();
  irl.validate();
  if (!in.tab || !in.expert || !in.suite)
    throw std::invalid_argument("grid: tab, expert, and suite are required");
  for (Variant v : cfg.variants) {
    if ((v == Variant::basis) && !in.basis)
      throw std::invalid_argument("grid: basis variant needs a pre-trained model");
    if (v == Variant::no_sf_dqn && !in.dqn)
      throw std::invalid_argument("grid: no_sf_dqn variant needs a DQN model");
    if ((v == Variant::no_pretraining || v == Variant::irl_pretraining) && !in.basis)
      throw std::invalid_argument("grid: variant needs the basis spec for its init");
  }

  const int max_n = *std::max_element(cfg.demo_counts.begin(), cfg.demo_counts.end());
  const int num_events = in.tab->event.size() > 0
                             ? in.tab->event.maxCoeff() + 1
                             : static_cast<int>(in.suite->tasks.size());
  const bool lane_mode = in.tab->event.size() == 0;

  MetricsReport report;
  report.env = in.env_name;
  report.expert_return =
      finite_horizon_return(in.tab->mdp, in.expert->policy, in.test_task, in.horizon);
  report.notes =
      "undiscounted horizon returns; exact tabular evaluation; reward_mse over the "
      "full per-seed demo set";

  Rng root(cfg.seed);
  for (int s = 0; s < cfg.seeds; ++s) {
    Rng seed_rng = root.stream("grid-seed", static_cast<uint64_t>(s));
    Rng demo_rng = seed_rng.stream("demos");
    DemoSet demos = sample_demos(*in.tab, *in.expert, in.test_task, max_n, in.horizon,
                                 demo_rng);
    std::optional<BasisModel> irl_pretrained;  // built lazily per seed

    for (Variant v : cfg.variants) {
      for (int n_demos : cfg.demo_counts) {
        DemoSet subset = demo_prefix(demos, n_demos);
        IRLConfig cell = irl;
        cell.seed = seed_rng.stream(variant_name(v), static_cast<uint64_t>(n_demos))
                        .next_u64();
        ReportRow row;
        row.variant = variant_name(v);
        row.env = in.env_name;
        row.n_demos = n_demos;
        row.seed = static_cast<uint64_t>(s);

        if (v == Variant::no_sf_dqn) {
          DqnModel tuned = run_bc_dqn(*in.dqn, subset, cell);
          PolicyTable pol = dqn_tabular_policy(tuned, *in.tab);
          row.value_difference = value_difference_exact(*in.tab, in.expert->policy, pol,
                                                        in.test_task, in.horizon);
          row.reward_mse = std::numeric_limits<double>::quiet_NaN();
          row.dist = lane_mode ? lane_occupancy_exact(*in.tab, pol, in.horizon,
                                                      num_events)
                               : behavior_distribution_exact(*in.tab, pol, in.horizon,
                                                             num_events);
        } else {
          BasisModel init = [&]() {
            switch (v) {
              case Variant::basis: return make_irl_model(*in.basis);
              case Variant::no_pretraining: {
                BasisSpec spec = in.basis->spec();
                spec.num_prefs = 1;
                BasisModel m(spec);
                Rng init_rng = seed_rng.stream("fresh-init", n_demos);
                m.init(init_rng);
                return m;
              }
              case Variant::irl_pretraining: {
                if (!irl_pretrained) {
                  BasisSpec spec = in.basis->spec();
                  Rng pre_rng = seed_rng.stream("irl-pretrain");
                  irl_pretrained = irl_style_pretrain(
                      spec, in, irl, cfg.irl_pretrain_demos_per_task, pre_rng);
                }
                return make_irl_model(*irl_pretrained);
              }
              default: throw std::logic_error("unreachable");
            }
          }();
          IRLResult res = run_irl(std::move(init), subset, cell);
          PolicyTable pol = tabular_policy(res.model, *in.tab,
                                           res.model.preferences().col(0), -1,
                                           PolicyMode::greedy);
          row.value_difference = value_difference_exact(*in.tab, in.expert->policy, pol,
                                                        in.test_task, in.horizon);
          row.reward_mse = reward_mse(res.model, demos);
          row.dist = lane_mode ? lane_occupancy_exact(*in.tab, pol, in.horizon,
                                                      num_events)
                               : behavior_distribution_exact(*in.tab, pol, in.horizon,
                                                             num_events);
        }
        report.rows.push_back(std::move(row));
      }
    }

    if (cfg.phi_ablation && in.basis) {
      DemoSet subset = demo_prefix(demos, max_n);
      IRLConfig cell = irl;
      cell.freeze_phi = false;
      cell.seed = seed_rng.stream("basis_unfrozen_phi", static_cast<uint64_t>(max_n))
                      .next_u64();
      IRLResult res = run_irl(make_irl_model(*in.basis), subset, cell);
      PolicyTable pol = tabular_policy(res.model, *in.tab,
                                       res.model.preferences().col(0), -1,
                                       PolicyMode::greedy);
      ReportRow row;
      row.variant = "basis_unfrozen_phi";
      row.env = in.env_name;
      row.n_demos = max_n;
      row.seed = static_cast<uint64_t>(s);
      row.value_difference = value_difference_exact(*in.tab, in.expert->policy, pol,
                                                    in.test_task, in.horizon);
      row.reward_mse = reward_mse(res.model, demos);
      row.dist = lane_mode
                     ? lane_occupancy_exact(*in.tab, pol, in.horizon, num_events)
                     : behavior_distribution_exact(*in.tab, pol, in.horizon, num_events);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

void write_report_csv(const MetricsReport& report, const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("write_report_csv: cannot open " + path.string());
  int dist_len = report.rows.empty() ? 0 : static_cast<int>(report.rows[0].dist.size());
  std::fprintf(f, "variant,env,N_demos,seed,value_difference,reward_mse");
  for (int i = 0; i < dist_len; ++i) std::fprintf(f, ",dist_%d", i);
  std::fprintf(f, "\n# expert_return=%.9g env=%s notes=%s\n", report.expert_return,
               report.env.c_str(), report.notes.c_str());
  for (const auto& row : report.rows) {
    std::fprintf(f, "%s,%s,%d,%llu,%.9g,%.9g", row.variant.c_str(), row.env.c_str(),
                 row.n_demos, static_cast<unsigned long long>(row.seed),
                 row.value_difference, row.reward_mse);
    for (Eigen::Index i = 0; i < row.dist.size(); ++i)
      std::fprintf(f, ",%.9g", row.dist[i]);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};

struct Curve {
  std::string label;
  std::vector<double> x, y;  // mean over seeds at each x
};

// Mean metric per (variant, N) on a log-x axis; one polyline per variant.
void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::vector<Curve>& curves) {
  FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw std::runtime_error("write_report_plots: cannot open " + path.string());
  const int W = 640, H = 420, ml = 70, mr = 160, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& c : curves)
    for (size_t i = 0; i < c.x.size(); ++i) {
      xmin = std::min(xmin, c.x[i]);
      xmax = std::max(xmax, c.x[i]);
      ymin = std::min(ymin, c.y[i]);
      ymax = std::max(ymax, c.y[i]);
    }
  if (xmin > xmax) { xmin = 1; xmax = 10; ymin = 0; ymax = 1; }
  if (ymax - ymin < 1e-12) { ymax += 1.0; ymin -= 1.0; }
  double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto px = [&](double x) {
    double lo = std::log(xmin), hi = std::log(xmax);
    double t = hi > lo ? (std::log(x) - lo) / (hi - lo) : 0.5;
    return ml + t * (W - ml - mr);
  };
  auto py = [&](double y) {
    return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb);
  };
  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
               "font-family=\"sans-serif\" font-size=\"12\">\n",
               W, H);
  std::fprintf(f, "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n", W, H);
  std::fprintf(f, "<text x=\"%d\" y=\"24\" font-size=\"15\">%s</text>\n", ml,
               title.c_str());
  std::fprintf(f,
               "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n"
               "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
               ml, H - mb, W - mr, H - mb, ml, mt, ml, H - mb);
  for (int i = 0; i <= 4; ++i) {
    double y = ymin + (ymax - ymin) * i / 4.0;
    std::fprintf(f,
                 "<text x=\"%d\" y=\"%.1f\" text-anchor=\"end\">%.3g</text>"
                 "<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"#ddd\"/>\n",
                 ml - 6, py(y) + 4, ml, py(y), W - mr, py(y));
  }
  std::set<double> xticks;
  for (const auto& c : curves) xticks.insert(c.x.begin(), c.x.end());
  for (double x : xticks)
    std::fprintf(f, "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%g</text>\n",
                 px(x), H - mb + 18, x);
  std::fprintf(f, "<text x=\"%d\" y=\"%d\">demonstrations</text>\n", (W - mr) / 2,
               H - 10);
  int ci = 0;
  for (const auto& c : curves) {
    const char* color = kPalette[ci % 6];
    std::fprintf(f, "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"2\" points=\"",
                 color);
    for (size_t i = 0; i < c.x.size(); ++i)
      std::fprintf(f, "%.1f,%.1f ", px(c.x[i]), py(c.y[i]));
    std::fprintf(f, "\"/>\n");
    for (size_t i = 0; i < c.x.size(); ++i)
      std::fprintf(f, "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"3\" fill=\"%s\"/>\n",
                   px(c.x[i]), py(c.y[i]), color);
    std::fprintf(f,
                 "<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                 "<text x=\"%d\" y=\"%d\">%s</text>\n",
                 W - mr + 10, mt + 18 * ci, color, W - mr + 28, mt + 18 * ci + 10,
                 c.label.c_str());
    ++ci;
  }
  std::fprintf(f, "</svg>\n");
  std::fclose(f);
}

}  // namespace

void write_report_plots(const MetricsReport& report,
                        const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::string> variants;
  std::set<int> ns;
  for (const auto& row : report.rows) {
    if (std::find(variants.begin(), variants.end(), row.variant) == variants.end())
      variants.push_back(row.variant);
    ns.insert(row.n_demos);
  }
  auto mean_of = [&](const std::string& variant, int n, auto&& metric,
                     double& out) -> bool {
    double sum = 0.0;
    int count = 0;
    for (const auto& row : report.rows)
      if (row.variant == variant && row.n_demos == n) {
        double v = metric(row);
        if (std::isfinite(v)) {
          sum += v;
          ++count;
        }
      }
    if (count == 0) return false;
    out = sum / count;
    return true;
  };

  std::vector<Curve> vd_curves, mse_curves;
  for (const auto& variant : variants) {
    Curve vd{variant, {}, {}}, mse{variant, {}, {}};
    for (int n : ns) {
      double m;
      if (mean_of(variant, n, [](const ReportRow& r) { return r.value_difference; }, m)) {
        vd.x.push_back(n);
        vd.y.push_back(m);
      }
      if (mean_of(variant, n, [](const ReportRow& r) { return r.reward_mse; }, m)) {
        mse.x.push_back(n);
        mse.y.push_back(m);
      }
    }
    if (!vd.x.empty()) vd_curves.push_back(std::move(vd));
    if (!mse.x.empty()) mse_curves.push_back(std::move(mse));
  }
  write_curve_svg(out_dir / "value_difference.svg",
                  "Value difference vs. demonstrations", vd_curves);
  write_curve_svg(out_dir / "reward_mse.svg", "Reward MSE vs. demonstrations",
                  mse_curves);

  // Behavior-distribution bars at the largest demo count, mean over seeds.
  const int max_n = ns.empty() ? 0 : *ns.rbegin();
  int dist_len = 0;
  for (const auto& row : report.rows)
    dist_len = std::max<int>(dist_len, static_cast<int>(row.dist.size()));
  FILE* f = std::fopen((out_dir / "behavior_distribution.svg").string().c_str(), "w");
  if (!f) throw std::runtime_error("write_report_plots: cannot open bars file");
  const int W = 640, H = 360, ml = 60, mt = 40, mb = 70;
  std::fprintf(f,
               "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
               "font-family=\"sans-serif\" font-size=\"12\">\n"
               "<rect width=\"%d\" height=\"%d\" fill=\"white\"/>\n"
               "<text x=\"%d\" y=\"24\" font-size=\"15\">Behavior distribution at "
               "N=%d</text>\n",
               W, H, W, H, ml, max_n);
  int groups = static_cast<int>(variants.size());
  double group_w = (W - ml - 20) / std::max(1, groups);
  for (int g = 0; g < groups; ++g) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dist_len);
    int count = 0;
    for (const auto& row : report.rows)
      if (row.variant == variants[g] && row.n_demos == max_n &&
          row.dist.size() == dist_len) {
        mean += row.dist;
        ++count;
      }
    if (count == 0) continue;
    mean /= count;
    double bar_w = group_w / (dist_len + 1);
    for (int i = 0; i < dist_len; ++i) {
      double h = mean[i] * (H - mt - mb);
      double x = ml + g * group_w + i * bar_w;
      std::fprintf(f,
                   "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" "
                   "fill=\"%s\"/>\n",
                   x, H - mb - h, bar_w * 0.9, h, kPalette[i % 6]);
      std::fprintf(f,
                   "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\" "
                   "font-size=\"10\">%.2f</text>\n",
                   x + bar_w * 0.45, H - mb - 4 - static_cast<int>(h), mean[i]);
    }
    std::fprintf(f,
                 "<text x=\"%.1f\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                 ml + g * group_w + group_w / 2 - bar_w / 2, H - mb + 18,
                 variants[g].c_str());
  }
  std::fprintf(f, "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n",
               ml, H - mb, W - 20, H - mb);
  std::fprintf(f, "</svg>\n");
  std::fclose(f);
}

MetricsReport read_report_csv(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "r");
  if (!f) throw std::runtime_error("read_report_csv: cannot open " + path.string());
  MetricsReport report;
  char line[4096];
  bool header = true;
  while (std::fgets(line, sizeof line, f)) {
    std::string s(line);
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    if (s.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    if (s[0] == '#') {
      std::sscanf(s.c_str(), "# expert_return=%lf", &report.expert_return);
      size_t env_pos = s.find("env=");
      if (env_pos != std::string::npos) {
        size_t end = s.find(' ', env_pos);
        report.env = s.substr(env_pos + 4, end - env_pos - 4);
      }
      continue;
    }
    ReportRow row;
    std::vector<std::string> cols;
    size_t start = 0;
    while (true) {
      size_t comma = s.find(',', start);
      cols.push_back(s.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols.size() < 6) throw std::runtime_error("read_report_csv: short row");
    row.variant = cols[0];
    row.env = cols[1];
    row.n_demos = std::atoi(cols[2].c_str());
    row.seed = std::strtoull(cols[3].c_str(), nullptr, 10);
    row.value_difference = std::strtod(cols[4].c_str(), nullptr);
    row.reward_mse = std::strtod(cols[5].c_str(), nullptr);
    row.dist.resize(cols.size() - 6);
    for (size_t i = 6; i < cols.size(); ++i)
      row.dist[i - 6] = std::strtod(cols[i].c_str(), nullptr);
    report.rows.push_back(std::move(row));
  }
  std::fclose(f);
  return report;
}

}  // namespace basis

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>

#include "basis/checkpoint.hpp"
#include "basis/config.hpp"

namespace fs = std::filesystem;
using namespace basis;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitOracle = 5;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file (INI)");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "root seed override (re-keys all stages)");
  cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

RunConfig load_resolved(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? parse_run_config("")
                                           : load_run_config(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    reseed_from_root(cfg);
  }
  return cfg;
}

void say(const CommonArgs& args, const char* fmt, ...) {
  if (args.quiet) return;
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stdout, fmt, ap);
  va_end(ap);
  std::fputc('\n', stdout);
  std::fflush(stdout);
}

fs::path prepare_out(const CommonArgs& args, const RunConfig& cfg) {
  fs::path out(args.out_dir);
  fs::create_directories(out);
  write_run_config(cfg, out / "config.ini");
  return out;
}

int env_horizon(const RunConfig& cfg) {
  return cfg.env.kind == EnvKind::fruit_grid ? cfg.env.fruit.horizon
                                             : cfg.env.lane.horizon;
}

struct TabularSetup {
  TaskSuite suite;
  EnumeratedMdp tab;
  int test_task = 0;  // reward-table index of the held-out task
  int horizon = 0;
};

TabularSetup make_tabular(const RunConfig& cfg) {
  TaskSuite suite = make_task_suite(cfg.env, cfg.pretrain.K, cfg.pretrain.seed);
  std::vector<TaskSpec> tasks = suite.tasks;
  tasks.push_back(suite.test_task);
  int test_task = static_cast<int>(suite.tasks.size());
  EnumeratedMdp tab =
      enumerate_tabular(cfg.env, tasks, cfg.pretrain.gamma, cfg.enumeration_cap);
  return {std::move(suite), std::move(tab), test_task, env_horizon(cfg)};
}

void require_input(const fs::path& path, const char* what) {
  if (!fs::exists(path))
    throw InputFileError(std::string(what) + " not found: " + path.string());
}

int cmd_pretrain(const CommonArgs& args) {
  RunConfig cfg = load_resolved(args);
  fs::path out = prepare_out(args, cfg);
  say(args, "pretraining basis model (%d iterations)...", cfg.pretrain.total_iterations);
  PretrainResult res = run_pretraining(cfg.pretrain);
  save_checkpoint(res.model, out / "pretrain.ckpt");

  FILE* f = std::fopen((out / "pretrain_log.csv").string().c_str(), "w");
  if (!f) throw InputFileError("cannot write pretrain log");
  std::fprintf(f, "iteration,task,episode_return,loss_q,loss_reward,loss_itd\n");
  for (const auto& row : res.log)
    std::fprintf(f, "%d,%d,%.9g,%.9g,%.9g,%.9g\n", row.iteration, row.task,
                 row.episode_return, row.loss_q, row.loss_reward, row.loss_itd);
  std::fclose(f);

  double held = std::numeric_limits<double>::quiet_NaN();
  if (res.held_out.size() > 0) {
    BasisGrads grads(res.model);
    held = loss_reward(res.model, res.held_out, grads);
  }
  say(args, "held-out reward loss: %.6g", held);

  bool want_dqn = std::find(cfg.eval.variants.begin(), cfg.eval.variants.end(),
                            Variant::no_sf_dqn) != cfg.eval.variants.end();
  if (want_dqn) {
    say(args, "pretraining dqn baseline...");
    DqnPretrainResult dres = run_dqn_pretraining(cfg.pretrain);
    save_checkpoint(dres.model, out / "pretrain_dqn.ckpt");
    say(args, "wrote %s and %s", (out / "pretrain.ckpt").string().c_str(),
        (out / "pretrain_dqn.ckpt").string().c_str());
  } else {
    say(args, "wrote %s", (out / "pretrain.ckpt").string().c_str());
  }
  return kExitOk;
}

int cmd_expert(const CommonArgs& args) {
  RunConfig cfg = load_resolved(args);
  fs::path out = prepare_out(args, cfg);
  say(args, "enumerating tabular image...");
  TabularSetup ts = make_tabular(cfg);
  Expert expert =
      make_exact_expert(ts.tab, ts.test_task, ts.horizon, cfg.expert.temperature);
  FILE* f = std::fopen((out / "expert.txt").string().c_str(), "w");
  if (!f) throw InputFileError("cannot write expert summary");
  std::fprintf(f, "expert_return=%.9g\nstates=%d\ntask=%d\nhorizon=%d\n",
               expert.reference_return, ts.tab.mdp.num_states, ts.test_task,
               ts.horizon);
  std::fclose(f);
  say(args, "expert return %.4f over %d states", expert.reference_return,
      ts.tab.mdp.num_states);
  return kExitOk;
}

int cmd_gen_demos(const CommonArgs& args) {
  RunConfig cfg = load_resolved(args);
  fs::path out = prepare_out(args, cfg);
  say(args, "enumerating tabular image...");
  TabularSetup ts = make_tabular(cfg);
  Expert expert =
      make_exact_expert(ts.tab, ts.test_task, ts.horizon, cfg.expert.temperature);
  Rng demo_rng(cfg.expert.seed);
  DemoSet demos = sample_demos(ts.tab, expert, ts.test_task, cfg.expert.demo_count,
                               ts.horizon, demo_rng);
  write_demos(demos, out / "demos.txt");
  say(args, "wrote %zu demonstrations (%zu steps) to %s", demos.size(),
      demos.total_steps(), (out / "demos.txt").string().c_str());
  return kExitOk;
}

int cmd_irl(const CommonArgs& args, const std::string& ckpt_flag,
            const std::string& demos_flag) {
  RunConfig cfg = load_resolved(args);
  fs::path out = prepare_out(args, cfg);
  fs::path ckpt = ckpt_flag.empty() ? out / "pretrain.ckpt" : fs::path(ckpt_flag);
  fs::path demo_path = demos_flag.empty() ? out / "demos.txt" : fs::path(demos_flag);
  require_input(ckpt, "checkpoint");
  require_input(demo_path, "demo file");

  BasisModel basis_model = load_basis_checkpoint(ckpt);
  DemoSet demos = read_demos(demo_path);
  say(args, "running irl on %zu demonstrations...", demos.size());
  IRLResult res = run_irl(make_irl_model(basis_model), demos, cfg.irl);
  save_checkpoint(res.model, out / "irl.ckpt");
  if (!res.log.empty())
    say(args, "final epoch: bc loss %.6g, itd loss %.6g", res.log.back().bc_loss,
        res.log.back().itd_loss);

  FILE* f = std::fopen((out / "irl_log.csv").string().c_str(), "w");
  if (!f) throw InputFileError("cannot write irl log");
  std::fprintf(f, "epoch,bc_loss,itd_loss\n");
  for (const auto& row : res.log)
    std::fprintf(f, "%d,%.9g,%.9g\n", row.epoch, row.bc_loss, row.itd_loss);
  std::fclose(f);
  say(args, "wrote %s", (out / "irl.ckpt").string().c_str());
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& ckpt_flag,
             const std::string& dqn_flag) {
  RunConfig cfg = load_resolved(args);
  fs::path out = prepare_out(args, cfg);
  fs::path ckpt = ckpt_flag.empty() ? out / "pretrain.ckpt" : fs::path(ckpt_flag);
  fs::path dqn_ckpt = dqn_flag.empty() ? out / "pretrain_dqn.ckpt" : fs::path(dqn_flag);
  require_input(ckpt, "checkpoint");
  BasisModel basis_model = load_basis_checkpoint(ckpt);

  std::optional<DqnModel> dqn;
  bool wants_dqn = false;
  for (Variant v : cfg.eval.variants) wants_dqn |= (v == Variant::no_sf_dqn);
  if (wants_dqn) {
    require_input(dqn_ckpt, "dqn checkpoint");
    dqn.emplace(load_dqn_checkpoint(dqn_ckpt));
  }

  say(args, "enumerating tabular image...");
  TabularSetup ts = make_tabular(cfg);
  Expert expert =
      make_exact_expert(ts.tab, ts.test_task, ts.horizon, cfg.expert.temperature);

  GridInputs in;
  in.basis = &basis_model;
  in.dqn = dqn ? &*dqn : nullptr;
  in.tab = &ts.tab;
  in.expert = &expert;
  in.suite = &ts.suite;
  in.test_task = ts.test_task;
  in.horizon = ts.horizon;
  in.env_name = env_kind_name(cfg.env.kind);

  say(args, "running experiment grid (%d seeds x %zu variants x %zu demo counts)...",
      cfg.eval.seeds, cfg.eval.variants.size(), cfg.eval.demo_counts.size());
  MetricsReport report = run_experiment_grid(in, cfg.irl, cfg.eval);
  write_report_csv(report, out / "report.csv");
  write_report_plots(report, out);

  if (!args.quiet) {
    std::map<std::string, std::map<int, std::pair<double, int>>> agg;
    for (const auto& row : report.rows) {
      auto& cell = agg[row.variant][row.n_demos];
      cell.first += row.value_difference;
      cell.second += 1;
    }
    std::printf("expert return: %.4f\n", report.expert_return);
    for (const auto& [variant, by_n] : agg) {
      std::printf("%-22s", variant.c_str());
      for (const auto& [n, cell] : by_n)
        std::printf("  N=%d vd=%.3f", n, cell.first / cell.second);
      std::printf("\n");
    }
  }
  say(args, "wrote %s", (out / "report.csv").string().c_str());
  return kExitOk;
}

int cmd_report(const CommonArgs& args) {
  fs::path out(args.out_dir);
  fs::path csv = out / "report.csv";
  require_input(csv, "report");
  MetricsReport report = read_report_csv(csv);
  write_report_plots(report, out);
  say(args, "rendered plots from %s", csv.string().c_str());
  return kExitOk;
}

// --- oracle suite -----------------------------------------------------------

TabularMDP random_mdp(int S, int A, int num_tasks, double gamma, Rng& rng) {
  TabularMDP mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.gamma = gamma;
  mdp.transition.resize(A);
  for (int a = 0; a < A; ++a) {
    Eigen::MatrixXd dense(S, S);
    for (int s = 0; s < S; ++s) {
      for (int t = 0; t < S; ++t) dense(s, t) = rng.uniform();
      dense.row(s) /= dense.row(s).sum();
    }
    mdp.transition[a] = dense.sparseView();
  }
  mdp.reward.resize(num_tasks);
  for (auto& r : mdp.reward) {
    r.resize(S, A);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) r(s, a) = rng.uniform();
  }
  mdp.initial_dist = Eigen::VectorXd::Constant(S, 1.0 / S);
  return mdp;
}

bool oracle_soft_vi(const CommonArgs& args, Rng& rng) {
  Rng mdp_rng = rng.stream("soft-vi");
  TabularMDP mdp = random_mdp(12, 3, 1, 0.9, mdp_rng);
  QTable q = soft_value_iteration(mdp, 0, 1e-8);
  Eigen::MatrixXd next;
  double residual = soft_backup(mdp, 0, q.values, next);
  bool pass = residual < 1e-6;
  say(args, "[%s] soft value iteration residual %.3g", pass ? "ok" : "FAIL", residual);

  // 3-state absorbing chain: exact backward induction, no iteration.
  TabularMDP chain;
  chain.num_states = 3;
  chain.num_actions = 2;
  chain.gamma = 0.9;
  chain.transition.resize(2);
  Eigen::MatrixXd stay = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd advance = Eigen::MatrixXd::Zero(3, 3);
  advance(0, 1) = 1.0;
  advance(1, 2) = 1.0;
  advance(2, 2) = 1.0;
  chain.transition[0] = stay.sparseView();
  chain.transition[1] = advance.sparseView();
  chain.reward.resize(1);
  chain.reward[0].resize(3, 2);
  chain.reward[0] << 0.1, 0.4, 0.2, 1.0, 0.0, 0.0;
  chain.terminal = {0, 0, 1};
  chain.initial_dist = Eigen::VectorXd::Zero(3);
  chain.initial_dist[0] = 1.0;

  QTable qc = soft_value_iteration(chain, 0, 1e-12);
  // state 1 backs up only the terminal; state 0 then backs up state 1
  double v2 = 0.0;
  double q1_stay_expected = 0.0, q1_adv = chain.reward[0](1, 1) + 0.9 * v2;
  // stay at 1 self-loops, so solve q = r + g*lse([q, q_adv]) by iteration-free
  // fixed point: v1 solves v = lse(r_stay + g v, q_adv)
  double v1 = 0.0;
  for (int i = 0; i < 200; ++i) {
    double qs = chain.reward[0](1, 0) + 0.9 * v1;
    double m = std::max(qs, q1_adv);
    v1 = m + std::log(std::exp(qs - m) + std::exp(q1_adv - m));
  }
  q1_stay_expected = chain.reward[0](1, 0) + 0.9 * v1;
  double p_adv_direct =
      std::exp(q1_adv) / (std::exp(q1_adv) + std::exp(q1_stay_expected));
  PolicyTable pol = softmax_policy(qc);
  double p_adv = pol.probs(1, 1);
  bool chain_pass = std::abs(p_adv - p_adv_direct) < 1e-9;
  say(args, "[%s] chain softmax probability |delta| %.3g", chain_pass ? "ok" : "FAIL",
      std::abs(p_adv - p_adv_direct));
  return pass && chain_pass;
}

bool oracle_sf(const CommonArgs& args, Rng& rng) {
  Rng sf_rng = rng.stream("sf");
  const int S = 6, A = 2, d = 4;
  TabularMDP mdp = random_mdp(S, A, 1, 0.9, sf_rng);
  PsiTable phi;
  phi.values.resize(A);
  for (int a = 0; a < A; ++a) {
    phi.values[a].resize(S, d);
    for (int s = 0; s < S; ++s)
      for (int j = 0; j < d; ++j) phi.values[a](s, j) = sf_rng.uniform();
  }
  Eigen::VectorXd w(d);
  for (int j = 0; j < d; ++j) w[j] = sf_rng.uniform() - 0.5;
  for (int a = 0; a < A; ++a)
    for (int s = 0; s < S; ++s) mdp.reward[0](s, a) = phi.values[a].row(s).dot(w);

  PolicyTable policy;
  policy.probs.resize(S, A);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) policy.probs(s, a) = sf_rng.uniform() + 0.1;
    policy.probs.row(s) /= policy.probs.row(s).sum();
  }
  PsiTable psi = exact_successor_features(mdp, policy, phi, mdp.gamma);
  Eigen::VectorXd v = policy_values(mdp, policy, 0);
  double worst = 0.0;
  for (int a = 0; a < A; ++a) {
    Eigen::VectorXd q_direct =
        mdp.reward[0].col(a) + mdp.gamma * (mdp.transition[a] * v);
    Eigen::VectorXd q_sf = psi.values[a] * w;
    worst = std::max(worst, (q_direct - q_sf).cwiseAbs().maxCoeff());
  }
  bool pass = worst < 1e-8;
  say(args, "[%s] successor features vs policy evaluation |delta| %.3g",
      pass ? "ok" : "FAIL", worst);
  return pass;
}

bool oracle_gradcheck(const CommonArgs& args, Rng& rng) {
  Rng gc_rng = rng.stream("gradcheck");
  BasisSpec spec;
  spec.feature_dim = 5;
  spec.task_channel = 2;
  spec.num_prefs = 2;
  spec.d = 3;
  spec.num_actions = 3;
  spec.head_hidden = {8};
  // smooth activation keeps finite differences meaningful at h = 1e-5
  spec.activation = Activation::tanh;
  BasisModel model(spec);
  model.init(gc_rng);
  for (int i = 0; i < model.preferences().size(); ++i)
    model.preferences().data()[i] = gc_rng.normal() * 0.5;
  Rng tgt_rng = gc_rng.stream("target");
  // desync the target so loss_itd has a nontrivial bootstrap
  model.psi_target().init_uniform(tgt_rng);

  const int B = 6;
  TransitionBatch batch;
  batch.obs.resize(spec.feature_dim, B);
  batch.next_obs.resize(spec.feature_dim, B);
  for (int i = 0; i < B; ++i) {
    for (int j = 0; j < spec.feature_dim; ++j) {
      batch.obs(j, i) = gc_rng.uniform();
      batch.next_obs(j, i) = gc_rng.uniform();
    }
    batch.action.push_back(gc_rng.uniform_int(spec.num_actions));
    batch.next_action.push_back(gc_rng.uniform_int(spec.num_actions));
    batch.task.push_back(gc_rng.uniform_int(spec.task_channel));
    batch.done.push_back(i == B - 1 ? 1 : 0);
  }
  batch.reward.resize(B);
  for (int i = 0; i < B; ++i) batch.reward[i] = gc_rng.normal();

  BasisGrads grads(model);
  bool all = true;
  auto probe = [&](const char* name, auto&& loss_fn, ParamVector& params,
                   const GradBuffer& block) {
    loss_fn();
    Rng probe_rng = gc_rng.stream(name);
    double err = gradcheck(params, block.flat(), [&] { return loss_fn(); }, 24,
                           probe_rng);
    bool pass = err < 1e-4;
    all &= pass;
    say(args, "[%s] gradcheck %s rel err %.3g", pass ? "ok" : "FAIL", name, err);
  };

  probe("loss_q/psi", [&] { return loss_q(model, batch, 0.9, 1.0, grads); },
        model.psi().params(), grads.psi);
  probe("loss_reward/phi", [&] { return loss_reward(model, batch, grads); },
        model.phi().params(), grads.phi);
  probe("loss_itd/psi", [&] { return loss_itd(model, batch, 0.9, grads); },
        model.psi().params(), grads.psi);
  probe("loss_bc/psi", [&] { return loss_bc(model, batch, grads); },
        model.psi().params(), grads.psi);

  auto zero_block = [&](const char* name, auto&& loss_fn, const GradBuffer& block) {
    loss_fn();
    double mx = 0.0;
    for (double g : block.flat()) mx = std::max(mx, std::abs(g));
    bool pass = mx == 0.0;
    all &= pass;
    say(args, "[%s] stop-gradient %s max |g| %.3g", pass ? "ok" : "FAIL", name, mx);
  };
  zero_block("loss_q/phi", [&] { return loss_q(model, batch, 0.9, 1.0, grads); },
             grads.phi);
  zero_block("loss_itd/phi", [&] { return loss_itd(model, batch, 0.9, grads); },
             grads.phi);
  zero_block("loss_bc/phi", [&] { return loss_bc(model, batch, grads); }, grads.phi);
  return all;
}

bool oracle_enumeration(const CommonArgs& args, Rng& rng) {
  EnvConfig env_cfg;
  env_cfg.kind = EnvKind::fruit_grid;
  env_cfg.fruit.grid_size = 3;
  env_cfg.fruit.colors = 2;
  env_cfg.fruit.fruits_per_color = 1;
  env_cfg.fruit.horizon = 40;
  // respawn off makes the dynamics deterministic, so every visited
  // state-action cell can be checked exactly against its transition row
  env_cfg.fruit.respawn = false;
  TaskSuite suite = make_task_suite(env_cfg, 2, 0);
  std::vector<TaskSpec> tasks = suite.tasks;
  tasks.push_back(suite.test_task);
  EnumeratedMdp tab = enumerate_tabular(env_cfg, tasks, 0.9, 200000);
  const int S = tab.mdp.num_states;
  const int A = tab.mdp.num_actions;

  Eigen::MatrixXd X;
  std::vector<int> ids(S);
  std::iota(ids.begin(), ids.end(), 0);
  tab.fill_features(ids, X);
  std::unordered_map<std::string, int> by_key;
  auto key_of = [&](const Eigen::VectorXd& f) {
    std::string k(f.size(), '0');
    for (Eigen::Index j = 0; j < f.size(); ++j) k[j] = f[j] > 0.5 ? '1' : '0';
    return k;
  };
  for (int s = 0; s < S; ++s) by_key[key_of(X.col(s))] = s;

  auto env = make_env(env_cfg);
  env->set_task(suite.test_task, 2, -1);
  Rng env_rng = rng.stream("enumeration");
  std::map<std::pair<int, int>, std::map<int, int>> counts;
  int unmatched = 0;
  for (int episode = 0; episode < 1500; ++episode) {
    Observation obs = env->reset(env_rng);
    auto it = by_key.find(key_of(obs.features));
    if (it == by_key.end()) {
      ++unmatched;
      break;
    }
    int s = it->second;
    for (int t = 0; t < 30; ++t) {
      int a = env_rng.uniform_int(A);
      StepOutcome out = env->step(a, env_rng);
      auto nx = by_key.find(key_of(out.obs.features));
      if (nx == by_key.end()) {
        ++unmatched;
        break;
      }
      counts[{s, a}][nx->second] += 1;
      s = nx->second;
      if (out.done) break;
    }
  }
  bool matched = unmatched == 0;
  say(args, "[%s] every sampled observation matches an enumerated state",
      matched ? "ok" : "FAIL");

  double worst = 0.0;
  long tested = 0;
  for (const auto& [sa, dist] : counts) {
    long total = 0;
    for (const auto& [_, c] : dist) total += c;
    ++tested;
    Eigen::SparseVector<double> row = tab.mdp.transition[sa.second].row(sa.first);
    std::map<int, double> exact;
    for (Eigen::SparseVector<double>::InnerIterator it(row); it; ++it)
      exact[static_cast<int>(it.index())] = it.value();
    for (const auto& [t, c] : dist)
      worst = std::max(worst, std::abs(static_cast<double>(c) / total -
                                       (exact.count(t) ? exact[t] : 0.0)));
  }
  bool freq_pass = tested > 100 && worst < 1e-9;
  say(args, "[%s] empirical transition frequencies over %ld cells, worst |delta| %.3g",
      freq_pass ? "ok" : "FAIL", tested, worst);
  return matched && freq_pass;
}

int cmd_oracle_check(const CommonArgs& args) {
  RunConfig cfg = load_resolved(args);
  Rng root(cfg.seed);
  Rng rng = root.stream("oracle-check");
  bool ok = true;
  ok &= oracle_soft_vi(args, rng);
  ok &= oracle_sf(args, rng);
  ok &= oracle_gradcheck(args, rng);
  ok &= oracle_enumeration(args, rng);
  if (!ok) {
    std::fprintf(stderr, "oracle check failed\n");
    return kExitOracle;
  }
  say(args, "all oracle checks passed");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"successor-feature IRL laboratory"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string ckpt_flag, demos_flag, dqn_flag;

  CLI::App* pre = app.add_subcommand("pretrain", "multi-task RL pre-training");
  add_common(pre, args);
  CLI::App* expert = app.add_subcommand("expert", "exact demonstrator summary");
  add_common(expert, args);
  CLI::App* gen = app.add_subcommand("gen-demos", "sample expert demonstrations");
  add_common(gen, args);
  CLI::App* irl = app.add_subcommand("irl", "infer reward from demonstrations");
  add_common(irl, args);
  irl->add_option("--checkpoint", ckpt_flag, "pre-trained model checkpoint");
  irl->add_option("--demos", demos_flag, "demonstration file");
  CLI::App* eval = app.add_subcommand("eval", "run the experiment grid");
  add_common(eval, args);
  eval->add_option("--checkpoint", ckpt_flag, "pre-trained model checkpoint");
  eval->add_option("--dqn-checkpoint", dqn_flag, "pre-trained dqn checkpoint");
  CLI::App* report = app.add_subcommand("report", "render plots from report.csv");
  add_common(report, args);
  CLI::App* oracle = app.add_subcommand("oracle-check", "run the exact-oracle suite");
  add_common(oracle, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(args);
    if (expert->parsed()) return cmd_expert(args);
    if (gen->parsed()) return cmd_gen_demos(args);
    if (irl->parsed()) return cmd_irl(args, ckpt_flag, demos_flag);
    if (eval->parsed()) return cmd_eval(args, ckpt_flag, dqn_flag);
    if (report->parsed()) return cmd_report(args);
    if (oracle->parsed()) return cmd_oracle_check(args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitOracle;
  } catch (const InputFileError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "filesystem error: %s\n", e.what());
    return kExitInput;
  } catch (const NonConvergence& e) {
    std::fprintf(stderr, "divergence: %s (residual %.6g)\n", e.what(), e.residual);
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitOk;
}

#include "mcpo/trainer.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>

#include "mcpo/rollout.hpp"

namespace mcpo::harness {

using objectives::BuiltLoss;
using objectives::ObjectiveKind;
using rollout::MinibatchView;
using rollout::RolloutBatch;

nn::NetArch arch_for_env(const envs::EnvSpec& spec, int hidden) {
  return nn::NetArch::mlp(spec.obs_dim,
                          spec.action_space.discrete
                              ? nn::PolicyHead::CategoricalLogits
                              : nn::PolicyHead::GaussianMean,
                          spec.action_space.n, hidden);
}

namespace {

constexpr int kReturnWindow = 100;

struct IterAccum {
  long n = 0;
  double surrogate = 0, value_loss = 0, entropy = 0, kl_old = 0, kl_psi = 0;
  double beta = 0, alpha = 0, d_old_theta = 0, d_old_psi = 0;
  long beta_max_hits = 0, writes = 0;
  std::map<int, long> slot_counts;
  int memory_size = 0;

  void add_common(const BuiltLoss& l, double b) {
    ++n;
    surrogate += l.surrogate;
    value_loss += l.value_loss;
    entropy += l.entropy;
    kl_old += l.kl_old;
    beta += b;
  }
  void fill(MetricsRecord& rec) const {
    if (n == 0) return;
    double inv = 1.0 / static_cast<double>(n);
    rec.surrogate = surrogate * inv;
    rec.value_loss = value_loss * inv;
    rec.entropy = entropy * inv;
    rec.kl_old = kl_old * inv;
    rec.kl_psi = kl_psi * inv;
    rec.beta_mean = beta * inv;
    rec.mean_alpha = alpha * inv;
    rec.beta_max_fraction = static_cast<double>(beta_max_hits) * inv;
    rec.write_count = writes;
    rec.memory_size = memory_size;
    long best_count = -1;
    for (const auto& [slot, count] : slot_counts)
      if (count > best_count) {
        best_count = count;
        rec.argmax_slot = slot;
      }
    rec.d_old_theta = d_old_theta * inv;
    rec.d_old_psi = d_old_psi * inv;
  }
};

// mean KL(pi_old || pi_theta) over the whole rollout, for the adaptive rule
double mean_kl_full_batch(const Vec& theta, const nn::NetArch& arch,
                          const RolloutBatch& batch) {
  MinibatchView v;
  v.states = batch.states;
  v.disc_actions = batch.disc_actions;
  v.cont_actions = batch.cont_actions;
  v.logprob_old = batch.logprob_old;
  v.value_old = batch.value_old;
  v.value_target = batch.value_target;
  v.advantage = batch.advantage;
  v.old_mean_or_logits = batch.old_mean_or_logits;
  v.old_log_std = batch.old_log_std;
  PolicyEval e = eval_policy(theta, arch, v);
  PolicyEval old;
  old.mean_or_logits = v.old_mean_or_logits;
  old.log_std = v.old_log_std;
  old.values = v.value_old;
  old.logprob = v.logprob_old;
  return row_kls(old, e, arch).mean();
}

void baseline_update(TrainerState& st, const RunConfig& cfg,
                     const MinibatchView& view, long t_total, IterAccum& acc) {
  double beta = 0.0;
  switch (cfg.algorithm) {
    case ObjectiveKind::KlFixed:
      beta = cfg.objective.beta;
      break;
    case ObjectiveKind::KlAdaptive:
      beta = st.beta;
      break;
    case ObjectiveKind::MdpoAnneal:
      beta = objectives::mdpo_anneal_beta(st.policy.update_count, t_total,
                                          cfg.objective.beta0);
      break;
    default:
      break;
  }

  nn::Tape tape;
  nn::Tape::Var flat = tape.param_flat(st.policy.theta);
  BuiltLoss loss =
      cfg.algorithm == ObjectiveKind::PpoClip
          ? objectives::build_ppo_clip_loss(tape, flat, st.policy.arch, view,
                                            cfg.objective)
          : objectives::build_kl_penalty_loss(tape, flat, st.policy.arch, view,
                                              beta, cfg.objective);
  tape.backward(loss.total);
  auto [params, adam] = nn::adam_step(st.policy.adam_theta, st.policy.theta,
                                      tape.grad_flat(flat), true);
  st.policy.theta = std::move(params);
  st.policy.adam_theta = std::move(adam);
  st.policy.update_count += 1;
  acc.add_common(loss, beta);
}

std::vector<envs::EnvPtr> make_envs(const RunConfig& cfg, std::uint64_t seed) {
  std::vector<envs::EnvPtr> out;
  for (int a = 0; a < cfg.n_actors; ++a) {
    out.push_back(envs::make_env(cfg.env));
    out.back()->reset(split_seed(seed, 0xE00 + static_cast<std::uint64_t>(a)));
  }
  return out;
}

void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                    std::uint64_t seed) {
  std::ofstream out(dir / "manifest.json");
  out << "{\n  \"seed\": " << seed << ",\n  \"format\": \"metrics.jsonl v1\","
      << "\n  \"config\": " << cfg.to_json() << "\n}\n";
}

}  // namespace

SeedRunResult train_seed(const RunConfig& cfg, std::uint64_t seed,
                         const std::filesystem::path& seed_dir, bool resume,
                         bool verbose) {
  namespace fs = std::filesystem;
  fs::create_directories(seed_dir);
  const fs::path ck_path = seed_dir / "checkpoint.bin";
  const fs::path metrics_path = seed_dir / "metrics.jsonl";

  std::vector<envs::EnvPtr> env_pool = make_envs(cfg, seed);
  nn::NetArch arch = arch_for_env(env_pool[0]->spec(), cfg.hidden_size);

  TrainerState st;
  bool resumed = false;
  if (resume && fs::exists(ck_path)) {
    Checkpoint ck = load_checkpoint(ck_path);
    if (ck.algorithm != cfg.algorithm_name() || ck.env_id != cfg.env ||
        !(ck.state.policy.arch == arch))
      throw LoadError("resume: checkpoint does not match the configuration");
    st = std::move(ck.state);
    for (int a = 0; a < cfg.n_actors; ++a)
      env_pool[a]->deserialize(ck.env_blobs.at(a));
    resumed = true;
  } else {
    st.policy = make_mcpo_state(
        arch, nn::init_params(arch, split_seed(seed, 0x1417)), cfg.mcpo,
        cfg.adam_step_size, split_seed(seed, 0x9));
    st.beta = cfg.objective.beta;
    st.policy.beta_adaptive = 1.0;
    st.episode_return_acc.assign(cfg.n_actors, 0.0);
    st.rng = RngStream(split_seed(seed, 0x7A9E));
    write_manifest(seed_dir, cfg, seed);
  }

  JsonlWriter metrics(metrics_path.string(), resumed);
  JsonlWriter timing((seed_dir / "timing.jsonl").string(), resumed);

  const long t_total = cfg.iterations() * cfg.minibatch_updates_per_iteration();
  const long total_iterations = cfg.iterations();

  SeedRunResult result;
  auto save = [&] {
    Checkpoint ck;
    ck.algorithm = cfg.algorithm_name();
    ck.env_id = cfg.env;
    ck.state = st;
    for (auto& e : env_pool) ck.env_blobs.push_back(e->serialize());
    save_checkpoint(ck_path, ck);
  };

  while (st.env_steps < cfg.total_steps) {
    auto t_start = std::chrono::steady_clock::now();
    const long iter = st.iteration + 1;

    RolloutBatch batch = rollout::collect(
        st.policy.theta_old, arch, env_pool, cfg.horizon,
        split_seed(split_seed(seed, 0xC011), static_cast<std::uint64_t>(iter)),
        &st.episode_return_acc);
    rollout::compute_gae(batch, cfg.gamma, cfg.lambda);

    for (double r : batch.finished_returns) {
      st.return_window.push_back(r);
      if (st.return_window.size() > kReturnWindow) st.return_window.pop_front();
    }
    st.episodes += static_cast<long>(batch.finished_returns.size());

    rollout::MinibatchPlan plan;
    plan.epochs = cfg.epochs;
    plan.batch_size = cfg.minibatch_size;
    plan.seed =
        split_seed(split_seed(seed, 0x5EED), static_cast<std::uint64_t>(iter));
    auto epochs_idx = rollout::minibatches(batch, plan);

    IterAccum acc;
    for (const auto& epoch : epochs_idx) {
      for (const auto& idx : epoch) {
        MinibatchView view = rollout::gather(batch, idx);
        if (cfg.algorithm == ObjectiveKind::Mcpo) {
          UpdateDiag diag;
          st.policy = mcpo_update(st.policy, cfg.mcpo, cfg.objective, view,
                                  st.rng, &diag);
          BuiltLoss l;
          l.surrogate = diag.surrogate;
          l.value_loss = diag.value_loss;
          l.entropy = diag.entropy;
          l.kl_old = diag.kl_old;
          acc.add_common(l, diag.beta);
          acc.kl_psi += diag.kl_psi;
          acc.alpha += diag.mean_alpha;
          acc.d_old_theta += diag.d_old_theta;
          acc.d_old_psi += diag.d_old_psi;
          if (diag.beta == cfg.mcpo.beta_max) ++acc.beta_max_hits;
          if (diag.wrote) ++acc.writes;
          if (diag.argmax_slot >= 0) ++acc.slot_counts[diag.argmax_slot];
          acc.memory_size = diag.memory_size;
        } else {
          baseline_update(st, cfg, view, t_total, acc);
        }
      }
    }

    // per-iteration coefficient adaptation from the measured drift
    if (cfg.algorithm == ObjectiveKind::KlAdaptive) {
      double measured = mean_kl_full_batch(st.policy.theta, arch, batch);
      st.beta = objectives::adaptive_beta_update(st.beta, measured,
                                                 cfg.objective.d_targ);
    } else if (cfg.algorithm == ObjectiveKind::Mcpo &&
               cfg.mcpo.beta_mode == BetaMode::Adaptive) {
      double measured = mean_kl_full_batch(st.policy.theta, arch, batch);
      st.policy.beta_adaptive = objectives::adaptive_beta_update(
          st.policy.beta_adaptive, measured, cfg.mcpo.d_targ);
    }

    st.policy.theta_old = st.policy.theta;
    st.iteration = iter;
    st.env_steps += cfg.steps_per_iteration();

    MetricsRecord rec;
    rec.iteration = st.iteration;
    rec.env_steps = st.env_steps;
    rec.episodes = st.episodes;
    if (!st.return_window.empty()) {
      double sum = 0.0;
      for (double r : st.return_window) sum += r;
      rec.return_mean_100 = sum / static_cast<double>(st.return_window.size());
    }
    acc.fill(rec);
    metrics.write_line(rec.to_json_line());

    double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    double steps_per_s = cfg.steps_per_iteration() / std::max(elapsed, 1e-9);
    timing.write_line("{\"iteration\": " + std::to_string(st.iteration) +
                      ", \"steps_per_s\": " + std::to_string(steps_per_s) +
                      "}");
    if (verbose && (st.iteration % 10 == 0 || st.iteration == 1 ||
                    st.env_steps >= cfg.total_steps))
      std::cout << "  seed " << seed << "  iter " << st.iteration << "/"
                << total_iterations << "  steps " << st.env_steps
                << "  return100 "
                << (st.return_window.empty() ? std::string("n/a")
                                             : std::to_string(rec.return_mean_100))
                << "  steps/s " << static_cast<long>(steps_per_s) << std::endl;

    if (cfg.checkpoint_interval > 0 &&
        st.iteration % cfg.checkpoint_interval == 0)
      save();
  }

  save();
  result.ok = true;
  result.episodes = st.episodes;
  result.env_steps = st.env_steps;
  if (!st.return_window.empty()) {
    double sum = 0.0;
    for (double r : st.return_window) sum += r;
    result.final_return_mean =
        sum / static_cast<double>(st.return_window.size());
  }
  return result;
}

std::filesystem::path resolve_out_dir(const RunConfig& cfg) {
  const char* root = std::getenv("MCPO_OUTPUT_ROOT");
  std::filesystem::path dir = cfg.out_dir;
  if (root && dir.is_relative()) dir = std::filesystem::path(root) / dir;
  return dir;
}

std::filesystem::path run(const RunConfig& cfg, bool resume, bool verbose) {
  namespace fs = std::filesystem;
  fs::path root = resolve_out_dir(cfg);
  fs::create_directories(root);

  std::vector<std::pair<std::uint64_t, SeedRunResult>> results;
  for (std::uint64_t seed : cfg.seeds) {
    if (verbose)
      std::cout << "[train] " << cfg.algorithm_name() << " on " << cfg.env
                << ", seed " << seed << std::endl;
    SeedRunResult r;
    try {
      r = train_seed(cfg, seed, root / ("seed" + std::to_string(seed)), resume,
                     verbose);
    } catch (const std::exception& e) {
      r.ok = false;
      r.error = e.what();
      std::cerr << "[train] seed " << seed << " failed: " << e.what()
                << std::endl;
    }
    results.emplace_back(seed, r);
  }

  // aggregate summary in the Table-1 mean +- std convention
  std::ofstream summary(root / "summary.csv");
  summary << "seed,status,final_return_mean_100,episodes,env_steps\n";
  std::vector<double> finals;
  for (const auto& [seed, r] : results) {
    summary << seed << ',' << (r.ok ? "ok" : "failed") << ','
            << (r.ok ? std::to_string(r.final_return_mean) : "") << ','
            << r.episodes << ',' << r.env_steps << '\n';
    if (r.ok && std::isfinite(r.final_return_mean))
      finals.push_back(r.final_return_mean);
  }
  if (!finals.empty()) {
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (double f : finals) var += (f - mean) * (f - mean);
    var /= static_cast<double>(finals.size());
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", mean, std::sqrt(var));
    summary << "aggregate," << finals.size() << "_seeds," << buf << ",,\n";
    if (verbose)
      std::cout << "[train] final return over " << finals.size()
                << " seeds: " << buf << std::endl;
  }
  return root;
}

EvalResult evaluate_checkpoint(const std::filesystem::path& checkpoint,
                               int episodes, std::uint64_t seed) {
  Checkpoint ck = load_checkpoint(checkpoint);
  envs::EnvPtr env = envs::make_env(ck.env_id);
  const nn::NetArch& arch = ck.state.policy.arch;
  if (nn::param_count(arch) != ck.state.policy.theta.size())
    throw LoadError("eval: checkpoint architecture is inconsistent");

  RngStream rng(split_seed(seed, 0xEA7));
  std::vector<double> returns;
  for (int e = 0; e < episodes; ++e) {
    Vec obs = env->reset(split_seed(seed, 0xE9150DE + static_cast<std::uint64_t>(e)));
    double ret = 0.0;
    bool done = false;
    while (!done) {
      nn::ForwardOut out = nn::forward(ck.state.policy.theta, arch, obs);
      envs::StepResult sr = env->step(nn::sample(out.dist, rng));
      ret += sr.reward;
      obs = sr.obs;
      done = sr.done;
    }
    returns.push_back(ret);
  }

  EvalResult r;
  r.episodes = episodes;
  double sum = 0.0, pos = 0.0;
  for (double x : returns) {
    sum += x;
    if (x > 0.0) pos += 1.0;
  }
  r.mean_return = sum / std::max<size_t>(returns.size(), 1);
  double var = 0.0;
  for (double x : returns) var += (x - r.mean_return) * (x - r.mean_return);
  r.std_return = std::sqrt(var / std::max<size_t>(returns.size(), 1));
  r.success_rate = pos / std::max<size_t>(returns.size(), 1);
  return r;
}

}  // namespace mcpo::harness

#include "mcpo/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace mcpo::harness {

namespace {

constexpr const char* kMagic = "mcpo-checkpoint 1";

void put_doubles(std::vector<double>& out, const Vec& v) {
  out.insert(out.end(), v.data(), v.data() + v.size());
}

Vec take_doubles(const std::vector<double>& in, size_t& pos, size_t n) {
  if (pos + n > in.size())
    throw LoadError("checkpoint: binary section shorter than declared");
  Vec v = Eigen::Map<const Vec>(in.data() + pos, static_cast<Eigen::Index>(n));
  pos += n;
  return v;
}

int act_code(nn::Activation a) { return a == nn::Activation::Tanh ? 0 : 1; }
nn::Activation act_from(int c) {
  if (c == 0) return nn::Activation::Tanh;
  if (c == 1) return nn::Activation::Relu;
  throw LoadError("checkpoint: bad activation code");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const TrainerState& st = ck.state;
  const nn::NetArch& arch = st.policy.arch;

  std::ostringstream head;
  head << kMagic << '\n';
  head << "algorithm " << ck.algorithm << '\n';
  head << "env " << ck.env_id << '\n';
  head << "arch " << arch.input_dim << ' ' << arch.hidden.size();
  for (const auto& [w, a] : arch.hidden) head << ' ' << w << ' ' << act_code(a);
  head << ' ' << (arch.policy_head == nn::PolicyHead::GaussianMean ? 1 : 0)
       << ' ' << arch.action_dim << ' ' << (arch.value_head ? 1 : 0) << '\n';
  head << "attention " << st.policy.attention.ctx_dim << ' '
       << st.policy.attention.n_slots << '\n';
  head << "counters " << st.iteration << ' ' << st.env_steps << ' '
       << st.policy.update_count << ' ' << st.episodes << '\n';
  head << "adam " << st.policy.adam_theta.step << ' '
       << st.policy.adam_phi.step << '\n';
  head << "memory " << st.policy.memory.size() << ' '
       << st.policy.memory.capacity();
  for (int i = 0; i < st.policy.memory.size(); ++i)
    head << ' ' << st.policy.memory.entry(i).created_at_update;
  head << '\n';
  head << "rng " << st.rng.state() << ' ' << (st.rng.have_spare() ? 1 : 0)
       << '\n';
  head << "window " << st.return_window.size() << '\n';
  head << "acc " << st.episode_return_acc.size() << '\n';
  head << "envs " << ck.env_blobs.size();
  for (const Vec& b : ck.env_blobs) head << ' ' << b.size();
  head << '\n';

  std::vector<double> bin;
  put_doubles(bin, st.policy.theta);
  put_doubles(bin, st.policy.theta_old);
  put_doubles(bin, st.policy.psi_old);
  put_doubles(bin, st.policy.attention.phi);
  put_doubles(bin, st.policy.adam_theta.first_moment);
  put_doubles(bin, st.policy.adam_theta.second_moment);
  put_doubles(bin, st.policy.adam_phi.first_moment);
  put_doubles(bin, st.policy.adam_phi.second_moment);
  bin.push_back(st.beta);
  bin.push_back(st.policy.beta_adaptive);
  bin.push_back(st.rng.spare());
  bin.push_back(st.policy.adam_theta.step_size);
  bin.push_back(st.policy.adam_phi.step_size);
  for (int i = 0; i < st.policy.memory.size(); ++i)
    put_doubles(bin, *st.policy.memory.entry(i).params);
  for (double r : st.return_window) bin.push_back(r);
  for (double r : st.episode_return_acc) bin.push_back(r);
  for (const Vec& b : ck.env_blobs) put_doubles(bin, b);

  head << "doubles " << bin.size() << '\n' << "BINARY\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("checkpoint: cannot open '" + path.string() + "'");
  std::string h = head.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(bin.data()),
            static_cast<std::streamsize>(bin.size() * sizeof(double)));
  if (!out) throw ConfigError("checkpoint: write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("checkpoint: cannot open '" + path.string() + "'");

  auto read_line = [&in](const char* what) {
    std::string line;
    if (!std::getline(in, line))
      throw LoadError(std::string("checkpoint: truncated header at ") + what);
    return line;
  };
  auto expect_word = [](std::istringstream& ss, const char* what) {
    std::string w;
    if (!(ss >> w)) throw LoadError(std::string("checkpoint: bad line: ") + what);
    return w;
  };

  if (read_line("magic") != kMagic)
    throw LoadError("checkpoint: unsupported format version");

  Checkpoint ck;
  TrainerState& st = ck.state;

  {
    std::istringstream ss(read_line("algorithm"));
    if (expect_word(ss, "algorithm") != "algorithm")
      throw LoadError("checkpoint: expected 'algorithm'");
    ck.algorithm = expect_word(ss, "algorithm value");
  }
  {
    std::istringstream ss(read_line("env"));
    if (expect_word(ss, "env") != "env")
      throw LoadError("checkpoint: expected 'env'");
    ck.env_id = expect_word(ss, "env value");
  }
  nn::NetArch arch;
  {
    std::istringstream ss(read_line("arch"));
    if (expect_word(ss, "arch") != "arch")
      throw LoadError("checkpoint: expected 'arch'");
    size_t n_hidden = 0;
    int head = 0, value = 0;
    ss >> arch.input_dim >> n_hidden;
    for (size_t i = 0; i < n_hidden; ++i) {
      int w = 0, a = 0;
      ss >> w >> a;
      arch.hidden.emplace_back(w, act_from(a));
    }
    ss >> head >> arch.action_dim >> value;
    if (!ss) throw LoadError("checkpoint: bad arch line");
    arch.policy_head =
        head ? nn::PolicyHead::GaussianMean : nn::PolicyHead::CategoricalLogits;
    arch.value_head = value != 0;
  }
  int ctx_dim = 0, n_slots = 0;
  {
    std::istringstream ss(read_line("attention"));
    if (expect_word(ss, "attention") != "attention")
      throw LoadError("checkpoint: expected 'attention'");
    ss >> ctx_dim >> n_slots;
    if (!ss) throw LoadError("checkpoint: bad attention line");
  }
  long update_count = 0;
  {
    std::istringstream ss(read_line("counters"));
    if (expect_word(ss, "counters") != "counters")
      throw LoadError("checkpoint: expected 'counters'");
    ss >> st.iteration >> st.env_steps >> update_count >> st.episodes;
    if (!ss) throw LoadError("checkpoint: bad counters line");
  }
  long adam_theta_step = 0, adam_phi_step = 0;
  {
    std::istringstream ss(read_line("adam"));
    if (expect_word(ss, "adam") != "adam")
      throw LoadError("checkpoint: expected 'adam'");
    ss >> adam_theta_step >> adam_phi_step;
    if (!ss) throw LoadError("checkpoint: bad adam line");
  }
  int mem_size = 0, mem_cap = 0;
  std::vector<long> created;
  {
    std::istringstream ss(read_line("memory"));
    if (expect_word(ss, "memory") != "memory")
      throw LoadError("checkpoint: expected 'memory'");
    ss >> mem_size >> mem_cap;
    created.resize(mem_size);
    for (int i = 0; i < mem_size; ++i) ss >> created[i];
    if (!ss) throw LoadError("checkpoint: bad memory line");
  }
  std::uint64_t rng_state = 0;
  int rng_spare_flag = 0;
  {
    std::istringstream ss(read_line("rng"));
    if (expect_word(ss, "rng") != "rng")
      throw LoadError("checkpoint: expected 'rng'");
    ss >> rng_state >> rng_spare_flag;
    if (!ss) throw LoadError("checkpoint: bad rng line");
  }
  size_t window_n = 0, acc_n = 0;
  {
    std::istringstream ss(read_line("window"));
    if (expect_word(ss, "window") != "window")
      throw LoadError("checkpoint: expected 'window'");
    ss >> window_n;
  }
  {
    std::istringstream ss(read_line("acc"));
    if (expect_word(ss, "acc") != "acc")
      throw LoadError("checkpoint: expected 'acc'");
    ss >> acc_n;
  }
  std::vector<size_t> env_lens;
  {
    std::istringstream ss(read_line("envs"));
    if (expect_word(ss, "envs") != "envs")
      throw LoadError("checkpoint: expected 'envs'");
    size_t n = 0;
    ss >> n;
    env_lens.resize(n);
    for (size_t i = 0; i < n; ++i) ss >> env_lens[i];
    if (!ss) throw LoadError("checkpoint: bad envs line");
  }
  size_t total_doubles = 0;
  {
    std::istringstream ss(read_line("doubles"));
    if (expect_word(ss, "doubles") != "doubles")
      throw LoadError("checkpoint: expected 'doubles'");
    ss >> total_doubles;
  }
  if (read_line("BINARY") != "BINARY")
    throw LoadError("checkpoint: expected BINARY marker");

  std::vector<double> bin(total_doubles);
  in.read(reinterpret_cast<char*>(bin.data()),
          static_cast<std::streamsize>(total_doubles * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != total_doubles * sizeof(double))
    throw LoadError("checkpoint: truncated binary section");

  const size_t p = static_cast<size_t>(nn::param_count(arch));
  const size_t phi_n =
      static_cast<size_t>(AttentionNet::param_count(ctx_dim, n_slots));

  size_t pos = 0;
  st.policy.arch = arch;
  st.policy.theta = take_doubles(bin, pos, p);
  st.policy.theta_old = take_doubles(bin, pos, p);
  st.policy.psi_old = take_doubles(bin, pos, p);
  st.policy.attention.ctx_dim = ctx_dim;
  st.policy.attention.n_slots = n_slots;
  st.policy.attention.phi = take_doubles(bin, pos, phi_n);
  st.policy.adam_theta.first_moment = take_doubles(bin, pos, p);
  st.policy.adam_theta.second_moment = take_doubles(bin, pos, p);
  st.policy.adam_phi.first_moment = take_doubles(bin, pos, phi_n);
  st.policy.adam_phi.second_moment = take_doubles(bin, pos, phi_n);
  st.policy.adam_theta.step = adam_theta_step;
  st.policy.adam_phi.step = adam_phi_step;
  st.policy.update_count = update_count;
  st.beta = take_doubles(bin, pos, 1)(0);
  st.policy.beta_adaptive = take_doubles(bin, pos, 1)(0);
  double rng_spare = take_doubles(bin, pos, 1)(0);
  st.policy.adam_theta.step_size = take_doubles(bin, pos, 1)(0);
  st.policy.adam_phi.step_size = take_doubles(bin, pos, 1)(0);
  st.rng.restore(rng_state, rng_spare_flag != 0, rng_spare);

  st.policy.memory = PolicyMemory(mem_cap);
  for (int i = 0; i < mem_size; ++i)
    st.policy.memory.push(take_doubles(bin, pos, p), created[i]);

  Vec window = take_doubles(bin, pos, window_n);
  st.return_window.assign(window.data(), window.data() + window.size());
  Vec acc = take_doubles(bin, pos, acc_n);
  st.episode_return_acc.assign(acc.data(), acc.data() + acc.size());
  for (size_t len : env_lens) ck.env_blobs.push_back(take_doubles(bin, pos, len));
  if (pos != total_doubles)
    throw LoadError("checkpoint: binary section longer than consumed");
  return ck;
}

}  // namespace mcpo::harness

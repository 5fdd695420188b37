// Acceptance suite: one line of output per criterion, exit 0 iff all pass.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "altsg/experiment.hpp"
#include "altsg/gradcheck_suite.hpp"
#include "altsg/oracle.hpp"
#include "test_support.hpp"

using namespace altsg;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Fixture {
  std::string dir, train, valid;
  std::size_t vocab_size = 0;
};

Fixture make_corpus_fixture() {
  Fixture fx;
  fx.dir = testsup::scratch_dir("acceptance");
  const std::string text = testsup::make_fixture_corpus(110000, 101);
  std::size_t split = 100000;
  while (split < text.size() && text[split] != '\n') ++split;
  fx.train = fx.dir + "/train.txt";
  fx.valid = fx.dir + "/valid.txt";
  testsup::write_file(fx.train, text.substr(0, split + 1));
  testsup::write_file(fx.valid, text.substr(split + 1));
  fx.vocab_size = build_vocab(text, VocabMode::Char).size();
  return fx;
}

ExperimentConfig desk_config(const Fixture& fx, const std::string& method) {
  ExperimentConfig c;
  c.method = method;
  c.layers = 2;
  c.hidden = 64;
  c.embed = 32;
  c.d_g = 16;
  c.trunc = 16;
  c.batch = 16;
  c.epochs = 30;
  c.e_base = 2;
  c.checkpoint_every = 0;
  c.train_path = fx.train;
  c.valid_path = fx.valid;
  c.validate();
  return c;
}

std::string strip_elapsed(const std::string& csv) {
  std::istringstream ss(csv);
  std::string line, out;
  while (std::getline(ss, line)) {
    const auto pos = line.rfind(',');
    out += line.substr(0, pos) + "\n";
  }
  return out;
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& info) {
  std::cout << (pass ? "PASS" : "FAIL") << " [" << id << "] " << name << " (" << info << ")\n";
  std::cout.flush();
  if (!pass) ++failures;
}

// ---- 1: finite-difference certification of every backward ----------------

void criterion_gradcheck() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream log;
  const bool ok = run_gradcheck_suite(log, 20, 7);
  const double secs = seconds_since(t0);
  std::ostringstream info;
  info << "20 configs per op, " << secs << " s";
  report(1, "gradient certification", ok && secs < 120.0, info.str());
  if (!ok) std::cout << log.str();
}

// ---- 2: bootstrapped target vs two-window brute-force oracle -------------

void criterion_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  RngState rng(404);
  double worst = 0;
  const std::size_t t_choices[3] = {2, 3, 5};
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = t_choices[rng.next_u64() % 3];
    const std::size_t L = 1 + rng.next_u64() % 2;
    const std::size_t B = 1 + rng.next_u64() % 3, H = 2 + rng.next_u64() % 3;
    const std::size_t V = 4 + rng.next_u64() % 4, e = 2 + rng.next_u64() % 3;
    const int k = 1 + static_cast<int>(rng.next_u64() % 2);
    const std::size_t d_g = 3;

    LMModel<double> m = lm_init<double>(V, e, H, L, k, rng);
    std::vector<DNIParams<double>> dni;
    for (std::size_t l = 0; l < L; ++l) {
      DNIParams<double> p = dni_init<double>(d_g, rng);
      p.down.W.back() = init_uniform<double>(p.down.W.back().shape(), 0.5, rng);
      p.down.b.back() = init_uniform<double>(p.down.b.back().shape(), 0.5, rng);
      dni.push_back(std::move(p));
    }
    DNIStateBank<double> bank;
    bank.init(L, H, B, d_g);

    auto toks = [&](TokenBatch& tb) {
      tb.T = T;
      tb.B = B;
      tb.ids.clear();
      for (std::size_t i = 0; i < T * B; ++i) tb.ids.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
    };
    TokenBatch w1, w2;
    toks(w1);
    toks(w2);
    std::vector<std::int32_t> tg1, tg2;
    for (std::size_t i = 0; i < T * B; ++i) {
      tg1.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
      tg2.push_back(static_cast<std::int32_t>(rng.next_u64() % V));
    }
    std::vector<Tensor<double>> s0;
    for (std::size_t l = 0; l < L; ++l) s0.push_back(init_uniform<double>({B, H}, 0.5, rng));

    TrainFlags flags;
    flags.clip = 0;
    WindowResult<double> r1 = run_window<double>(m, &dni, &bank, GradientMode::Synthetic, w1, tg1, s0,
                                                 PendingPrediction<double>{}, flags);
    WindowResult<double> r2 = run_window<double>(m, &dni, &bank, GradientMode::Synthetic, w2, tg2,
                                                 r1.new_states, r1.new_pending, flags);

    std::vector<Tensor<double>> truth = oracle::two_window_oracle(m, s0, w1, w2, tg2, r2.new_pending.delta_hat);
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t i = 0; i < truth[l].size(); ++i)
        worst = std::max(worst, std::abs(r2.base.h0[l][i] - truth[l][i]));
  }
  const double secs = seconds_since(t0);
  std::ostringstream info;
  info << "50 instances, worst |target - oracle| = " << worst << ", " << secs << " s";
  report(2, "bootstrapped-target oracle", worst <= 1e-10 && secs < 60.0, info.str());
}

// ---- 3: frozen zero-head synthetic run == real run, bitwise --------------

void criterion_zero_head(const Fixture& fx) {
  ExperimentConfig real_cfg = desk_config(fx, "bptt");
  real_cfg.hidden = 32;
  real_cfg.embed = 16;
  real_cfg.epochs = 5;
  real_cfg.checkpoint_every = 1;
  ExperimentConfig syn_cfg = real_cfg;
  syn_cfg.method = "dni";
  syn_cfg.freeze_dni = true;

  const std::string dir = testsup::scratch_dir("acc_zero_head");
  Experiment<double>::fresh(real_cfg).run(dir + "/real");
  Experiment<double>::fresh(syn_cfg).run(dir + "/syn");

  bool ok = true;
  long mismatched_epoch = -1;
  for (long e = 1; e <= 5 && ok; ++e) {
    CheckpointData<double> a = load_checkpoint<double>(dir + "/real/ckpt_epoch_" + std::to_string(e) + ".bin");
    CheckpointData<double> b = load_checkpoint<double>(dir + "/syn/ckpt_epoch_" + std::to_string(e) + ".bin");
    for (const auto& [name, t] : a.tensors) {
      if (name.rfind("base.", 0) != 0) continue;
      const Tensor<double>& u = b.tensors.at(name);
      for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] != u[i]) {
          ok = false;
          mismatched_epoch = e;
          break;
        }
      if (!ok) break;
    }
  }
  std::ostringstream info;
  if (ok)
    info << "base parameters bit-identical over 5 epochs";
  else
    info << "first mismatch at epoch " << mismatched_epoch;
  report(3, "zero-head equivalence", ok, info.str());
}

// ---- 4: cosine schedule, run doubling, alternation ------------------------

void criterion_scheduler() {
  bool ok = true;
  std::ostringstream why;

  for (long e_base : {1L, 2L, 5L}) {
    for (int i = 0; i < 4; ++i) {
      RestartSchedule s;
      s.e_base = e_base;
      s.run_index = i;
      s.eta_min = 0.125;
      s.eta_max = 0.875;
      const long Ei = e_base << i;
      if (s.run_length() != Ei) ok = false;
      s.e_cur = 0;
      if (std::abs(lr_at(s) - s.eta_max) > 1e-15) ok = false, why << " eta_max";
      s.e_cur = Ei;
      if (std::abs(lr_at(s) - s.eta_min) > 1e-15) ok = false, why << " eta_min";
      if (Ei % 2 == 0) {
        s.e_cur = Ei / 2;
        if (std::abs(lr_at(s) - 0.5 * (s.eta_min + s.eta_max)) > 1e-15) ok = false, why << " midpoint";
      }
    }
  }

  const GradientMode expect[4] = {GradientMode::Real, GradientMode::Synthetic, GradientMode::Real,
                                  GradientMode::Synthetic};
  for (int i = 0; i < 4; ++i)
    if (mode_for(AlternationPolicy::Alternate, i) != expect[i]) ok = false, why << " alternation";

  // full trace: restarts at cumulative 2, 6, 14 for E_base = 2
  RestartSchedule s;
  s.e_base = 2;
  std::vector<long> restarts;
  for (long epoch = 1; epoch <= 14; ++epoch)
    if (advance_epoch(s, AlternationPolicy::Alternate).restarted) restarts.push_back(epoch);
  if (restarts != std::vector<long>{2, 6, 14}) ok = false, why << " restart-epochs";

  report(4, "scheduler exactness", ok, ok ? "lr endpoints/midpoint to 1e-15, runs 2^i*E_base" : why.str());
}

// ---- 5: desk-scale learning ------------------------------------------------

void criterion_learning(const Fixture& fx) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string dir = testsup::scratch_dir("acc_learning");

  FinalReport bptt = Experiment<double>::fresh(desk_config(fx, "bptt")).run(dir + "/bptt");
  FinalReport dni = Experiment<double>::fresh(desk_config(fx, "dni")).run(dir + "/dni");
  const double secs = seconds_since(t0);

  const double v = static_cast<double>(fx.vocab_size);
  const bool ok = bptt.best_val_ppl < 0.5 * v && dni.best_val_ppl <= 1.02 * bptt.best_val_ppl && secs < 600.0;
  std::ostringstream info;
  info << "V=" << fx.vocab_size << ", bptt val ppl " << bptt.best_val_ppl << ", dni val ppl "
       << dni.best_val_ppl << ", " << secs << " s";
  report(5, "desk-scale learning", ok, info.str());

  if (std::getenv("ALTSG_ORDERING")) {
    // Informational only: method ordering at this scale is seed-sensitive.
    FinalReport br = Experiment<double>::fresh(desk_config(fx, "bptt_restart")).run(dir + "/bptt_restart");
    FinalReport dr = Experiment<double>::fresh(desk_config(fx, "dni_restart")).run(dir + "/dni_restart");
    FinalReport al = Experiment<double>::fresh(desk_config(fx, "alternating")).run(dir + "/alternating");
    std::cout << "INFO [5] ordering (not gated): bptt_restart " << br.best_val_ppl << ", dni_restart "
              << dr.best_val_ppl << ", alternating " << al.best_val_ppl << "\n";
  }
}

// ---- 6: predictor size independent of base width --------------------------

void criterion_param_invariance(const Fixture& fx) {
  auto phi_bytes = [&](long hidden) {
    ExperimentConfig c = desk_config(fx, "dni");
    c.hidden = hidden;
    c.epochs = 1;
    const std::string dir = testsup::scratch_dir("acc_width_" + std::to_string(hidden));
    Experiment<double>::fresh(c).save(dir + "/init.bin");
    CheckpointData<double> d = load_checkpoint<double>(dir + "/init.bin");
    std::size_t bytes = 0;
    for (const auto& [name, t] : d.tensors)
      if (name.rfind("dni", 0) == 0) bytes += t.size() * sizeof(double);
    return bytes;
  };
  const std::size_t b8 = phi_bytes(8), b256 = phi_bytes(256);
  std::ostringstream info;
  info << "serialized predictor bytes: hidden=8 -> " << b8 << ", hidden=256 -> " << b256;
  report(6, "parameter-count invariance", b8 == b256 && b8 > 0, info.str());
}

// ---- 7: golden CSV + interrupt/resume -------------------------------------

void criterion_determinism() {
  const std::string dir = testsup::scratch_dir("acc_golden");
  const std::string corpus = dir + "/corpus.txt";
  testsup::write_file(corpus, testsup::make_fixture_corpus(20000, 55));

  ExperimentConfig cfg;
  cfg.method = "alternating";
  cfg.layers = 2;
  cfg.hidden = 16;
  cfg.embed = 8;
  cfg.d_g = 8;
  cfg.trunc = 16;
  cfg.batch = 8;
  cfg.epochs = 10;
  cfg.e_base = 2;
  cfg.checkpoint_every = 5;
  cfg.train_path = corpus;
  cfg.validate();

  Experiment<double>::fresh(cfg).run(dir + "/full");
  const std::string produced = strip_elapsed(testsup::read_file(dir + "/full/metrics.csv"));

  const std::string golden_path = std::string(ALTSG_TEST_DIR) + "/golden/metrics_golden.csv";
  if (std::getenv("ALTSG_WRITE_GOLDEN")) {
    std::filesystem::create_directories(std::string(ALTSG_TEST_DIR) + "/golden");
    testsup::write_file(golden_path, produced);
  }
  const std::string golden = testsup::read_file(golden_path);
  const bool golden_ok = !golden.empty() && produced == golden;

  // Resume from the periodic checkpoint: identical final checkpoint bytes
  // and identical CSV tail.
  auto resumed = Experiment<double>::from_checkpoint(dir + "/full/ckpt_epoch_5.bin", &cfg);
  resumed.run(dir + "/resumed");
  const bool ckpt_ok =
      testsup::read_file(dir + "/full/ckpt_final.bin") == testsup::read_file(dir + "/resumed/ckpt_final.bin");

  std::istringstream fs(produced), rs(strip_elapsed(testsup::read_file(dir + "/resumed/metrics.csv")));
  std::vector<std::string> full_rows, res_rows;
  std::string line;
  while (std::getline(fs, line)) full_rows.push_back(line);
  while (std::getline(rs, line)) res_rows.push_back(line);
  bool tail_ok = res_rows.size() == 6 && full_rows.size() == 11;
  if (tail_ok)
    for (std::size_t i = 1; i < res_rows.size(); ++i) tail_ok = tail_ok && res_rows[i] == full_rows[i + 5];

  std::ostringstream info;
  info << "golden csv " << (golden_ok ? "match" : "MISMATCH") << ", resumed checkpoint "
       << (ckpt_ok ? "identical" : "DIFFERS") << ", csv tail " << (tail_ok ? "match" : "MISMATCH");
  report(7, "determinism and resume", golden_ok && ckpt_ok && tail_ok, info.str());
}

}  // namespace

int main() {
  std::cout.setf(std::ios::fmtflags(0), std::ios::floatfield);
  std::cout.precision(6);
  const Fixture fx = make_corpus_fixture();

  criterion_gradcheck();
  criterion_oracle();
  criterion_zero_head(fx);
  criterion_scheduler();
  criterion_learning(fx);
  criterion_param_invariance(fx);
  criterion_determinism();

  if (failures) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all acceptance criteria passed\n";
  return 0;
}

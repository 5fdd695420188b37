#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "altsg/checkpoint.hpp"
#include "altsg/config.hpp"
#include "altsg/data.hpp"
#include "altsg/train.hpp"

namespace altsg {

/// Every method arm is the same training loop under different controller
/// settings; nothing else differs between arms.
struct ArmSettings {
  AlternationPolicy policy = AlternationPolicy::ConstantReal;
  bool restarts = false;
  bool dni = false;
};

inline ArmSettings arm_settings(const std::string& method) {
  if (method == "bptt") return {AlternationPolicy::ConstantReal, false, false};
  if (method == "dni") return {AlternationPolicy::ConstantSynthetic, false, true};
  if (method == "bptt_restart") return {AlternationPolicy::ConstantReal, true, false};
  if (method == "dni_restart") return {AlternationPolicy::ConstantSynthetic, true, true};
  if (method == "alternating") return {AlternationPolicy::Alternate, true, true};
  throw ConfigError("unknown method '" + method + "'");
}

struct FinalReport {
  double test_perplexity = 0;
  double best_val_ppl = 0;
  long best_val_epoch = -1;
  long epochs = 0;
  double wall_seconds = 0;
};

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <class Scalar>
class Experiment {
 public:
  static Experiment fresh(const ExperimentConfig& cfg) {
    Experiment e(cfg);
    e.init_params();
    return e;
  }

  static Experiment from_checkpoint(const std::string& path, const ExperimentConfig* expect_cfg = nullptr) {
    CheckpointData<Scalar> d = load_checkpoint<Scalar>(path);
    ExperimentConfig cfg;
    apply_config_text(cfg, d.config_text);
    cfg.validate();
    if (expect_cfg && config_hash(*expect_cfg) != d.config_hash)
      throw ConfigError("checkpoint/config hash mismatch: checkpoint was produced by a different config");
    Experiment e(cfg, &d);
    e.restore_params(d);
    return e;
  }

  /// Train from the current epoch to the budget; writes metrics.csv,
  /// report.json and checkpoints under out_dir.
  FinalReport run(const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const auto start = std::chrono::steady_clock::now();

    std::ofstream csv(out_dir + "/metrics.csv", std::ios::binary);
    if (!csv) throw DataError("cannot write metrics.csv under " + out_dir);
    csv << "epoch,run_index,mode,lr,train_loss,val_ppl,elapsed_s\n";
    csv.flush();

    TrainFlags flags;
    flags.train_dni_during_real = cfg_.train_dni_during_real;
    flags.clip = cfg_.clip;

    for (long epoch = epochs_done_; epoch < cfg_.epochs; ++epoch) {
      const GradientMode mode = mode_for(arm_.policy, sched_.run_index);
      const double lr = arm_.restarts ? lr_at(sched_) : cfg_.lr;

      EpochStats stats =
          run_epoch(model_, arm_.dni ? &dni_ : nullptr, arm_.dni ? &bank_ : nullptr, mode, *train_stream_,
                    base_opt_, (arm_.dni && !cfg_.freeze_dni) ? &meta_opt_ : nullptr, lr, cfg_.lr_dni, flags);
      const double val = evaluate(model_, *valid_stream_);
      if (best_val_epoch_ < 0 || val < best_val_) {
        best_val_ = val;
        best_val_epoch_ = epoch;
      }

      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      csv << epoch << ',' << sched_.run_index << ',' << mode_name(mode) << ',' << format_g17(lr) << ','
          << format_g17(stats.mean_loss) << ',' << format_g17(val) << ',' << format_g17(elapsed) << '\n';
      csv.flush();

      bool restarted = false;
      if (arm_.restarts) {
        const AdvanceResult adv = advance_epoch(sched_, arm_.policy);
        restarted = adv.restarted;
        if (restarted && cfg_.reset_on_restart) {
          base_opt_.reset_moments();
          meta_opt_.reset_moments();
          bank_.reset_restart();
        }
      }
      epochs_done_ = epoch + 1;
      if (restarted || (cfg_.checkpoint_every > 0 && epochs_done_ % cfg_.checkpoint_every == 0))
        save(out_dir + "/ckpt_epoch_" + std::to_string(epochs_done_) + ".bin");
    }

    FinalReport rep;
    rep.test_perplexity = evaluate(model_, *test_stream_);
    rep.best_val_ppl = best_val_;
    rep.best_val_epoch = best_val_epoch_;
    rep.epochs = epochs_done_;
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    save(out_dir + "/ckpt_final.bin");
    std::ofstream rj(out_dir + "/report.json", std::ios::binary);
    rj << "{\n"
       << "  \"method\": \"" << cfg_.method << "\",\n"
       << "  \"epochs\": " << rep.epochs << ",\n"
       << "  \"test_perplexity\": " << format_g17(rep.test_perplexity) << ",\n"
       << "  \"best_val_ppl\": " << format_g17(rep.best_val_ppl) << ",\n"
       << "  \"best_val_epoch\": " << rep.best_val_epoch << ",\n"
       << "  \"wall_time_s\": " << format_g17(rep.wall_seconds) << "\n"
       << "}\n";
    return rep;
  }

  void save(const std::string& path) const {
    CheckpointData<Scalar> d;
    d.config_hash = config_hash(cfg_);
    d.config_text = cfg_.canonical_string();
    d.vocab_mode = vocab_.mode == VocabMode::Word ? 1 : 0;
    for (std::size_t i = 0; i < vocab_.size(); ++i) d.vocab_tokens.push_back(vocab_.token(i));
    d.epochs_done = static_cast<std::uint32_t>(epochs_done_);
    d.best_val_ppl = best_val_;
    d.best_val_epoch = static_cast<std::uint32_t>(best_val_epoch_ < 0 ? 0 : best_val_epoch_);
    d.sched = sched_;
    d.rng_raw = rng_raw_;

    auto base = lm_params(const_cast<LMModel<Scalar>&>(model_));
    for (auto& np : base) d.tensors.emplace("base." + np.name, *np.tensor);
    for (std::size_t l = 0; l < dni_.size(); ++l)
      for (auto& np : dni_params(const_cast<DNIParams<Scalar>&>(dni_[l]), "dni" + std::to_string(l) + "."))
        d.tensors.emplace(np.name, *np.tensor);

    auto dump_opt = [&](const AdamOptimizer<Scalar>& opt, const std::string& prefix,
                        std::vector<std::int64_t>& ts) {
      for (std::size_t i = 0; i < opt.states.size(); ++i) {
        ts.push_back(opt.states[i].t);
        if (opt.states[i].m.size() > 0) {
          d.tensors.emplace(prefix + std::to_string(i) + ".m", opt.states[i].m);
          d.tensors.emplace(prefix + std::to_string(i) + ".v", opt.states[i].v);
        }
      }
    };
    dump_opt(base_opt_, "adam_base.", d.adam_base_t);
    dump_opt(meta_opt_, "adam_meta.", d.adam_meta_t);
    save_checkpoint(path, d);
  }

  // Exposed for tests and the eval subcommand.
  const ExperimentConfig& config() const { return cfg_; }
  LMModel<Scalar>& model() { return model_; }
  const Vocab& vocab() const { return vocab_; }
  const RestartSchedule& schedule() const { return sched_; }
  long epochs_done() const { return epochs_done_; }

  double evaluate_corpus(const std::string& path) {
    const std::string text = read_text_file(path);
    BatchStream stream(tokenize(text, vocab_), static_cast<std::size_t>(cfg_.batch),
                       static_cast<std::size_t>(cfg_.trunc));
    return evaluate(model_, stream);
  }

 private:
  explicit Experiment(const ExperimentConfig& cfg, const CheckpointData<Scalar>* ckpt = nullptr)
      : cfg_(cfg), arm_(arm_settings(cfg.method)) {
    const std::string train_text = read_text_file(cfg_.train_path);
    if (ckpt) {
      // The stored token list is authoritative: ids must match bit-exactly.
      Vocab v;
      v.mode = ckpt->vocab_mode ? VocabMode::Word : VocabMode::Char;
      v.set_tokens(ckpt->vocab_tokens);
      vocab_ = v;
    } else {
      vocab_ = build_vocab(train_text, cfg_.mode == "word" ? VocabMode::Word : VocabMode::Char,
                           static_cast<std::size_t>(cfg_.vocab_max));
    }
    const std::string valid_text = cfg_.valid_path.empty() ? train_text : read_text_file(cfg_.valid_path);
    const std::string test_text = cfg_.test_path.empty() ? valid_text : read_text_file(cfg_.test_path);

    const auto B = static_cast<std::size_t>(cfg_.batch);
    const auto T = static_cast<std::size_t>(cfg_.trunc);
    train_stream_ = std::make_unique<BatchStream>(tokenize(train_text, vocab_), B, T);
    valid_stream_ = std::make_unique<BatchStream>(tokenize(valid_text, vocab_), B, T);
    test_stream_ = std::make_unique<BatchStream>(tokenize(test_text, vocab_), B, T);

    sched_.e_base = cfg_.e_base;
    sched_.eta_min = 0.0;
    sched_.eta_max = cfg_.lr;
  }

  void init_params() {
    RngState rng(cfg_.seed);
    model_ = lm_init<Scalar>(vocab_.size(), static_cast<std::size_t>(cfg_.embed),
                             static_cast<std::size_t>(cfg_.hidden), static_cast<std::size_t>(cfg_.layers),
                             static_cast<int>(cfg_.k), rng);
    // The DNI draws from a forked stream so arms with and without a DNI see
    // identical base initializations.
    if (arm_.dni) {
      RngState drng = rng.fork(0x0D11);
      for (long l = 0; l < cfg_.layers; ++l)
        dni_.push_back(dni_init<Scalar>(static_cast<std::size_t>(cfg_.d_g), drng));
      bank_.init(static_cast<std::size_t>(cfg_.layers), static_cast<std::size_t>(cfg_.hidden),
                 static_cast<std::size_t>(cfg_.batch), static_cast<std::size_t>(cfg_.d_g));
    }
    base_opt_.init(lm_params(model_).size());
    std::size_t n_meta = 0;
    for (auto& d : dni_) n_meta += dni_params(d).size();
    meta_opt_.init(n_meta);
    rng_raw_ = rng.raw_state();
  }

  void restore_params(const CheckpointData<Scalar>& d) {
    init_params();
    auto fetch = [&](const std::string& name) -> const Tensor<Scalar>& {
      auto it = d.tensors.find(name);
      if (it == d.tensors.end()) throw DataError("checkpoint missing record " + name);
      return it->second;
    };
    for (auto& np : lm_params(model_)) *np.tensor = fetch("base." + np.name);
    for (std::size_t l = 0; l < dni_.size(); ++l)
      for (auto& np : dni_params(dni_[l], "dni" + std::to_string(l) + ".")) *np.tensor = fetch(np.name);

    auto load_opt = [&](AdamOptimizer<Scalar>& opt, const std::string& prefix,
                        const std::vector<std::int64_t>& ts) {
      if (ts.size() != opt.states.size()) throw DataError("checkpoint optimizer state count mismatch");
      for (std::size_t i = 0; i < ts.size(); ++i) {
        opt.states[i].t = ts[i];
        auto it = d.tensors.find(prefix + std::to_string(i) + ".m");
        if (it != d.tensors.end()) {
          opt.states[i].m = it->second;
          opt.states[i].v = d.tensors.at(prefix + std::to_string(i) + ".v");
        }
      }
    };
    load_opt(base_opt_, "adam_base.", d.adam_base_t);
    load_opt(meta_opt_, "adam_meta.", d.adam_meta_t);

    sched_ = d.sched;
    rng_raw_ = d.rng_raw;
    epochs_done_ = d.epochs_done;
    best_val_ = d.best_val_ppl;
    best_val_epoch_ = d.epochs_done > 0 ? static_cast<long>(d.best_val_epoch) : -1;
  }

  ExperimentConfig cfg_;
  ArmSettings arm_;
  Vocab vocab_;
  std::unique_ptr<BatchStream> train_stream_, valid_stream_, test_stream_;
  LMModel<Scalar> model_;
  std::vector<DNIParams<Scalar>> dni_;
  DNIStateBank<Scalar> bank_;
  AdamOptimizer<Scalar> base_opt_, meta_opt_;
  RestartSchedule sched_;
  std::uint64_t rng_raw_ = 0;
  long epochs_done_ = 0;
  double best_val_ = 0;
  long best_val_epoch_ = -1;
};

inline std::string output_dir_from_env() {
  const char* v = std::getenv("ALTSG_OUT_DIR");
  return v && *v ? std::string(v) : std::string(".");
}

}  // namespace altsg

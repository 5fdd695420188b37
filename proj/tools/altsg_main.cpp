// Experiment CLI: train / eval / resume / gradcheck.
//
// Exit codes: 0 ok, 1 internal error, 2 config error, 3 data error,
// 4 numeric abort.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "altsg/experiment.hpp"
#include "altsg/gradcheck_suite.hpp"

namespace {

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& kvs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw altsg::ConfigError("override must be key=value, got: " + kv);
    out.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return out;
}

template <class Scalar>
int do_train(const altsg::ExperimentConfig& cfg) {
  auto exp = altsg::Experiment<Scalar>::fresh(cfg);
  const std::string out_dir = altsg::output_dir_from_env();
  const altsg::FinalReport rep = exp.run(out_dir);
  std::printf("method=%s epochs=%ld test_ppl=%.6f best_val_ppl=%.6f (epoch %ld)\n", cfg.method.c_str(),
              rep.epochs, rep.test_perplexity, rep.best_val_ppl, rep.best_val_epoch);
  std::printf("wrote %s/metrics.csv and %s/report.json\n", out_dir.c_str(), out_dir.c_str());
  return 0;
}

template <class Scalar>
int do_resume(const std::string& ckpt, const altsg::ExperimentConfig* expect) {
  auto exp = altsg::Experiment<Scalar>::from_checkpoint(ckpt, expect);
  const std::string out_dir = altsg::output_dir_from_env();
  const altsg::FinalReport rep = exp.run(out_dir);
  std::printf("resumed %s: epochs=%ld test_ppl=%.6f best_val_ppl=%.6f (epoch %ld)\n", ckpt.c_str(),
              rep.epochs, rep.test_perplexity, rep.best_val_ppl, rep.best_val_epoch);
  return 0;
}

template <class Scalar>
int do_eval(const std::string& ckpt, const std::string& corpus) {
  auto exp = altsg::Experiment<Scalar>::from_checkpoint(ckpt);
  const double ppl = exp.evaluate_corpus(corpus);
  std::printf("perplexity=%.6f\n", ppl);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"truncated-BPTT language model trainer with neuron-wise synthetic gradients"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, corpus_path;
  std::vector<std::string> overrides;

  auto* train = app.add_subcommand("train", "train per the config's method arm");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--set", overrides, "config override key=value (repeatable)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--corpus", corpus_path, "plain-text corpus")->required();

  auto* resume = app.add_subcommand("resume", "continue a run from a checkpoint");
  resume->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  resume->add_option("--config", config_path, "optional config; its hash must match the checkpoint");

  auto* gradcheck = app.add_subcommand("gradcheck", "run the finite-difference oracle suite");

  try {
    app.parse(argc, argv);

    if (gradcheck->parsed()) return altsg::run_gradcheck_suite(std::cout) ? 0 : 1;

    if (train->parsed()) {
      const altsg::ExperimentConfig cfg = altsg::load_config(config_path, parse_overrides(overrides));
      return cfg.precision == 32 ? do_train<float>(cfg) : do_train<double>(cfg);
    }
    if (eval->parsed()) {
      return altsg::checkpoint_precision(ckpt_path) == 32 ? do_eval<float>(ckpt_path, corpus_path)
                                                          : do_eval<double>(ckpt_path, corpus_path);
    }
    if (resume->parsed()) {
      std::optional<altsg::ExperimentConfig> expect;
      if (!config_path.empty()) expect = altsg::load_config(config_path);
      const int prec = altsg::checkpoint_precision(ckpt_path);
      return prec == 32 ? do_resume<float>(ckpt_path, expect ? &*expect : nullptr)
                        : do_resume<double>(ckpt_path, expect ? &*expect : nullptr);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const altsg::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const altsg::DataError& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const altsg::NumericError& e) {
    std::cerr << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
}

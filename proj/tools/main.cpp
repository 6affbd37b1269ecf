#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "datasets.hpp"
#include "regemb/analysis.hpp"
#include "regemb/checkpoint.hpp"
#include "regemb/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

struct CommonOpts {
  std::uint64_t seed = 0;
  std::string method = "are";
  std::string meta = "cnn";
  int h = 256;
  int region = 9;
  int u = 32;
  int batch = 16;
  double lr = 1e-4;
  int epochs = 20;
  std::string out_dir;

  CLI::Option* h_opt = nullptr;
  CLI::Option* region_opt = nullptr;
};

void add_common(CLI::App& app, CommonOpts& opts) {
  app.set_help_flag("--help", "print help");  // frees -h for the embedding size
  app.option_defaults()->always_capture_default();  // makes snapshots replayable
  app.set_config("--config", "", "key=value config file; command-line flags win");
  app.add_option("--seed", opts.seed, "RNG seed");
  app.add_option("--method", opts.method, "are | lre | conv")
      ->check(CLI::IsMember({"are", "lre", "conv"}));
  app.add_option("--meta", opts.meta,
                 "cnn | smallcnn | factoredcnn | lstm | gru | ensemble")
      ->check(CLI::IsMember(
          {"cnn", "smallcnn", "factoredcnn", "lstm", "gru", "ensemble"}));
  opts.h_opt = app.add_option("--h", opts.h, "embedding size")->check(CLI::PositiveNumber);
  opts.region_opt =
      app.add_option("--region", opts.region, "region size 2c+1 (odd)");
  app.add_option("--u", opts.u, "factored meta-network rank");
  app.add_option("--batch", opts.batch, "mini-batch size");
  app.add_option("--lr", opts.lr, "learning rate");
  app.add_option("--epochs", opts.epochs, "training epochs");
  app.add_option("--out", opts.out_dir, "output directory");
}

int region_to_radius(int region) {
  if (region < 1 || region % 2 == 0) {
    throw regemb::ConfigError("region size must be odd and >= 1, got " +
                              std::to_string(region));
  }
  return (region - 1) / 2;
}

regemb::ModelSpec spec_from_opts(const CommonOpts& opts, int n, int v) {
  regemb::ModelSpec spec;
  spec.method = regemb::method_from_name(opts.method);
  spec.meta = regemb::meta_net_kind_from_name(opts.meta);
  spec.h = opts.h;
  spec.c = region_to_radius(opts.region);
  spec.n = n;
  spec.v = v;
  spec.u = opts.u;
  return spec;
}

void write_text_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw regemb::Error("cannot write " + path);
  out << contents;
}

int num_classes_from(const std::vector<regemb::RawDocument>& docs) {
  int n = 0;
  for (const auto& d : docs) n = std::max(n, d.label + 1);
  return std::max(n, 2);
}

int cmd_train(CLI::App& app, CommonOpts& opts, const std::string& train_path,
              int min_count, std::size_t max_len, int eval_every,
              double val_fraction, std::uint64_t max_steps, int runs) {
  if (opts.out_dir.empty()) {
    throw regemb::ConfigError("train requires --out");
  }
  if (runs < 1) {
    throw regemb::ConfigError("--runs must be >= 1");
  }
  fs::create_directories(opts.out_dir);

  auto raw = regemb::load_csv(train_path);
  if (raw.empty()) throw regemb::EmptyCorpusError("no documents in " + train_path);
  const int n = num_classes_from(raw);

  std::vector<std::vector<std::string>> token_docs;
  token_docs.reserve(raw.size());
  for (const auto& d : raw) token_docs.push_back(regemb::tokenize(d.text));
  regemb::Vocabulary vocab = regemb::build_vocab(token_docs, min_count);

  const int c = region_to_radius(opts.region);
  regemb::EncodedCorpus corpus = regemb::encode_corpus(raw, vocab, c, max_len);

  regemb::ModelSpec spec = spec_from_opts(opts, n, vocab.size());

  // replayable snapshot of every resolved option
  write_text_file(opts.out_dir + "/resolved.cfg", app.config_to_str(true, false));

  json summary;
  summary["documents"] = corpus.docs.size();
  summary["vocab_size"] = vocab.size();
  summary["classes"] = n;
  summary["runs"] = runs;

  double best_val_sum = 0.0;
  std::size_t best_val_count = 0;
  json run_list = json::array();
  for (int run = 0; run < runs; ++run) {
    const std::string run_dir =
        runs == 1 ? opts.out_dir : opts.out_dir + "/run" + std::to_string(run);
    fs::create_directories(run_dir);
    const std::uint64_t run_seed = opts.seed + static_cast<std::uint64_t>(run);

    regemb::Rng rng(run_seed);
    regemb::ModelParams params = regemb::init_model(spec, rng);
    regemb::TrainState state = regemb::init_train_state(params);

    regemb::TrainConfig config;
    config.batch_size = opts.batch;
    config.learning_rate = opts.lr;
    config.epochs = opts.epochs;
    config.seed = run_seed;
    config.eval_every = eval_every;
    config.val_fraction = val_fraction;
    config.max_steps = max_steps;
    config.checkpoint_dir = run_dir;

    regemb::TrainResult result =
        regemb::train(params, spec, corpus.docs, config, state, &vocab);
    regemb::write_metric_log(run_dir + "/metrics.ndjson", result.log);
    regemb::save_checkpoint(run_dir + "/model.ckpt", spec, params, &vocab);

    json entry;
    entry["seed"] = run_seed;
    entry["steps"] = result.steps_run;
    entry["best_val_acc"] = result.best_val_acc;
    entry["checkpoint"] = run_dir + "/model.ckpt";
    entry["metrics"] = run_dir + "/metrics.ndjson";
    run_list.push_back(entry);
    if (result.best_val_acc >= 0.0) {
      best_val_sum += result.best_val_acc;
      ++best_val_count;
    }
  }
  summary["run_results"] = run_list;
  if (best_val_count > 0) {
    summary["mean_best_val_acc"] = best_val_sum / static_cast<double>(best_val_count);
  }
  if (runs == 1) {
    summary["steps"] = run_list[0]["steps"];
    summary["best_val_acc"] = run_list[0]["best_val_acc"];
    summary["checkpoint"] = run_list[0]["checkpoint"];
    summary["metrics"] = run_list[0]["metrics"];
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

// explicit flags must agree with the stored spec
void check_spec_overrides(const CommonOpts& opts, const regemb::ModelSpec& spec,
                          const CLI::App& app) {
  if (app.count("--method") && regemb::method_from_name(opts.method) != spec.method) {
    throw regemb::ShapeMismatchError("checkpoint was trained with --method " +
                                     std::string(regemb::method_name(spec.method)));
  }
  if (app.count("--h") && opts.h != spec.h) {
    throw regemb::ShapeMismatchError("checkpoint was trained with --h " +
                                     std::to_string(spec.h));
  }
  if (app.count("--region") && region_to_radius(opts.region) != spec.c) {
    throw regemb::ShapeMismatchError("checkpoint was trained with --region " +
                                     std::to_string(spec.region()));
  }
}

int cmd_eval(CLI::App& app, CommonOpts& opts, const std::string& checkpoint_path,
             const std::string& test_path, std::size_t max_len) {
  regemb::LoadedCheckpoint loaded = regemb::load_checkpoint(checkpoint_path);
  check_spec_overrides(opts, loaded.spec, app);
  if (!loaded.has_vocab) {
    throw regemb::FormatError("checkpoint carries no vocabulary; cannot encode text");
  }
  auto raw = regemb::load_csv(test_path);
  if (raw.empty()) throw regemb::EmptyCorpusError("no documents in " + test_path);
  for (const auto& d : raw) {
    if (d.label >= loaded.spec.n) {
      throw regemb::LabelError("test label " + std::to_string(d.label + 1) +
                               " exceeds model classes " +
                               std::to_string(loaded.spec.n));
    }
  }
  regemb::EncodedCorpus corpus =
      regemb::encode_corpus(raw, loaded.vocab, loaded.spec.c, max_len);

  const std::int64_t t0 = now_ms();
  regemb::EvalResult result =
      regemb::evaluate(corpus.docs, loaded.params, loaded.spec);
  json out;
  out["accuracy"] = result.accuracy;
  out["mean_loss"] = result.mean_loss;
  out["confusion"] = result.confusion;
  out["documents"] = corpus.docs.size();
  out["wall_ms"] = now_ms() - t0;
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_count_params(CLI::App& app, CommonOpts& opts, const std::string& dataset,
                     long long v_flag, int n_flag) {
  long long v = v_flag;
  int n = n_flag;
  std::optional<regemb::cli::KnownDataset> known;
  if (!dataset.empty()) {
    known = regemb::cli::find_dataset(dataset);
    if (!known) {
      throw regemb::ConfigError("unknown dataset: " + dataset);
    }
    v = known->vocab_size;
    n = known->classes;
    // published totals use the method's own best configuration
    if (!app.count("--h") && !app.count("--region")) {
      if (opts.method == "lre") {
        opts.h = 128;
        opts.region = 7;
      } else {
        opts.h = 256;
        opts.region = 9;
      }
    }
  }
  if (v <= 0 || n < 2) {
    throw regemb::ConfigError("count-params needs --dataset or both --v and --n");
  }

  regemb::ModelSpec spec = spec_from_opts(opts, n, static_cast<int>(v));
  regemb::ParamBreakdown b = regemb::count_params(spec);

  json out;
  out["method"] = opts.method;
  out["meta"] = opts.meta;
  out["h"] = spec.h;
  out["region"] = spec.region();
  out["v"] = spec.v;
  out["n"] = spec.n;
  out["embedding"] = b.embedding;
  out["context_unit"] = b.context_unit;
  out["batch_norm"] = b.batch_norm;
  out["fc"] = b.fc;
  out["context_unit_only"] = b.context_unit_only();
  out["total"] = b.total();
  if (known) {
    long long reference = 0;
    if (spec.method == regemb::Method::Are) {
      reference = known->are_total;
    } else if (spec.method == regemb::Method::Lre) {
      reference = known->lre_total;
    }
    if (reference > 0) {
      out["reference_total"] = reference;
      out["reference_match"] = reference == b.total() ? "MATCH" : "MISMATCH";
    }
  }
  std::cout << out.dump() << "\n";

  std::fprintf(stderr, "%-18s %15s\n", "component", "parameters");
  std::fprintf(stderr, "%-18s %15lld\n", "embedding", b.embedding);
  std::fprintf(stderr, "%-18s %15lld\n", "context-unit", b.context_unit);
  std::fprintf(stderr, "%-18s %15lld\n", "batch-norm", b.batch_norm);
  std::fprintf(stderr, "%-18s %15lld\n", "fully-connected", b.fc);
  std::fprintf(stderr, "%-18s %15lld\n", "total", b.total());
  return 0;
}

int cmd_saliency(CLI::App& app, CommonOpts& opts, const std::string& checkpoint_path,
                 const std::string& text, const std::string& format_name) {
  regemb::LoadedCheckpoint loaded = regemb::load_checkpoint(checkpoint_path);
  check_spec_overrides(opts, loaded.spec, app);
  if (!loaded.has_vocab) {
    throw regemb::FormatError("checkpoint carries no vocabulary; cannot encode text");
  }
  std::vector<std::string> tokens = regemb::tokenize(text);
  if (tokens.empty()) {
    throw regemb::EmptyDocumentError("empty document: no tokens in input text");
  }
  regemb::EncodedDocument doc;
  doc.token_indices = regemb::encode(tokens, loaded.vocab, loaded.spec.c);
  doc.pad_radius = loaded.spec.c;
  doc.label = -1;  // unknown

  regemb::SaliencyReport report =
      regemb::saliency(doc, tokens, loaded.params, loaded.spec);
  std::cout << regemb::render_saliency(
      report, regemb::render_format_from_name(format_name));
  if (format_name == "json") std::cout << "\n";
  return 0;
}

void print_usage(std::ostream& out) {
  out << "usage: regemb <train|eval|count-params|saliency> [options]\n"
         "run `regemb <command> --help` for the command's options\n";
}

// -1 when parsing succeeded; otherwise the process exit code
int parse_or_exit(CLI::App& app, int argc, char** argv) {
  try {
    app.parse(argc, argv);
    return -1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
}

// One standalone parser per command so that --config files apply to the
// command's own flat option set.
int dispatch(int argc, char** argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    return 2;
  }
  const std::string cmd = argv[1];
  if (cmd == "help" || cmd == "--help" || cmd == "-h") {
    print_usage(std::cout);
    return 0;
  }

  CommonOpts opts;
  if (cmd == "train") {
    CLI::App app{"train a model on a CSV corpus", "regemb train"};
    add_common(app, opts);
    std::string train_path;
    int min_count = 2;
    std::size_t max_len = 256;
    int eval_every = 50;
    double val_fraction = 0.05;
    std::uint64_t max_steps = 0;
    int runs = 1;
    app.add_option("--train", train_path, "training CSV")->required();
    app.add_option("--min-count", min_count, "vocabulary frequency threshold");
    app.add_option("--max-len", max_len, "truncate documents to this many tokens");
    app.add_option("--eval-every", eval_every, "steps between validation runs");
    app.add_option("--val-fraction", val_fraction, "held-out fraction of training data");
    app.add_option("--max-steps", max_steps, "stop after this many optimizer steps");
    app.add_option("--runs", runs, "train this many seeds (seed, seed+1, ...) and average");
    if (int code = parse_or_exit(app, argc - 1, argv + 1); code >= 0) return code;
    return cmd_train(app, opts, train_path, min_count, max_len, eval_every,
                     val_fraction, max_steps, runs);
  }
  if (cmd == "eval") {
    CLI::App app{"evaluate a checkpoint on a CSV corpus", "regemb eval"};
    add_common(app, opts);
    std::string ckpt, test_path;
    std::size_t max_len = 256;
    app.add_option("--checkpoint", ckpt, "model checkpoint")->required();
    app.add_option("--test", test_path, "test CSV")->required();
    app.add_option("--max-len", max_len, "truncate documents to this many tokens");
    if (int code = parse_or_exit(app, argc - 1, argv + 1); code >= 0) return code;
    return cmd_eval(app, opts, ckpt, test_path, max_len);
  }
  if (cmd == "count-params") {
    CLI::App app{"closed-form parameter counts", "regemb count-params"};
    add_common(app, opts);
    std::string dataset;
    long long v_flag = 0;
    int n_flag = 0;
    app.add_option("--dataset", dataset, "known dataset name (ag, sogou, dbpedia, "
                                         "yelp_p, yelp_f, yahoo, amazon_p, amazon_f)");
    app.add_option("--v", v_flag, "vocabulary size");
    app.add_option("--n", n_flag, "class count");
    if (int code = parse_or_exit(app, argc - 1, argv + 1); code >= 0) return code;
    return cmd_count_params(app, opts, dataset, v_flag, n_flag);
  }
  if (cmd == "saliency") {
    CLI::App app{"per-token first-derivative saliency", "regemb saliency"};
    add_common(app, opts);
    std::string ckpt, text, format = "json";
    app.add_option("--checkpoint", ckpt, "model checkpoint")->required();
    app.add_option("--text", text, "input text");
    app.add_option("--format", format, "json | ansi | html")
        ->check(CLI::IsMember({"json", "ansi", "html"}));
    if (int code = parse_or_exit(app, argc - 1, argv + 1); code >= 0) return code;
    return cmd_saliency(app, opts, ckpt, text, format);
  }

  std::cerr << "error: usage: unknown command '" << cmd << "'\n";
  print_usage(std::cerr);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      CLI::App dummy;
      return dummy.exit(e);  // --help
    }
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const regemb::NumericalError& e) {
    std::cerr << "error: numerical: " << e.what() << "\n";
    return 4;
  } catch (const regemb::VersionError& e) {
    std::cerr << "error: compatibility: " << e.what() << "\n";
    return 3;
  } catch (const regemb::ShapeMismatchError& e) {
    std::cerr << "error: compatibility: " << e.what() << "\n";
    return 3;
  } catch (const regemb::Error& e) {
    std::cerr << "error: input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

// Command-line front end: fit | generate | augment | search | benchmark.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <charconv>

#include "vos/baselines.hpp"
#include "vos/dataset.hpp"
#include "vos/evaluation.hpp"
#include "vos/model_io.hpp"
#include "vos/vos_model.hpp"

namespace vos::cli {

inline Architecture parse_architecture(const std::string& text) {
  std::vector<std::size_t> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || ptr != item.data() + item.size() || v == 0)
      throw ConfigError("invalid --arch '" + text + "': expected h:dz1:dz2 with positive integers");
    parts.push_back(v);
  }
  if (parts.size() != 3) throw ConfigError("invalid --arch '" + text + "': expected h:dz1:dz2");
  return Architecture::symmetric(parts[0], parts[1], parts[2]);
}

inline Oversampler parse_method(const std::string& s) {
  if (s == "vos") return Oversampler::kVos;
  if (s == "smote") return Oversampler::kSmote;
  if (s == "adasyn") return Oversampler::kAdasyn;
  if (s == "none") return Oversampler::kNone;
  throw ConfigError("unknown method '" + s + "'");
}

inline ClassifierKind parse_classifier(const std::string& s) {
  if (s == "lr") return ClassifierKind::kLogReg;
  if (s == "mlp") return ClassifierKind::kMlp;
  throw ConfigError("unknown classifier '" + s + "'");
}

/// Reads flat `key = value` lines; '#' starts a comment.
inline std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto t = std::string(detail::trim(line));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key=value");
    auto key = std::string(detail::trim(std::string_view(t).substr(0, eq)));
    auto value = std::string(detail::trim(std::string_view(t).substr(eq + 1)));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(n) + ": empty key");
    out[key] = value;
  }
  return out;
}

namespace detail {

/// Expands `--config FILE` into explicit flags placed right after the
/// subcommand. Keys given on the command line are skipped so flags win; keys
/// the chosen subcommand does not accept are ignored unless no subcommand
/// knows them.
inline std::vector<std::string> expand_config(std::vector<std::string> args, const CLI::App& app) {
  std::optional<std::string> config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw ConfigError("--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!config_path) return rest;
  std::set<std::string> given;
  for (const auto& a : rest) {
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    given.insert(a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2));
  }
  const CLI::App* sub = nullptr;
  std::size_t sub_pos = rest.size();
  for (std::size_t i = 1; i < rest.size() && !sub; ++i) {
    for (const auto* s : app.get_subcommands({})) {
      if (s->get_name() == rest[i]) {
        sub = s;
        sub_pos = i;
        break;
      }
    }
  }
  const auto settings = read_config_file(*config_path);
  std::vector<std::string> injected;
  for (const auto& [key, value] : settings) {
    bool known = false;
    for (const auto* s : app.get_subcommands({})) known = known || s->get_option_no_throw("--" + key) != nullptr;
    if (!known) throw ConfigError(*config_path + ": unknown key '" + key + "'");
    if (!sub || !sub->get_option_no_throw("--" + key) || given.count(key)) continue;
    const auto* opt = sub->get_option_no_throw("--" + key);
    if (opt->get_type_size() == 0) {
      if (value == "true" || value == "1") injected.push_back("--" + key);
      else if (value != "false" && value != "0") throw ConfigError(*config_path + ": flag '" + key + "' expects true/false");
      continue;
    }
    // Comma lists feed repeatable options.
    injected.push_back("--" + key);
    injected.push_back(value);
  }
  std::vector<std::string> out(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(std::min(sub_pos + 1, rest.size())));
  out.insert(out.end(), injected.begin(), injected.end());
  if (sub_pos + 1 < rest.size()) out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(sub_pos + 1), rest.end());
  return out;
}

struct TrainingFlags {
  std::size_t epochs = 100;
  double lr = 0.01;
  std::size_t batch = 64;
  double momentum = 0.0;
  std::string arch = "40:10:5";

  void add_to(CLI::App* app, bool with_arch = true) {
    app->add_option("--epochs", epochs, "VOS training epochs")->capture_default_str();
    app->add_option("--lr", lr, "VOS learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch", batch, "VOS mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--momentum", momentum, "heavy-ball momentum in [0,1)")->capture_default_str();
    if (with_arch) app->add_option("--arch", arch, "VOS architecture h:dz1:dz2")->capture_default_str();
  }

  TrainConfig config(std::uint64_t seed, std::size_t n_rows) const {
    return {lr, epochs, std::min(batch, std::max<std::size_t>(n_rows, 1)), seed, momentum};
  }
};

inline void print_warnings(std::ostream& err, const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

/// Real rows untouched; synthetic rows mapped back through the scaler unless kept standardised.
inline Dataset export_augmented(const Dataset& original, const Dataset& augmented_std, const ScalerParams& scaler,
                                bool keep_standardized) {
  if (keep_standardized) return augmented_std;
  Dataset out = original;
  Matrix synth(0, original.dims());
  for (std::size_t i = original.size(); i < augmented_std.size(); ++i) synth.append_row(augmented_std.features.row(i));
  invert_scaler(scaler, synth);
  for (std::size_t i = 0; i < synth.rows(); ++i) {
    out.features.append_row(synth.row(i));
    out.labels.push_back(augmented_std.labels[original.size() + i]);
    out.weights.push_back(augmented_std.weights[original.size() + i]);
    out.provenance.push_back(Provenance::kSynthetic);
    out.row_ids.push_back(kSyntheticRowId);
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  vos::detail::atomic_write(path, [&](std::ostream& o) { o << text; });
}

}  // namespace detail

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Variational oversampling of imbalanced tabular data"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::string label = "class";
  app.footer("Any subcommand accepts --config FILE (flat key=value lines); command-line flags override it.");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "master seed")->capture_default_str();
    sub->add_option("--label", label, "label column name")->capture_default_str();
  };

  // fit
  std::string train_path, out_path, model_path, history_path, test_path;
  detail::TrainingFlags tf;
  auto* fit = app.add_subcommand("fit", "train a VOS model and save it");
  add_common(fit);
  fit->add_option("--train", train_path, "training CSV")->required();
  fit->add_option("--out", out_path, "model file to write")->required();
  fit->add_option("--history", history_path, "optional per-epoch loss CSV");
  tf.add_to(fit);

  // generate
  std::size_t count = 0;
  int label_value = 1;
  bool keep_standardized = false;
  auto* gen = app.add_subcommand("generate", "sample synthetic rows of one class from a saved model");
  add_common(gen);
  gen->add_option("--model", model_path, "model file")->required();
  gen->add_option("--count", count, "number of rows")->required();
  gen->add_option("--out", out_path, "output CSV")->required();
  gen->add_option("--class-value", label_value, "label of generated rows")->capture_default_str()->check(CLI::Range(0, 1));
  gen->add_flag("--keep-standardized", keep_standardized, "emit rows in the model's standardised space");

  // augment
  double ratio = 1.0;
  double synthetic_weight = kDefaultSyntheticWeight;
  std::string method = "vos";
  auto* aug = app.add_subcommand("augment", "append synthetic minority rows until the class ratio is met");
  add_common(aug);
  aug->add_option("--train", train_path, "input CSV")->required();
  aug->add_option("--out", out_path, "output CSV")->required();
  aug->add_option("--model", model_path, "pre-fitted model (vos only); trained inline when omitted");
  aug->add_option("--ratio", ratio, "target minority/majority ratio in (0,1]")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  aug->add_option("--method", method, "vos|smote|adasyn")->capture_default_str()->check(CLI::IsMember({"vos", "smote", "adasyn", "none"}));
  aug->add_option("--synthetic-weight", synthetic_weight, "sample weight of synthetic rows")->capture_default_str();
  aug->add_flag("--keep-standardized", keep_standardized, "emit standardised features");
  tf.add_to(aug);

  // search
  std::size_t k_folds = 5;
  std::vector<std::string> arch_list;
  auto* search = app.add_subcommand("search", "K-fold architecture search");
  add_common(search);
  search->add_option("--train", train_path, "training CSV")->required();
  search->add_option("--k-folds", k_folds, "number of folds")->capture_default_str()->check(CLI::Range(2, 1000));
  search->add_option("--arch", arch_list, "candidate architecture h:dz1:dz2 (repeatable; default grid)")->delimiter(',');
  search->add_option("--out", out_path, "per-fold loss CSV (stdout when omitted)");
  detail::TrainingFlags search_tf;
  search_tf.epochs = 50;
  search_tf.add_to(search, false);

  // benchmark
  std::vector<std::string> methods{"vos", "smote", "adasyn"};
  std::vector<std::string> classifiers{"lr", "mlp"};
  double test_fraction = 0.2;
  std::size_t mlp_epochs = 100;
  auto* bench = app.add_subcommand("benchmark", "oversampler x classifier comparison on an untouched test split");
  add_common(bench);
  bench->add_option("--train", train_path, "training CSV (or full data when --test is omitted)")->required();
  bench->add_option("--test", test_path, "separate test CSV");
  bench->add_option("--test-fraction", test_fraction, "stratified test share when --test is omitted")->capture_default_str();
  bench->add_option("--method", methods, "vos|smote|adasyn|none (repeatable)")->delimiter(',')->capture_default_str();
  bench->add_option("--classifier", classifiers, "lr|mlp (repeatable)")->delimiter(',')->capture_default_str();
  bench->add_option("--ratio", ratio, "target minority/majority ratio")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  bench->add_option("--synthetic-weight", synthetic_weight, "sample weight of synthetic rows")->capture_default_str();
  bench->add_option("--mlp-epochs", mlp_epochs, "MLP classifier epochs")->capture_default_str();
  bench->add_option("--out", out_path, "output prefix: writes PREFIX.csv and PREFIX.jsonl");
  tf.add_to(bench);

  std::vector<std::string> args(argv, argv + argc);
  try {
    args = detail::expand_config(std::move(args), app);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<const char*> cargv;
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (fit->parsed()) {
      const Dataset data = load_csv(train_path, label);
      const ScalerParams scaler = fit_scaler(data);
      detail::print_warnings(err, scaler.warnings);
      const Dataset std_data = apply_scaler(scaler, data);
      VosModel model = make_vos_model(data.kinds, parse_architecture(tf.arch), seed);
      const auto history = train_vos(model, std_data, tf.config(seed, data.size()));
      save_model(out_path, {model, data.columns, scaler});
      if (!history_path.empty()) {
        std::ostringstream h;
        h << "epoch,loss,reconstruction,kl_z2,kl_z1\n";
        for (std::size_t e = 0; e < history.size(); ++e) {
          const auto& s = history[e];
          h << e + 1 << ',' << vos::detail::format_number(s.loss) << ',' << vos::detail::format_number(s.reconstruction)
            << ',' << vos::detail::format_number(s.kl_z2) << ',' << vos::detail::format_number(s.kl_z1) << '\n';
        }
        detail::write_text_file(history_path, h.str());
      }
      out << "trained on " << data.size() << " rows (" << data.count(1) << " positive); ";
      if (!history.empty()) out << "final loss " << vos::detail::format_number(history.back().loss) << "; ";
      out << "model written to " << out_path << '\n';
      return 0;
    }

    if (gen->parsed()) {
      const ModelBundle bundle = load_model(model_path);
      Rng rng = make_rng(seed, Stream::kSample);
      Matrix rows = sample_synthetic(bundle.model, label_value, count, rng);
      if (!keep_standardized && bundle.scaler) invert_scaler(*bundle.scaler, rows);
      std::vector<std::string> columns = bundle.columns;
      Dataset d = Dataset::from_matrix(std::move(rows), std::vector<int>(count, label_value), bundle.model.kinds,
                                       std::move(columns));
      d.provenance.assign(d.size(), Provenance::kSynthetic);
      save_csv(out_path, d, {label, false});
      out << "wrote " << count << " synthetic rows to " << out_path << '\n';
      return 0;
    }

    if (aug->parsed()) {
      const Dataset data = load_csv(train_path, label);
      require_both_classes(data, "augment");
      const ScalerParams scaler = fit_scaler(data);
      detail::print_warnings(err, scaler.warnings);
      const Dataset std_data = apply_scaler(scaler, data);
      Dataset augmented = std_data;
      const int minority = std_data.minority_label();
      if (method == "vos") {
        VosModel model;
        if (!model_path.empty()) {
          ModelBundle bundle = load_model(model_path);
          if (bundle.model.kinds != data.kinds) throw ConfigError("model feature kinds do not match " + train_path);
          model = std::move(bundle.model);
        } else {
          model = make_vos_model(data.kinds, parse_architecture(tf.arch), seed);
          train_vos(model, std_data, tf.config(seed, data.size()));
        }
        Rng rng = make_rng(seed, Stream::kSample);
        augmented = oversample(std_data, model, ratio, rng, synthetic_weight);
      } else if (method == "none") {
      } else if (method == "smote") {
        const auto s = smote(std_data, {5, ratio, seed});
        augmented.append_synthetic(s.rows, s.label, synthetic_weight);
      } else {
        AdasynConfig ac;
        ac.seed = seed;
        ac.beta = adasyn_beta_for_ratio(std_data.count(1 - minority), std_data.count(minority), ratio);
        const auto a = adasyn(std_data, ac);
        detail::print_warnings(err, a.synthetic.warnings);
        augmented.append_synthetic(a.synthetic.rows, a.synthetic.label, synthetic_weight);
      }
      const Dataset exported = detail::export_augmented(data, augmented, scaler, keep_standardized);
      save_csv(out_path, exported, {label, true});
      out << "wrote " << exported.size() << " rows (" << exported.count(Provenance::kSynthetic)
          << " synthetic) to " << out_path << '\n';
      return 0;
    }

    if (search->parsed()) {
      const Dataset data = load_csv(train_path, label);
      const ScalerParams scaler = fit_scaler(data);
      const Dataset std_data = apply_scaler(scaler, data);
      CvConfig cv;
      cv.k = k_folds;
      cv.seed = seed;
      for (const auto& a : arch_list) cv.candidates.push_back(parse_architecture(a));
      const auto result = architecture_search(std_data, cv, search_tf.config(seed, data.size()));
      detail::print_warnings(err, result.warnings);
      std::ostringstream log;
      write_search_log(log, result);
      if (out_path.empty()) {
        out << log.str();
      } else {
        detail::write_text_file(out_path, log.str());
      }
      out << "best architecture: " << result.best.to_string() << '\n';
      return 0;
    }

    if (bench->parsed()) {
      Dataset data = load_csv(train_path, label);
      BenchmarkConfig cfg;
      cfg.seed = seed;
      cfg.target_ratio = ratio;
      cfg.synthetic_weight = synthetic_weight;
      cfg.test_fraction = test_fraction;
      cfg.architecture = parse_architecture(tf.arch);
      cfg.vos_train = tf.config(seed, data.size());
      cfg.mlp.train.epochs = mlp_epochs;
      cfg.oversamplers.clear();
      for (const auto& m : methods) cfg.oversamplers.push_back(parse_method(m));
      cfg.classifiers.clear();
      for (const auto& c : classifiers) cfg.classifiers.push_back(parse_classifier(c));
      if (!test_path.empty()) {
        const Dataset test = load_csv(test_path, label);
        if (test.columns != data.columns) throw ConfigError("test CSV columns differ from training CSV");
        std::vector<std::size_t> test_idx;
        for (std::size_t i = 0; i < test.size(); ++i) {
          test_idx.push_back(data.size());
          data.features.append_row(test.features.row(i));
          data.labels.push_back(test.labels[i]);
          data.weights.push_back(test.weights[i]);
          data.provenance.push_back(test.provenance[i]);
          data.row_ids.push_back(data.row_ids.size());
        }
        // A column binary in one file but not the other is continuous overall.
        for (std::size_t j = 0; j < data.dims(); ++j)
          if (test.kinds[j] != data.kinds[j]) data.kinds[j] = FeatureKind::kContinuous;
        cfg.test_indices = std::move(test_idx);
      }
      const auto result = run_benchmark(data, cfg);
      detail::print_warnings(err, result.warnings);
      std::ostringstream csv, jsonl;
      write_results_csv(csv, result.rows);
      write_results_jsonl(jsonl, result.rows);
      if (!out_path.empty()) {
        detail::write_text_file(out_path + ".csv", csv.str());
        detail::write_text_file(out_path + ".jsonl", jsonl.str());
      }
      out << csv.str();
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace vos::cli

// Command-line front end: generate / preprocess / train / predict /
// evaluate / report. Exit codes: 0 success, 1 usage error, 2 data error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "leafwood/eval/metrics.hpp"
#include "leafwood/infer/predict.hpp"
#include "leafwood/io/point_file.hpp"
#include "leafwood/pre/sample_store.hpp"
#include "leafwood/spatial/shortest_path.hpp"
#include "leafwood/synth/generator.hpp"
#include "leafwood/train/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using leafwood::PointCloud;

/// Collects what a run needs to be replayed and writes it beside the output.
class RunManifest {
 public:
  RunManifest(const std::string& subcommand, int argc, char** argv) {
    j_["tool"] = "leafwood";
    j_["version"] = leafwood::kVersion;
    j_["subcommand"] = subcommand;
    for (int i = 0; i < argc; ++i) j_["argv"].push_back(argv[i]);
  }

  void set(const std::string& key, const nlohmann::json& value) { j_[key] = value; }

  void time_stage(const std::string& name, const std::function<void()>& stage) {
    const auto start = Clock::now();
    stage();
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start);
    j_["timings_ms"][name] = ms.count();
  }

  void write(const std::string& beside) {
    std::ofstream out(beside);
    if (!out) throw leafwood::IoError("cannot write manifest '" + beside + "'");
    out << j_.dump(2) << '\n';
  }

 private:
  nlohmann::json j_;
};

leafwood::io::FileFormat parse_format(const std::string& flag, const std::string& path) {
  if (flag == "ply") return leafwood::io::FileFormat::ply;
  if (flag == "csv") return leafwood::io::FileFormat::csv;
  return leafwood::io::format_from_path(path);
}

// ---------------------------------------------------------------------------

int run_generate(const std::string& config_path, std::uint64_t seed,
                 const std::string& out, const std::string& format, int argc,
                 char** argv) {
  RunManifest manifest("generate", argc, argv);
  leafwood::synth::PlotSpec spec;
  if (!config_path.empty()) spec = leafwood::synth::load_plot_spec(config_path);
  manifest.set("seed", seed);
  manifest.set("config", spec.to_json());
  manifest.set("outputs", {{"cloud", out}});

  PointCloud plot;
  manifest.time_stage("generate", [&] { plot = leafwood::synth::generate_plot(spec, seed); });
  manifest.time_stage("write", [&] {
    leafwood::io::write_point_file(plot, out, parse_format(format, out));
  });
  manifest.write(out + ".manifest.json");
  std::cout << "generated " << plot.size() << " points -> " << out << "\n";
  return 0;
}

int run_preprocess(const std::string& in, const std::string& out_dir,
                   const std::string& config_path, std::uint64_t seed,
                   bool no_ground_removal, unsigned threads, int argc, char** argv) {
  RunManifest manifest("preprocess", argc, argv);
  leafwood::pre::PreprocessConfig cfg;
  if (!config_path.empty()) cfg = leafwood::pre::load_preprocess_config(config_path);
  if (no_ground_removal) cfg.ground_removal = false;
  manifest.set("seed", seed);
  manifest.set("config", cfg.to_json());
  manifest.set("inputs", {{"cloud", in}});
  manifest.set("outputs", {{"samples", out_dir}});

  PointCloud cloud;
  manifest.time_stage("read", [&] { cloud = leafwood::io::read_point_file(in); });
  PointCloud working;
  manifest.time_stage("filter", [&] { working = leafwood::pre::filter_points(cloud, cfg); });
  if (cfg.ground_removal) {
    manifest.time_stage("ground_removal", [&] {
      working = leafwood::pre::remove_ground(working, cfg.cloth_resolution,
                                             cfg.cloth_rigidness, cfg.ground_threshold);
    });
  }
  manifest.time_stage("normalize_reflectance", [&] {
    leafwood::pre::normalize_cloud_reflectance(working);
  });
  std::vector<leafwood::pre::Sample> samples;
  manifest.time_stage("tile", [&] {
    samples = leafwood::pre::make_samples(working, cfg, seed, threads);
  });
  manifest.time_stage("write", [&] {
    leafwood::pre::save_samples(samples, out_dir);
  });
  manifest.write((fs::path(out_dir) / "run_manifest.json").string());
  std::cout << "preprocessed " << cloud.size() << " points into " << samples.size()
            << " samples -> " << out_dir << "\n";
  return 0;
}

int run_train(const std::string& train_dir, const std::string& val_dir,
              const std::string& out, const std::string& net_config_path,
              bool reduced, int epochs, int batch_size, double max_lr,
              std::uint64_t seed, const std::string& checkpoint_dir, double gamma,
              double label_smoothing, bool no_class_weights, bool no_augment,
              int argc, char** argv) {
  RunManifest manifest("train", argc, argv);
  leafwood::model::NetworkConfig net_cfg =
      reduced ? leafwood::model::NetworkConfig::reduced_profile()
              : leafwood::model::NetworkConfig{};
  if (!net_config_path.empty())
    net_cfg = leafwood::model::load_network_config(net_config_path);

  leafwood::train::TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.max_lr = max_lr;
  cfg.seed = seed;
  cfg.checkpoint_dir =
      checkpoint_dir.empty() ? (out + ".checkpoints") : checkpoint_dir;

  leafwood::train::LossConfig loss_cfg;
  loss_cfg.gamma = gamma;
  loss_cfg.label_smoothing = label_smoothing;
  loss_cfg.sample_class_weights = !no_class_weights;

  leafwood::train::AugmentConfig augment_cfg;
  if (no_augment) {
    augment_cfg.reflectance_zero_fraction = 0.0;
    augment_cfg.reflectance_noise_fraction = 0.0;
    augment_cfg.rotation_fraction = 0.0;
  }

  manifest.set("seed", seed);
  manifest.set("network_config", net_cfg.to_json());
  manifest.set("network_digest", net_cfg.digest());
  manifest.set("inputs", {{"train_samples", train_dir}, {"val_samples", val_dir}});
  manifest.set("outputs", {{"weights", out}, {"checkpoints", cfg.checkpoint_dir}});

  std::vector<leafwood::pre::Sample> train_samples, val_samples;
  manifest.time_stage("load", [&] {
    train_samples = leafwood::pre::load_samples(train_dir);
    val_samples = leafwood::pre::load_samples(val_dir);
  });

  leafwood::train::FitResult result;
  manifest.time_stage("fit", [&] {
    result = leafwood::train::fit(train_samples, val_samples, net_cfg, cfg,
                                  loss_cfg, augment_cfg);
  });
  manifest.time_stage("write", [&] {
    leafwood::model::save_weights(result.best_weights, out);
  });
  manifest.set("optimizer_steps", result.optimizer_steps);
  manifest.set("best_epoch", result.best_epoch);
  manifest.set("best_val_ba", result.best_val_ba);
  manifest.write(out + ".manifest.json");
  std::cout << "trained " << result.optimizer_steps << " optimizer steps over "
            << epochs << " epochs; best validation BA " << result.best_val_ba
            << " at epoch " << result.best_epoch << "\n";
  std::cout << "weights -> " << out << "\n";
  return 0;
}

int run_predict(const std::string& in, const std::string& weights_path,
                const std::string& out, const std::string& net_config_path,
                bool reduced, const std::string& pre_config_path,
                const std::string& excluded_out, double threshold, std::size_t k,
                std::uint64_t seed, bool no_ground_removal, unsigned threads,
                int argc, char** argv) {
  RunManifest manifest("predict", argc, argv);
  leafwood::model::NetworkConfig net_cfg =
      reduced ? leafwood::model::NetworkConfig::reduced_profile()
              : leafwood::model::NetworkConfig{};
  if (!net_config_path.empty())
    net_cfg = leafwood::model::load_network_config(net_config_path);
  leafwood::pre::PreprocessConfig pre_cfg;
  if (!pre_config_path.empty())
    pre_cfg = leafwood::pre::load_preprocess_config(pre_config_path);
  if (no_ground_removal) pre_cfg.ground_removal = false;
  leafwood::infer::ConsolidationConfig cons_cfg;
  cons_cfg.wood_threshold = threshold;
  cons_cfg.k = k;
  cons_cfg.validate();

  manifest.set("seed", seed);
  manifest.set("network_config", net_cfg.to_json());
  manifest.set("preprocess_config", pre_cfg.to_json());
  manifest.set("consolidation", {{"k", k}, {"wood_threshold", threshold}});
  manifest.set("inputs", {{"cloud", in}, {"weights", weights_path}});
  manifest.set("outputs", {{"cloud", out}, {"excluded", excluded_out}});

  PointCloud cloud;
  manifest.time_stage("read", [&] { cloud = leafwood::io::read_point_file(in); });
  auto weights = leafwood::model::init_weights<float>(net_cfg, 0);
  manifest.time_stage("load_weights", [&] {
    leafwood::model::load_weights(weights, weights_path);
  });
  leafwood::infer::SegmentationResult result;
  manifest.time_stage("segment", [&] {
    result = leafwood::infer::segment_cloud(cloud, weights, pre_cfg, net_cfg,
                                            cons_cfg, seed, threads);
  });
  manifest.time_stage("write", [&] {
    leafwood::io::write_point_file(result.segmented, out);
    if (!excluded_out.empty() && !result.excluded.empty())
      leafwood::io::write_point_file(result.excluded, excluded_out);
  });
  manifest.write(out + ".manifest.json");
  std::cout << "segmented " << result.segmented.size() << " points ("
            << result.excluded.size() << " excluded) -> " << out << "\n";
  return 0;
}

int run_evaluate(const std::string& pred_path, const std::string& truth_path,
                 const std::string& out_dir, std::size_t graph_k,
                 double weight_floor, double threshold, int argc, char** argv) {
  RunManifest manifest("evaluate", argc, argv);
  manifest.set("inputs", {{"predicted", pred_path}, {"truth", truth_path}});
  manifest.set("outputs", {{"report_dir", out_dir}});
  manifest.set("graph_k", graph_k);
  manifest.set("weight_floor", weight_floor);

  PointCloud predicted, truth;
  manifest.time_stage("read", [&] {
    predicted = leafwood::io::read_point_file(pred_path);
    truth = leafwood::io::read_point_file(truth_path);
  });
  if (predicted.size() != truth.size())
    throw leafwood::DataError("point count mismatch: predicted has " +
                              std::to_string(predicted.size()) + ", truth has " +
                              std::to_string(truth.size()));
  if (!truth.has_labels())
    throw leafwood::DataError("truth cloud carries no label column");

  std::vector<std::uint8_t> pred_labels;
  if (predicted.has_labels()) {
    pred_labels = predicted.labels;
  } else if (predicted.has_wood_probability()) {
    pred_labels.reserve(predicted.size());
    for (float p : predicted.wood_probability)
      pred_labels.push_back(p >= float(threshold));
  } else {
    throw leafwood::DataError("predicted cloud has neither labels nor p_wood");
  }

  leafwood::eval::EvaluationReport report;
  report.metrics = leafwood::eval::classification_metrics(pred_labels, truth.labels);

  // Path lengths per tree: requires a tree_id column (0 = not a tree) or a
  // single-tree cloud.
  std::vector<double> lengths(truth.size(), 0.0);
  std::vector<std::uint8_t> reachable(truth.size(), 0);
  manifest.time_stage("path_lengths", [&] {
    if (truth.has_tree_id()) {
      std::uint32_t max_id = 0;
      for (std::uint32_t id : truth.tree_id) max_id = std::max(max_id, id);
      for (std::uint32_t id = 1; id <= max_id; ++id) {
        std::vector<std::uint32_t> members;
        for (std::uint32_t i = 0; i < truth.size(); ++i)
          if (truth.tree_id[i] == id) members.push_back(i);
        if (members.size() < 2) continue;
        const PointCloud tree = truth.subset(members);
        const auto paths = leafwood::spatial::shortest_path_lengths(tree, graph_k);
        for (std::size_t m = 0; m < members.size(); ++m) {
          lengths[members[m]] = paths.length[m];
          reachable[members[m]] = paths.reachable[m];
        }
      }
    } else {
      const auto paths = leafwood::spatial::shortest_path_lengths(truth, graph_k);
      lengths.assign(paths.length.begin(), paths.length.end());
      reachable.assign(paths.reachable.begin(), paths.reachable.end());
    }
  });
  for (std::uint8_t r : reachable) report.unreachable_count += r == 0;

  try {
    report.bap = leafwood::eval::path_weighted_balanced_accuracy(
        pred_labels, truth.labels, lengths, reachable, weight_floor);
  } catch (const leafwood::DataError& e) {
    std::cerr << "warning: path-weighted BA unavailable: " << e.what() << "\n";
  }
  std::size_t reachable_count = 0;
  for (std::uint8_t r : reachable) reachable_count += r;
  if (reachable_count >= 10)
    report.deciles = leafwood::eval::path_decile_report(pred_labels, truth.labels,
                                                        lengths, reachable);

  fs::create_directories(out_dir);
  manifest.time_stage("write", [&] {
    std::ofstream csv(fs::path(out_dir) / "report.csv");
    csv << leafwood::eval::report_csv(report);
    std::ofstream table(fs::path(out_dir) / "report.txt");
    table << leafwood::eval::report_table(report);
    if (!report.deciles.empty()) {
      std::ofstream deciles(fs::path(out_dir) / "deciles.csv");
      deciles << leafwood::eval::decile_csv(report.deciles);
    }
  });
  manifest.write((fs::path(out_dir) / "run_manifest.json").string());
  std::cout << leafwood::eval::report_table(report);
  return 0;
}

int run_report(const std::string& deciles_path, const std::string& out_table,
               const std::string& out_svg, int argc, char** argv) {
  RunManifest manifest("report", argc, argv);
  manifest.set("inputs", {{"deciles", deciles_path}});
  manifest.set("outputs", {{"table", out_table}, {"svg", out_svg}});

  std::ifstream in(deciles_path);
  if (!in) throw leafwood::IoError("cannot open '" + deciles_path + "'");
  std::string line;
  std::getline(in, line);  // header
  struct Row {
    int bin;
    double lo, hi, accuracy;
    std::uint64_t count, wood;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Row r{};
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%llu,%llu,%lf", &r.bin, &r.lo, &r.hi,
                    (unsigned long long*)&r.count, (unsigned long long*)&r.wood,
                    &r.accuracy) != 6)
      throw leafwood::ParseError("'" + deciles_path + "': malformed row: " + line);
    rows.push_back(r);
  }
  if (rows.empty()) throw leafwood::DataError("no decile rows in '" + deciles_path + "'");

  {
    std::ofstream table(out_table);
    if (!table) throw leafwood::IoError("cannot write '" + out_table + "'");
    table << "decile  path-length range (m)   points   wood   accuracy\n";
    char buf[160];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%6d  %8.3f - %8.3f  %7llu  %5llu   %.4f\n",
                    r.bin, r.lo, r.hi, (unsigned long long)r.count,
                    (unsigned long long)r.wood, r.accuracy);
      table << buf;
    }
  }

  {
    // Static SVG line plot: accuracy against path-length decile.
    const int width = 640, height = 400, margin = 50;
    std::ofstream svg(out_svg);
    if (!svg) throw leafwood::IoError("cannot write '" + out_svg + "'");
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
        << "' height='" << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    auto x_of = [&](std::size_t i) {
      return margin + double(i) * (width - 2 * margin) / double(rows.size() - 1);
    };
    auto y_of = [&](double acc) {
      return height - margin - acc * (height - 2 * margin);
    };
    svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
        << width - margin << "' y2='" << height - margin
        << "' stroke='black'/>\n";
    svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin
        << "' y2='" << height - margin << "' stroke='black'/>\n";
    for (int tick = 0; tick <= 10; tick += 2) {
      const double y = y_of(tick / 10.0);
      svg << "<text x='8' y='" << y + 4 << "' font-size='12'>" << tick / 10.0
          << "</text>\n";
      svg << "<line x1='" << margin - 4 << "' y1='" << y << "' x2='" << margin
          << "' y2='" << y << "' stroke='black'/>\n";
    }
    svg << "<polyline fill='none' stroke='#2a7f3f' stroke-width='2' points='";
    for (std::size_t i = 0; i < rows.size(); ++i)
      svg << x_of(i) << ',' << y_of(rows[i].accuracy) << ' ';
    svg << "'/>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      svg << "<circle cx='" << x_of(i) << "' cy='" << y_of(rows[i].accuracy)
          << "' r='3' fill='#2a7f3f'/>\n";
      svg << "<text x='" << x_of(i) - 4 << "' y='" << height - margin + 18
          << "' font-size='12'>" << rows[i].bin << "</text>\n";
    }
    svg << "<text x='" << width / 2 - 90 << "' y='" << height - 10
        << "' font-size='13'>path-length decile (base to tips)</text>\n";
    svg << "<text x='14' y='" << margin - 14
        << "' font-size='13'>accuracy</text>\n";
    svg << "</svg>\n";
  }
  manifest.write(out_table + ".manifest.json");
  std::cout << "report table -> " << out_table << ", plot -> " << out_svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"leafwood: leaf/wood semantic segmentation for TLS point clouds"};
  app.set_version_flag("--version", leafwood::kVersion);
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "Generate a labeled synthetic plot");
  std::string gen_config, gen_out = "plot.ply", gen_format = "auto";
  std::uint64_t gen_seed = 0;
  generate->add_option("--config", gen_config, "PlotSpec JSON file");
  generate->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  generate->add_option("--out", gen_out, "Output cloud path")
      ->required()
      ->capture_default_str();
  generate->add_option("--format", gen_format, "ply|csv (default: by extension)")
      ->capture_default_str();

  // preprocess
  auto* preprocess =
      app.add_subcommand("preprocess", "Filter, normalise and tile a cloud");
  std::string pre_in, pre_out, pre_config;
  std::uint64_t pre_seed = 0;
  bool pre_no_ground = false;
  unsigned pre_threads = 1;
  preprocess->add_option("--in", pre_in, "Input cloud")->required();
  preprocess->add_option("--out", pre_out, "Output sample-store directory")->required();
  preprocess->add_option("--config", pre_config, "PreprocessConfig JSON file");
  preprocess->add_option("--seed", pre_seed, "Downsampling seed")->capture_default_str();
  preprocess->add_flag("--no-ground-removal", pre_no_ground,
                       "Skip the cloth-filter ground removal");
  preprocess->add_option("--threads", pre_threads, "Worker threads")
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train on preprocessed sample stores");
  std::string train_dir, val_dir, train_out = "model.lwnw", train_net_config,
              train_checkpoints;
  bool train_reduced = false, train_no_cw = false, train_no_augment = false;
  int train_epochs = 300, train_batch = 10;
  double train_lr = 1e-3, train_gamma = 2.0, train_smoothing = 0.1;
  std::uint64_t train_seed = 0;
  train->add_option("--train-samples", train_dir, "Training sample store")->required();
  train->add_option("--val-samples", val_dir, "Validation sample store")->required();
  train->add_option("--out", train_out, "Output weights file")->capture_default_str();
  train->add_option("--net-config", train_net_config, "NetworkConfig JSON file");
  train->add_flag("--reduced", train_reduced, "Use the reduced two-stage profile");
  train->add_option("--epochs", train_epochs, "Training epochs")->capture_default_str();
  train->add_option("--batch-size", train_batch, "Samples per optimizer step")
      ->capture_default_str();
  train->add_option("--max-lr", train_lr, "One-cycle peak learning rate")
      ->capture_default_str();
  train->add_option("--gamma", train_gamma, "Focal loss gamma")->capture_default_str();
  train->add_option("--label-smoothing", train_smoothing, "Label smoothing alpha")
      ->capture_default_str();
  train->add_flag("--no-class-weights", train_no_cw,
                  "Disable in-sample inverse class-frequency weights");
  train->add_flag("--no-augment", train_no_augment, "Disable data augmentation");
  train->add_option("--seed", train_seed, "Training seed")->capture_default_str();
  train->add_option("--checkpoint-dir", train_checkpoints,
                    "Checkpoint directory (default: <out>.checkpoints)");

  // predict
  auto* predict = app.add_subcommand("predict", "Segment a cloud with trained weights");
  std::string predict_in, predict_weights, predict_out = "labeled.ply",
              predict_net_config, predict_pre_config, predict_excluded;
  bool predict_reduced = false, predict_no_ground = false;
  double predict_threshold = 0.5;
  std::size_t predict_k = 32;
  std::uint64_t predict_seed = 0;
  unsigned predict_threads = 1;
  predict->add_option("--in", predict_in, "Input cloud")->required();
  predict->add_option("--weights", predict_weights, "Trained weights file")->required();
  predict->add_option("--out", predict_out, "Output labeled cloud")
      ->capture_default_str();
  predict->add_option("--net-config", predict_net_config, "NetworkConfig JSON file");
  predict->add_flag("--reduced", predict_reduced, "Use the reduced two-stage profile");
  predict->add_option("--pre-config", predict_pre_config, "PreprocessConfig JSON file");
  predict->add_option("--excluded-out", predict_excluded,
                      "Sidecar for filtered/ground points");
  predict->add_option("--threshold", predict_threshold, "Wood probability threshold")
      ->capture_default_str();
  predict->add_option("--k", predict_k, "Consolidation neighbourhood size")
      ->capture_default_str();
  predict->add_option("--seed", predict_seed, "Tiling seed")->capture_default_str();
  predict->add_flag("--no-ground-removal", predict_no_ground,
                    "Skip the cloth-filter ground removal");
  predict->add_option("--threads", predict_threads, "Worker threads")
      ->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Compare predictions against truth");
  std::string eval_pred, eval_truth, eval_out = "evaluation";
  std::size_t eval_graph_k = 8;
  double eval_weight_floor = 0.0, eval_threshold = 0.5;
  evaluate->add_option("--pred", eval_pred, "Predicted cloud")->required();
  evaluate->add_option("--truth", eval_truth, "Ground-truth cloud")->required();
  evaluate->add_option("--out-dir", eval_out, "Report directory")
      ->capture_default_str();
  evaluate->add_option("--graph-k", eval_graph_k,
                       "kNN connectivity for path lengths")
      ->capture_default_str();
  evaluate->add_option("--weight-floor", eval_weight_floor,
                       "Additive path-length weight floor")
      ->capture_default_str();
  evaluate->add_option("--threshold", eval_threshold,
                       "Threshold when predictions carry only p_wood")
      ->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Render decile CSV as table and SVG");
  std::string report_in, report_table = "deciles.txt", report_svg = "deciles.svg";
  report->add_option("--deciles", report_in, "deciles.csv from evaluate")->required();
  report->add_option("--out-table", report_table, "Output text table")
      ->capture_default_str();
  report->add_option("--out-svg", report_svg, "Output SVG line plot")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (app.got_subcommand(generate))
      return run_generate(gen_config, gen_seed, gen_out, gen_format, argc, argv);
    if (app.got_subcommand(preprocess))
      return run_preprocess(pre_in, pre_out, pre_config, pre_seed, pre_no_ground,
                            pre_threads, argc, argv);
    if (app.got_subcommand(train))
      return run_train(train_dir, val_dir, train_out, train_net_config,
                       train_reduced, train_epochs, train_batch, train_lr,
                       train_seed, train_checkpoints, train_gamma, train_smoothing,
                       train_no_cw, train_no_augment, argc, argv);
    if (app.got_subcommand(predict))
      return run_predict(predict_in, predict_weights, predict_out,
                         predict_net_config, predict_reduced, predict_pre_config,
                         predict_excluded, predict_threshold, predict_k,
                         predict_seed, predict_no_ground, predict_threads, argc,
                         argv);
    if (app.got_subcommand(evaluate))
      return run_evaluate(eval_pred, eval_truth, eval_out, eval_graph_k,
                          eval_weight_floor, eval_threshold, argc, argv);
    if (app.got_subcommand(report))
      return run_report(report_in, report_table, report_svg, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

// SPDX-License-Identifier: Apache-2.0
//
// nuigo — synthesize non-uniformly illuminated retinal image pairs, train the
// recursive enhancement network, run inference, and score results.
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nuigo/checkpoint.hpp"
#include "nuigo/common.hpp"
#include "nuigo/config.hpp"
#include "nuigo/dataset.hpp"
#include "nuigo/image_io.hpp"
#include "nuigo/metrics.hpp"
#include "nuigo/network.hpp"
#include "nuigo/synthesis.hpp"
#include "nuigo/trainer.hpp"

namespace {

using nuigo::ConfigMap;

// Options layer as: built-in defaults < config file < explicit flags.
ConfigMap file_config(const std::string& path) {
  if (path.empty()) return {};
  return nuigo::load_config_file(path);
}

struct SynthesizeArgs {
  std::string input, output, config;
  std::vector<double> thresholds;
  std::uint64_t seed = 0;
  int image_size = 0;
  double gamma_min = -1, gamma_max = -1;
  bool inverse_gamma = false, save_masks = false;
};

int cmd_synthesize(const SynthesizeArgs& a, const CLI::App* cmd) {
  nuigo::SynthesisConfig cfg;
  nuigo::apply_config(cfg, file_config(a.config));
  if (cmd->count("--thresholds")) cfg.thresholds = a.thresholds;
  if (cmd->count("--seed")) cfg.rng_seed = a.seed;
  if (cmd->count("--image-size")) cfg.image_size = a.image_size;
  if (cmd->count("--gamma-min")) cfg.gamma_min = a.gamma_min;
  if (cmd->count("--gamma-max")) cfg.gamma_max = a.gamma_max;
  if (cmd->count("--inverse-gamma")) cfg.inverse_gamma = a.inverse_gamma;
  if (cmd->count("--save-masks")) cfg.save_masks = a.save_masks;
  cfg.validate();

  const auto manifest = nuigo::synthesize_dataset(a.input, a.output, cfg);
  nuigo::save_config_file(std::filesystem::path(a.output) / "synthesis_config.txt",
                          nuigo::to_config(cfg));

  std::map<double, int> per_threshold;
  for (const auto& e : manifest.entries) ++per_threshold[e.threshold];
  std::cout << manifest.entries.size() << " pairs written\n";
  for (const auto& [t, n] : per_threshold)
    std::cout << "  threshold " << t << ": " << n << " pairs\n";
  return 0;
}

struct TrainArgs {
  std::string manifest, output, config, extractor, extractor_weights, extractor_layer;
  std::uint64_t seed = 0, max_steps = 0, checkpoint_every = 0;
  int batch_size = 0, epochs = 0, image_size = 0, patience = 0, val_eval_cap = 0;
  int stages = 0, channels = 0, inner_channels = 0;
  double lr = 0, lambda_l1 = 0, train_fraction = 0, init_std = 0;
  bool no_weight_sharing = false, resume = false;
};

int cmd_train(const TrainArgs& a, const CLI::App* cmd) {
  nuigo::TrainConfig cfg;
  nuigo::apply_config(cfg, file_config(a.config));
  if (cmd->count("--extractor-weights")) cfg.extractor_weights = a.extractor_weights;
  if (cmd->count("--extractor")) cfg.extractor = a.extractor;
  if (cmd->count("--extractor-layer")) cfg.extractor_layer = a.extractor_layer;
  if (cmd->count("--seed")) cfg.seed = a.seed;
  if (cmd->count("--max-steps")) cfg.max_steps = a.max_steps;
  if (cmd->count("--checkpoint-every")) cfg.checkpoint_every = a.checkpoint_every;
  if (cmd->count("--batch-size")) cfg.batch_size = a.batch_size;
  if (cmd->count("--epochs")) cfg.epochs = a.epochs;
  if (cmd->count("--image-size")) cfg.image_size = a.image_size;
  if (cmd->count("--patience")) cfg.patience = a.patience;
  if (cmd->count("--val-eval-cap")) cfg.val_eval_cap = a.val_eval_cap;
  if (cmd->count("--stages")) cfg.model.stages = a.stages;
  if (cmd->count("--channels")) cfg.model.channels = a.channels;
  if (cmd->count("--inner-channels")) cfg.model.inner_channels = a.inner_channels;
  if (cmd->count("--lr")) cfg.learning_rate = a.lr;
  if (cmd->count("--lambda-l1")) cfg.lambda_l1 = a.lambda_l1;
  if (cmd->count("--train-fraction")) cfg.train_fraction = a.train_fraction;
  if (cmd->count("--init-std")) cfg.init_std = a.init_std;
  if (cmd->count("--no-weight-sharing")) cfg.model.weight_sharing = !a.no_weight_sharing;
  cfg.validate();

  const auto ds = nuigo::load_dataset(a.manifest);
  const bool has_ckpt =
      std::filesystem::exists(std::filesystem::path(a.output) / "last.ckpt");
  if (a.resume) {
    nuigo::require(has_ckpt, "no checkpoint to resume from in " + a.output);
  } else {
    nuigo::require(!has_ckpt, a.output +
                                  " already contains a training run; pass --resume "
                                  "to continue it or choose a fresh output directory");
  }
  std::filesystem::create_directories(a.output);
  nuigo::save_config_file(std::filesystem::path(a.output) / "train_config.txt",
                          nuigo::to_config(cfg));
  const auto result = nuigo::train(cfg, ds, a.output);
  std::cout << "trained " << result.steps << " steps ("
            << result.epochs_completed << " epochs"
            << (result.early_stopped ? ", early stop" : "") << ")\n";
  if (result.best_val_psnr >= 0)
    std::cout << "best validation PSNR: " << result.best_val_psnr << " dB\n";
  std::cout << "checkpoints: " << result.last_checkpoint.string() << ", "
            << result.best_checkpoint.string() << "\n";
  return 0;
}

struct EnhanceArgs {
  std::string checkpoint, input, output;
  bool all_stages = false;
};

int cmd_enhance(const EnhanceArgs& a) {
  const auto params = nuigo::load_checkpoint(a.checkpoint);
  const auto files = nuigo::list_image_files(a.input);
  nuigo::require(!files.empty(), "no images found in " + a.input);
  std::filesystem::create_directories(a.output);
  for (const auto& f : files) {
    const nuigo::Image img = nuigo::load_image(f);
    const std::string stem = f.stem().string();
    if (a.all_stages) {
      const auto stages = nuigo::enhance_stages(params, img);
      for (std::size_t t = 0; t < stages.size(); ++t)
        nuigo::save_image_png(std::filesystem::path(a.output) /
                                  (stem + "_stage" + std::to_string(t + 1) + ".png"),
                              stages[t]);
    } else {
      nuigo::save_image_png(std::filesystem::path(a.output) / (stem + ".png"),
                            nuigo::enhance(params, img));
    }
  }
  std::cout << "enhanced " << files.size() << " images into " << a.output << "\n";
  return 0;
}

struct EvaluateArgs {
  std::string pred, ref, report;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto report = nuigo::evaluate_pairs(a.pred, a.ref);
  if (!a.report.empty()) nuigo::write_metric_report(report, a.report);
  char line[128];
  std::snprintf(line, sizeof line, "pairs: %d\nmean PSNR: %.4f dB\nmean SSIM: %.4f\n",
                report.count, report.mean_psnr, report.mean_ssim);
  std::cout << line;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retinal image enhancement for non-uniform illumination"};
  app.require_subcommand(1);

  SynthesizeArgs sy;
  auto* syn = app.add_subcommand(
      "synthesize", "Generate degraded/clean training pairs from clean images");
  syn->add_option("--input", sy.input, "Directory of clean retinal images")->required();
  syn->add_option("--output", sy.output, "Output dataset directory")->required();
  syn->add_option("--config", sy.config, "key=value config file");
  syn->add_option("--thresholds", sy.thresholds,
                  "Luminance thresholds, one degraded image each");
  syn->add_option("--seed", sy.seed, "Random seed");
  syn->add_option("--image-size", sy.image_size, "Square size clean images are resized to");
  syn->add_option("--gamma-min", sy.gamma_min, "Lower bound of the attenuation exponent");
  syn->add_option("--gamma-max", sy.gamma_max, "Upper bound of the attenuation exponent");
  syn->add_flag("--inverse-gamma", sy.inverse_gamma, "Use exponent 1/gamma for dark pixels");
  syn->add_flag("--save-masks", sy.save_masks, "Also write 16-bit illumination masks");

  TrainArgs tr;
  auto* trn = app.add_subcommand("train", "Train the enhancement network");
  trn->add_option("--manifest", tr.manifest, "Dataset manifest CSV")->required();
  trn->add_option("--output", tr.output, "Run directory (checkpoints, log)")->required();
  trn->add_option("--extractor-weights", tr.extractor_weights,
                  "Perceptual extractor weight file");
  trn->add_option("--extractor", tr.extractor, "Feature extractor: vgg19 or identity");
  trn->add_option("--extractor-layer", tr.extractor_layer,
                  "Feature layer (conv1_1 .. conv5_4)");
  trn->add_option("--config", tr.config, "key=value config file");
  trn->add_option("--seed", tr.seed, "Random seed");
  trn->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps");
  trn->add_option("--checkpoint-every", tr.checkpoint_every,
                  "Rolling checkpoint cadence in steps");
  trn->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  trn->add_option("--epochs", tr.epochs, "Maximum epochs");
  trn->add_option("--image-size", tr.image_size, "Training resolution");
  trn->add_option("--patience", tr.patience,
                  "Epochs without validation PSNR gain before stopping (0 = off)");
  trn->add_option("--val-eval-cap", tr.val_eval_cap,
                  "Max validation pairs scored per epoch (0 = all)");
  trn->add_option("--stages", tr.stages, "Refinement stages");
  trn->add_option("--channels", tr.channels, "Feature channels");
  trn->add_option("--inner-channels", tr.inner_channels, "Attention embedding channels");
  trn->add_option("--lr", tr.lr, "Learning rate (fixed)");
  trn->add_option("--lambda-l1", tr.lambda_l1, "Weight of the final-stage L1 term");
  trn->add_option("--train-fraction", tr.train_fraction, "Training share of clean images");
  trn->add_option("--init-std", tr.init_std, "Stddev of the Gaussian weight init");
  trn->add_flag("--no-weight-sharing", tr.no_weight_sharing,
                "Give each stage its own weights");
  trn->add_flag("--resume", tr.resume, "Continue from the run directory's last.ckpt");

  EnhanceArgs en;
  auto* enh = app.add_subcommand("enhance", "Enhance a directory of images");
  enh->add_option("--checkpoint", en.checkpoint, "Model checkpoint")->required();
  enh->add_option("--input", en.input, "Directory of images to enhance")->required();
  enh->add_option("--output", en.output, "Output directory")->required();
  enh->add_flag("--all-stages", en.all_stages, "Write every stage's output per image");

  EvaluateArgs ev;
  auto* evl = app.add_subcommand("evaluate", "Score predictions against references");
  evl->add_option("--pred", ev.pred, "Prediction directory")->required();
  evl->add_option("--ref", ev.ref, "Reference directory")->required();
  evl->add_option("--report", ev.report, "CSV report path");

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(syn)) return cmd_synthesize(sy, syn);
    if (app.got_subcommand(trn)) return cmd_train(tr, trn);
    if (app.got_subcommand(enh)) return cmd_enhance(en);
    return cmd_evaluate(ev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 1;
  } catch (const nuigo::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

// SPDX-License-Identifier: Apache-2.0
#include "nuigo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>

#include "nuigo/checkpoint.hpp"
#include "nuigo/common.hpp"
#include "nuigo/extractor.hpp"
#include "nuigo/image_io.hpp"
#include "nuigo/losses.hpp"
#include "nuigo/metrics.hpp"
#include "nuigo/rng.hpp"

namespace nuigo {

void TrainConfig::validate() const {
  require(batch_size >= 1, "train: batch_size must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate >= 0.0,
          "train: learning_rate must be finite and >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          "train: moment decay coefficients must lie in [0, 1)");
  require(adam_eps > 0.0, "train: adam_eps must be > 0");
  require(init_std > 0.0, "train: init_std must be > 0");
  require(epochs >= 1, "train: epochs must be >= 1");
  require(image_size >= 16 && image_size % 16 == 0,
          "train: image_size must be a positive multiple of 16");
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "train: train_fraction must be in (0, 1)");
  require(patience >= 0, "train: patience must be >= 0");
  require(val_eval_cap >= 0, "train: val_eval_cap must be >= 0");
  require(lambda_l1 >= 0.0, "train: lambda_l1 must be >= 0");
  require(extractor == "vgg19" || extractor == "identity",
          "train: extractor must be 'vgg19' or 'identity'");
  model.validate();
}

namespace {

// Flat view over every trainable tensor, aligned with the optimizer moments.
struct ParamView {
  std::string name;
  Tensor<float>* value;
  Tensor<float>* grad;
};

std::vector<ParamView> parameter_views(ModelParams<float>& params) {
  std::vector<ParamView> views;
  params.for_each([&](const std::string& name, ConvParam<float>& p) {
    views.push_back({name + ".w", &p.w, &p.gw});
    views.push_back({name + ".b", &p.b, &p.gb});
  });
  return views;
}

Image load_training_image(const std::filesystem::path& path, int size) {
  Image img = load_image(path);
  if (img.height != size || img.width != size) img = resize_bilinear(img, size, size);
  return img;
}

void copy_into_batch(Tensor<float>& batch, int slot, const Image& img) {
  std::copy(img.data.begin(), img.data.end(), batch.sample(slot));
}

double adam_bias_corrected_step(std::vector<ParamView>& views, OptimizerState& opt,
                                const TrainConfig& cfg) {
  const double t = static_cast<double>(opt.step) + 1.0;
  const double corr1 = 1.0 - std::pow(cfg.beta1, t);
  const double corr2 = 1.0 - std::pow(cfg.beta2, t);
  double grad_sq = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    auto& m = opt.blocks[i].m;
    auto& v = opt.blocks[i].v;
    Tensor<float>& w = *views[i].value;
    const Tensor<float>& g = *views[i].grad;
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g.v[j];
      grad_sq += gj * gj;
      m[j] = static_cast<float>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj);
      v[j] = static_cast<float>(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj);
      const double mhat = m[j] / corr1;
      const double vhat = v[j] / corr2;
      w.v[j] = static_cast<float>(w.v[j] -
                                  cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps));
    }
  }
  return grad_sq;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& ds,
                  const std::filesystem::path& out_dir) {
  cfg.validate();
  require(!ds.entries.empty(), "train: dataset is empty");
  std::filesystem::create_directories(out_dir);

  FeatureExtractor<float> extractor;
  if (cfg.extractor == "identity") {
    extractor = FeatureExtractor<float>::identity();
  } else {
    require(!cfg.extractor_weights.empty(),
            "train: no extractor weight file given. Convert pretrained weights with "
            "tools/export_vgg19_weights.py and pass --extractor-weights.");
    extractor = FeatureExtractor<float>::load(cfg.extractor_weights, cfg.extractor_layer);
  }

  const DatasetSplit split = split_dataset(ds, cfg.train_fraction, cfg.seed);
  require(!split.train.empty() && !split.val.empty(),
          "train: split produced an empty side");

  const std::filesystem::path last_path = out_dir / "last.ckpt";
  const std::filesystem::path best_path = out_dir / "best.ckpt";
  const std::filesystem::path log_path = out_dir / "train_log.csv";

  ModelParams<float> params;
  OptimizerState opt;
  const bool resumed = std::filesystem::exists(last_path);
  if (resumed) {
    params = load_checkpoint(last_path, &opt);
    require(params.cfg.stages == cfg.model.stages &&
                params.cfg.channels == cfg.model.channels &&
                params.cfg.inner_channels == cfg.model.inner_channels &&
                params.cfg.in_channels == cfg.model.in_channels &&
                params.cfg.weight_sharing == cfg.model.weight_sharing,
            "train: checkpoint architecture differs from the configured model");
    std::cerr << "resuming from " << last_path.string() << " at step " << opt.step
              << "\n";
  } else {
    params.cfg = cfg.model;
    Rng init_rng = derive_rng(cfg.seed, {fnv1a("init")});
    init_params(params, init_rng, static_cast<float>(cfg.init_std));
  }

  auto views = parameter_views(params);
  if (opt.blocks.empty()) {
    opt.blocks.resize(views.size());
    for (std::size_t i = 0; i < views.size(); ++i) {
      opt.blocks[i].name = views[i].name;
      opt.blocks[i].m.assign(views[i].value->size(), 0.f);
      opt.blocks[i].v.assign(views[i].value->size(), 0.f);
    }
  } else {
    require(opt.blocks.size() == views.size(),
            "train: optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < views.size(); ++i)
      require(opt.blocks[i].name == views[i].name &&
                  opt.blocks[i].m.size() == views[i].value->size(),
              "train: optimizer block '" + opt.blocks[i].name + "' mismatch");
  }

  // A resumed run appends to its log; a fresh run replaces whatever a previous
  // occupant of the directory left behind.
  const bool fresh_log = !resumed || !std::filesystem::exists(log_path);
  std::ofstream log(log_path, resumed ? std::ios::app : std::ios::trunc);
  require(log.good(), "train: cannot open log " + log_path.string());
  if (fresh_log) {
    log << "step,loss_total";
    for (int t = 0; t < cfg.model.stages; ++t) log << ",loss_per" << (t + 1);
    log << ",loss_l1,seconds\n";
    log.flush();
  }

  const LossWeights weights{cfg.lambda_l1};
  const auto n_train = split.train.size();
  const std::uint64_t steps_per_epoch =
      (n_train + cfg.batch_size - 1) / static_cast<std::uint64_t>(cfg.batch_size);
  // Caches of extractor features for clean references; keyed by clean id so
  // all degraded variants of one image share an entry.
  std::map<std::string, Tensor<float>> ref_feat_cache;

  TrainResult result;
  result.best_val_psnr = opt.best_val_psnr;
  result.last_checkpoint = last_path;
  result.best_checkpoint = best_path;
  const auto run_start = std::chrono::steady_clock::now();

  auto validation_psnr = [&]() {
    double sum = 0.0;
    std::size_t n = split.val.size();
    if (cfg.val_eval_cap > 0) n = std::min<std::size_t>(n, cfg.val_eval_cap);
    for (std::size_t i = 0; i < n; ++i) {
      const DatasetEntry& e = ds.entries[split.val[i]];
      const Image degraded = load_training_image(e.degraded_path, cfg.image_size);
      const Image clean = load_training_image(e.clean_path, cfg.image_size);
      sum += psnr(enhance(params, degraded), clean);
    }
    return sum / static_cast<double>(n);
  };

  bool stop = false;
  int epoch = static_cast<int>(opt.step / steps_per_epoch);
  for (; epoch < cfg.epochs && !stop; ++epoch) {
    std::vector<int> perm = split.train;
    Rng epoch_rng = derive_rng(cfg.seed, {fnv1a("epoch"), static_cast<std::uint64_t>(epoch)});
    epoch_rng.shuffle(perm);

    std::uint64_t batch_index = opt.step % steps_per_epoch;  // mid-epoch resume
    for (; batch_index < steps_per_epoch && !stop; ++batch_index) {
      const std::size_t begin = batch_index * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, n_train);
      const int bs = static_cast<int>(end - begin);

      Tensor<float> x(bs, 3, cfg.image_size, cfg.image_size);
      Tensor<float> ref(bs, 3, cfg.image_size, cfg.image_size);
      std::vector<const DatasetEntry*> batch_entries(bs);
      for (int i = 0; i < bs; ++i) {
        const DatasetEntry& e = ds.entries[perm[begin + i]];
        batch_entries[i] = &e;
        copy_into_batch(x, i, load_training_image(e.degraded_path, cfg.image_size));
        copy_into_batch(ref, i, load_training_image(e.clean_path, cfg.image_size));
      }

      std::vector<Tensor<float>> ref_feats;
      const std::vector<Tensor<float>>* ref_feats_ptr = nullptr;
      if (cfg.cache_reference_features && !extractor.is_identity()) {
        ref_feats.reserve(bs);
        for (int i = 0; i < bs; ++i) {
          const std::string& key = batch_entries[i]->meta.clean_id;
          auto it = ref_feat_cache.find(key);
          if (it == ref_feat_cache.end()) {
            Tensor<float> one(1, 3, cfg.image_size, cfg.image_size);
            std::copy_n(ref.sample(i), one.size(), one.data());
            it = ref_feat_cache.emplace(key, extractor.forward(one)).first;
          }
          ref_feats.push_back(it->second);
        }
        ref_feats_ptr = &ref_feats;
      }

      auto batch_ids = [&]() {
        std::string ids;
        for (int i = 0; i < bs; ++i) {
          if (i) ids += ", ";
          ids += batch_entries[i]->meta.degraded_id;
        }
        return ids;
      };

      std::vector<StageCache<float>> caches;
      LossReport report;
      std::vector<Tensor<float>> g_stage;
      try {
        forward(params, x, caches);
        std::vector<const Tensor<float>*> outs;
        for (auto& c : caches) outs.push_back(&c.out);
        report = total_loss(extractor, outs, ref, weights, &g_stage, ref_feats_ptr);
      } catch (const std::exception& e) {
        throw std::runtime_error("training failed at step " +
                                 std::to_string(opt.step + 1) + " (batch: " +
                                 batch_ids() + "): " + e.what());
      }
      bool finite = std::isfinite(report.total) && std::isfinite(report.l1);
      for (double p : report.perceptual) finite = finite && std::isfinite(p);
      if (!finite)
        throw std::runtime_error("non-finite loss at step " +
                                 std::to_string(opt.step + 1) + " (batch: " +
                                 batch_ids() + ")");

      params.zero_grad();
      backward(params, caches, g_stage);
      adam_bias_corrected_step(views, opt, cfg);
      ++opt.step;

      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start)
              .count();
      char row[256];
      std::string per_cols;
      for (double p : report.perceptual) {
        std::snprintf(row, sizeof row, ",%.9g", p);
        per_cols += row;
      }
      std::snprintf(row, sizeof row, "%llu,%.9g%s,%.9g,%.3f\n",
                    static_cast<unsigned long long>(opt.step), report.total,
                    per_cols.c_str(), report.l1, seconds);
      log << row;
      log.flush();

      if (cfg.checkpoint_every > 0 && opt.step % cfg.checkpoint_every == 0)
        save_checkpoint(last_path, params, &opt);
      if (cfg.max_steps > 0 && opt.step >= cfg.max_steps) stop = true;
    }

    if (!stop || opt.step % steps_per_epoch == 0) {
      // Full epoch boundary: score validation and refresh checkpoints.
      const double val = validation_psnr();
      std::cerr << "epoch " << (epoch + 1) << ": validation PSNR " << val << " dB\n";
      if (val > opt.best_val_psnr) {
        opt.best_val_psnr = val;
        opt.epochs_since_best = 0;
        save_checkpoint(best_path, params, nullptr);
      } else {
        ++opt.epochs_since_best;
        if (cfg.patience > 0 && opt.epochs_since_best >= cfg.patience) {
          result.early_stopped = true;
          stop = true;
        }
      }
      result.epochs_completed = epoch + 1;
    }
    save_checkpoint(last_path, params, &opt);
  }

  save_checkpoint(last_path, params, &opt);
  result.steps = opt.step;
  result.best_val_psnr = opt.best_val_psnr;
  if (!std::filesystem::exists(best_path)) save_checkpoint(best_path, params, nullptr);
  return result;
}

}  // namespace nuigo

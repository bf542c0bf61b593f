#include "allspark/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "allspark/metrics.hpp"
#include "allspark/ops.hpp"
#include "allspark/stt1.hpp"

namespace allspark {

using nlohmann::json;

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ContractError(std::string("bad run config json: ") + e.what());
  }
  RunConfig rc;
  rc.modality = modality_from_name(j.at("modality"));
  if (j.contains("task")) {
    rc.task = task_from_name(j.at("task"));
    rc.task_set = true;
  } else {
    rc.task = default_task(rc.modality);
  }
  rc.preset = j.value("preset", std::string("desk"));
  rc.seed = j.value("seed", 7ull);
  rc.data_dir = j.value("data_dir", std::string());
  rc.out_dir = j.value("out_dir", std::string());
  rc.prompts_path = j.value("prompts", std::string());
  rc.batch_size = j.value("batch_size", 4ull);
  rc.clip_norm = j.value("clip_norm", 1.0);
  rc.checkpoint_every = j.value("checkpoint_every", 0ull);
  if (j.contains("schedule") && j.at("schedule").is_object()) {
    const auto& s = j.at("schedule");
    rc.schedule_source = "custom";
    rc.schedule.max_lr = s.at("max_lr");
    rc.schedule.max_epochs = s.at("max_epochs");
    rc.schedule.warmup_epochs = s.at("warmup_epochs");
    rc.schedule.steps_per_epoch = s.at("steps_per_epoch");
  } else {
    rc.schedule_source = j.value("schedule", std::string("desk"));
    if (rc.schedule_source == "paper") {
      rc.schedule = table2_schedule(rc.modality, 10);
    } else if (rc.schedule_source == "desk") {
      rc.schedule = ScheduleSpec{1e-3, 30, 3, 10};
    } else {
      throw ContractError("schedule must be desk, paper, or an object");
    }
  }
  if (j.contains("optim")) {
    const auto& o = j.at("optim");
    rc.optim.beta1 = o.value("beta1", rc.optim.beta1);
    rc.optim.beta2 = o.value("beta2", rc.optim.beta2);
    rc.optim.eps = o.value("eps", rc.optim.eps);
    rc.optim.weight_decay = o.value("weight_decay", rc.optim.weight_decay);
  }
  if (j.contains("freeze_overrides")) {
    for (auto& [prefix, frozen] : j.at("freeze_overrides").items()) {
      rc.freeze_overrides.emplace_back(prefix, frozen.get<bool>());
    }
  }
  return rc;
}

std::string run_config_to_json(const RunConfig& rc) {
  json j;
  j["modality"] = modality_name(rc.modality);
  j["task"] = task_name(rc.task);
  j["preset"] = rc.preset;
  j["seed"] = rc.seed;
  j["data_dir"] = rc.data_dir;
  j["out_dir"] = rc.out_dir;
  j["prompts"] = rc.prompts_path;
  j["schedule"] = {{"max_lr", rc.schedule.max_lr},
                   {"max_epochs", rc.schedule.max_epochs},
                   {"warmup_epochs", rc.schedule.warmup_epochs},
                   {"steps_per_epoch", rc.schedule.steps_per_epoch}};
  j["schedule_source"] = rc.schedule_source;
  j["batch_size"] = rc.batch_size;
  j["clip_norm"] = rc.clip_norm;
  j["checkpoint_every"] = rc.checkpoint_every;
  j["optim"] = {{"beta1", rc.optim.beta1},
                {"beta2", rc.optim.beta2},
                {"eps", rc.optim.eps},
                {"weight_decay", rc.optim.weight_decay}};
  json fo = json::object();
  for (const auto& [prefix, frozen] : rc.freeze_overrides) fo[prefix] = frozen;
  j["freeze_overrides"] = fo;
  return j.dump();
}

PipelineConfig pipeline_config_for(const RunConfig& rc, const LoadedDataset& data) {
  if (data.spec.modality != rc.modality) {
    throw ContractError(std::string("dataset is ") + modality_name(data.spec.modality) + ", run wants " +
                        modality_name(rc.modality));
  }
  const TaskKind task = rc.task_set ? rc.task : data.spec.task;
  if (task != data.spec.task) {
    throw ContractError(std::string("dataset task ") + task_name(data.spec.task) + " does not match run task " +
                        task_name(task));
  }
  PipelineConfig cfg = make_pipeline_config(rc.modality, task, rc.preset, rc.seed);
  // dataset-driven wiring
  cfg.enc.msi.channels = data.spec.modality == Modality::Msi ? data.spec.channels : cfg.enc.msi.channels;
  cfg.enc.hsi.bands = data.spec.modality == Modality::Hsi ? data.spec.hsi_bands : cfg.enc.hsi.bands;
  if (data.spec.modality == Modality::Graph) cfg.enc.graph.node_dim = data.spec.node_dim;
  if (data.spec.modality == Modality::Table) {
    if (data.table_columns.empty()) throw ContractError("table dataset carries no column specs");
    cfg.enc.table.columns = data.table_columns;
  }
  switch (task) {
    case TaskKind::Classify:
      cfg.head.num_classes = data.spec.classes;
      break;
    case TaskKind::Regress: {
      double mean = 0.0;
      for (const auto& l : data.labels) mean += l.value;
      mean /= static_cast<double>(data.labels.size());
      double var = 0.0;
      for (const auto& l : data.labels) var += (l.value - mean) * (l.value - mean);
      var /= static_cast<double>(data.labels.size());
      cfg.head.target_mean = mean;
      cfg.head.target_std = std::max(std::sqrt(var), 1e-6);
      break;
    }
    case TaskKind::TrajectoryPredict:
      cfg.head.out_h = data.spec.t_pred;
      cfg.head.out_w = 2;
      break;
    case TaskKind::Depth:
      cfg.head.out_h = data.spec.out_h;
      cfg.head.out_w = data.spec.out_w;
      break;
    case TaskKind::TextGenerate:
      break;
  }
  return cfg;
}

namespace {

std::string curve_to_csv(const std::vector<std::array<double, 3>>& curve) {
  std::string csv = "step,lr,loss\n";
  char buf[96];
  for (const auto& row : curve) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", static_cast<std::size_t>(row[0]), row[1], row[2]);
    csv += buf;
  }
  return csv;
}

}  // namespace

TrainResult train_run(const RunConfig& rc) {
  if (rc.batch_size == 0) throw ContractError("train: batch_size must be positive");
  validate_schedule(rc.schedule);
  auto data = load_dataset(rc.data_dir);
  if (data.samples.empty()) throw ContractError("train: empty dataset");
  auto cfg = pipeline_config_for(rc, data);
  auto registry = PromptRegistry::load(rc.prompts_path);
  auto pipeline = Pipeline::build(cfg, std::move(registry));
  for (const auto& [prefix, frozen] : rc.freeze_overrides) {
    pipeline.store().set_frozen_prefix(prefix, frozen);
  }
  auto trainable = pipeline.store().trainable();
  if (trainable.empty()) throw ContractError("train: nothing to optimize (everything frozen)");

  Rng root(rc.seed);
  Rng prompt_rng = root.fork(101);
  Rng batch_rng = root.fork(202);

  AdamW opt(rc.optim);
  TrainResult result;
  const std::size_t total = rc.schedule.total_steps();
  std::filesystem::create_directories(rc.out_dir);
  const std::string extra = "{\"pipeline\":" + pipeline_config_to_json(cfg) + ",\"run\":" + run_config_to_json(rc) + "}";

  // samples are visited in per-epoch shuffled order
  std::vector<std::size_t> order(data.samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  auto next_index = [&] {
    if (cursor == order.size()) {
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[batch_rng.below(i + 1)]);
      }
      cursor = 0;
    }
    return order[cursor++];
  };

  for (std::size_t step = 0; step < total; ++step) {
    pipeline.store().zero_grads();
    Tape::current().clear();
    double step_loss = 0.0;
    for (std::size_t b = 0; b < rc.batch_size; ++b) {
      const std::size_t idx = next_index();
      auto loss = pipeline.loss(data.samples[idx], data.labels[idx], PromptMode::Train, prompt_rng);
      if (!loss->all_finite()) {
        throw NumericError("train: non-finite loss at step " + std::to_string(step) + " on modality " +
                           modality_name(rc.modality));
      }
      step_loss += loss->data[0] / static_cast<double>(rc.batch_size);
      backward(scale(loss, 1.0 / static_cast<double>(rc.batch_size)));
    }
    if (rc.clip_norm > 0.0) clip_global_norm(trainable, rc.clip_norm);
    const double lr = lr_at(rc.schedule, step);
    opt.step(trainable, lr);
    result.curve.push_back({static_cast<double>(step), lr, step_loss});
    if (rc.checkpoint_every > 0 && (step + 1) % rc.checkpoint_every == 0 && step + 1 < total) {
      pipeline.store().save(rc.out_dir + "/checkpoint_step" + std::to_string(step + 1), extra);
    }
  }
  result.initial_loss = result.curve.front()[2];
  result.final_loss = result.curve.back()[2];
  result.checkpoint_dir = rc.out_dir + "/checkpoint";
  result.curve_path = rc.out_dir + "/loss_curve.csv";
  pipeline.store().save(result.checkpoint_dir, extra);
  write_file_atomic(result.curve_path, curve_to_csv(result.curve));
  return result;
}

std::string eval_run(const std::string& checkpoint_dir, const std::string& data_dir, const std::string& out_dir,
                     const std::string& prompts_path) {
  auto store = ParamStore::load(checkpoint_dir);
  json extra;
  try {
    extra = json::parse(ParamStore::load_manifest_extra(checkpoint_dir));
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint manifest extra is not valid json: ") + e.what());
  }
  auto cfg = pipeline_config_from_json(extra.at("pipeline").dump());
  auto data = load_dataset(data_dir);
  if (data.spec.modality != cfg.modality || data.spec.task != cfg.task) {
    throw ContractError("eval: dataset modality/task does not match the checkpoint");
  }
  auto pipeline = Pipeline::restore(cfg, PromptRegistry::load(prompts_path), std::move(store));

  NoGradGuard off;
  json metrics = json::object();
  const std::size_t n = data.samples.size();
  if (n == 0) throw ContractError("eval: empty dataset");

  switch (cfg.task) {
    case TaskKind::Classify: {
      std::vector<std::size_t> preds, labels;
      for (std::size_t i = 0; i < n; ++i) {
        auto logits = pipeline.predict(data.samples[i]);
        preds.push_back(argmax_row(*logits));
        labels.push_back(data.labels[i].class_id);
      }
      auto m = metric_classification(preds, labels, cfg.head.num_classes);
      metrics["top1"] = m.top1;
      metrics["oa"] = m.oa;
      metrics["aa"] = m.aa;
      metrics["kappa"] = m.kappa;
      break;
    }
    case TaskKind::Regress: {
      std::vector<double> preds, targets;
      for (std::size_t i = 0; i < n; ++i) {
        preds.push_back(pipeline.predict(data.samples[i])->data[0]);
        targets.push_back(data.labels[i].value);
      }
      auto m = metric_regression(preds, targets);
      metrics["rmse"] = m.rmse;
      metrics["mae"] = m.mae;
      metrics["r2"] = m.r2;
      break;
    }
    case TaskKind::TrajectoryPredict: {
      double ade = 0.0, fde = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        auto pred = pipeline.predict(data.samples[i]);
        auto m = metric_ade_fde(*pred, *with_dtype(*data.labels[i].grid, pred->dtype));
        ade += m.ade;
        fde += m.fde;
      }
      metrics["ade"] = ade / static_cast<double>(n);
      metrics["fde"] = fde / static_cast<double>(n);
      break;
    }
    case TaskKind::Depth: {
      std::vector<double> errors;
      double se = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        auto pred = pipeline.predict(data.samples[i]);
        const auto& gt = data.labels[i].grid;
        if (pred->dims != gt->dims) throw ShapeError("eval: depth grid shape mismatch");
        for (std::size_t c = 0; c < pred->numel(); ++c) {
          const double e = pred->data[c] - gt->data[c];
          errors.push_back(e);
          se += e * e;
        }
      }
      metrics["pag_6"] = metric_pag(errors, 6);
      metrics["pag_10"] = metric_pag(errors, 10);
      metrics["rmse"] = std::sqrt(se / static_cast<double>(errors.size()));
      break;
    }
    case TaskKind::TextGenerate: {
      // exact-match rate of greedy decodes, and mean reciprocal rank of the
      // true target when all eval targets are ranked by teacher-forced loss
      std::size_t exact = 0;
      std::vector<std::size_t> ranks;
      Rng rng(0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::string decoded = pipeline.generate(data.samples[i], data.labels[i].text.size() + 8);
        if (decoded == data.labels[i].text) ++exact;
        std::vector<double> losses(n);
        for (std::size_t j = 0; j < n; ++j) {
          losses[j] = pipeline.loss(data.samples[i], data.labels[j], PromptMode::Eval, rng)->data[0];
        }
        std::size_t rank = 1;
        for (std::size_t j = 0; j < n; ++j) {
          if (losses[j] < losses[i] || (losses[j] == losses[i] && j < i)) ++rank;
        }
        ranks.push_back(rank);
      }
      metrics["mrr"] = metric_mrr(ranks);
      metrics["exact_match"] = static_cast<double>(exact) / static_cast<double>(n);
      break;
    }
  }

  json report;
  report["modality"] = modality_name(cfg.modality);
  report["task"] = task_name(cfg.task);
  report["samples"] = n;
  report["metrics"] = metrics;
  const std::string report_json = report.dump(2) + "\n";

  std::string csv = "metric,value\n";
  char buf[96];
  for (auto& [k, v] : metrics.items()) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g\n", k.c_str(), v.get<double>());
    csv += buf;
  }
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir + "/metrics.json", report_json);
  write_file_atomic(out_dir + "/metrics.csv", csv);
  return report_json;
}

}  // namespace allspark

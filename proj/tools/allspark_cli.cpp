// Command-line front end. Talks to the core exclusively through the C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "allspark.h"

using nlohmann::json;

namespace {

#ifndef ALLSPARK_DEFAULT_PROMPTS
#define ALLSPARK_DEFAULT_PROMPTS "resources/prompts.txt"
#endif

struct Session {
  allspark_session* ptr = nullptr;
  Session() { allspark_session_new(&ptr); }
  ~Session() { allspark_session_free(ptr); }
};

/// Relative output paths are resolved against $ALLSPARK_OUT_ROOT when set.
std::string resolve_out(const std::string& path) {
  const char* root = std::getenv("ALLSPARK_OUT_ROOT");
  if (!root || !*root || path.empty() || path.front() == '/') return path;
  return std::string(root) + "/" + path;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) {
    std::fprintf(stderr, "error: cannot open %s\n", path.c_str());
    std::exit(2);
  }
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int finish(Session& s, allspark_status status, char* result, bool print_result) {
  if (status != ALLSPARK_OK) {
    std::fprintf(stderr, "error: %s\n", allspark_last_error(s.ptr));
    return static_cast<int>(status);
  }
  if (result) {
    if (print_result) std::fputs(result, stdout);
    allspark_string_free(result);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AllSpark desk-scale multimodal pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string prompts = ALLSPARK_DEFAULT_PROMPTS;
  std::uint64_t seed = 7;
  std::string preset = "desk";
  app.add_option("--config", config_path, "JSON config file (overrides per-command flags)")->capture_default_str();
  app.add_option("--prompts", prompts, "prompt registry file")->capture_default_str();
  app.add_option("--seed", seed, "rng seed")->capture_default_str();
  app.add_option("--preset", preset, "desk|paper")->check(CLI::IsMember({"desk", "paper"}))->capture_default_str();

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic dataset");
  gen->fallthrough();
  std::string gen_modality, gen_task, gen_out;
  std::size_t gen_count = 8, gen_classes = 0;
  double gen_noise = -1.0;
  gen->add_option("--modality", gen_modality, "target modality")->required();
  gen->add_option("--task", gen_task, "classify|regress|trajectory-predict|text-generate|depth");
  gen->add_option("--count", gen_count, "sample count")->capture_default_str();
  gen->add_option("--classes", gen_classes, "class count (classify tasks)");
  gen->add_option("--noise", gen_noise, "payload noise level");
  gen->add_option("--out", gen_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "run the optimization loop");
  train->fallthrough();
  std::string train_modality, train_data, train_out, train_schedule = "desk";
  train->add_option("--modality", train_modality, "modality to train");
  train->add_option("--data", train_data, "dataset directory");
  train->add_option("--out", train_out, "output directory");
  train->add_option("--schedule", train_schedule, "desk|paper")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->fallthrough();
  std::string eval_ckpt, eval_data, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "output directory")->required();

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc->fallthrough();
  std::string gc_modality, gc_precision = "f64";
  std::size_t gc_samples = 100;
  gc->add_option("--modality", gc_modality, "modality pipeline to check")->required();
  gc->add_option("--samples", gc_samples, "sampled scalar parameters")->capture_default_str();
  gc->add_option("--precision", gc_precision, "f32|f64")->check(CLI::IsMember({"f32", "f64"}))
      ->capture_default_str();

  // inspect
  auto* ins = app.add_subcommand("inspect", "shape walk of the pipeline for one sample");
  ins->fallthrough();
  std::string ins_modality;
  ins->add_option("--modality", ins_modality, "modality to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems exit 1; --help exits 0
  }

  Session session;
  if (!session.ptr) {
    std::fprintf(stderr, "error: cannot create session\n");
    return 1;
  }

  if (gen->parsed()) {
    json spec;
    if (!config_path.empty()) spec = json::parse(slurp(config_path), nullptr, false);
    if (spec.is_discarded()) {
      std::fprintf(stderr, "error: bad json in %s\n", config_path.c_str());
      return 1;
    }
    spec["modality"] = gen_modality;
    if (!gen_task.empty())
      spec["task"] = gen_task;
    else if (!spec.contains("task")) {
      // default task mirrors the library's per-modality default
      spec["task"] = gen_modality == "code"         ? "text-generate"
                     : gen_modality == "table"      ? "regress"
                     : gen_modality == "graph"      ? "regress"
                     : gen_modality == "trajectory" ? "trajectory-predict"
                     : gen_modality == "oblique"    ? "depth"
                                                    : "classify";
    }
    spec["count"] = gen_count;
    spec["seed"] = seed;
    if (gen_classes > 0) spec["classes"] = gen_classes;
    if (gen_noise >= 0.0) spec["noise"] = gen_noise;
    const auto status = allspark_generate(session.ptr, spec.dump().c_str(), resolve_out(gen_out).c_str());
    return finish(session, status, nullptr, false);
  }

  if (train->parsed()) {
    json rc;
    if (!config_path.empty()) {
      rc = json::parse(slurp(config_path), nullptr, false);
      if (rc.is_discarded()) {
        std::fprintf(stderr, "error: bad json in %s\n", config_path.c_str());
        return 1;
      }
    }
    if (!train_modality.empty()) rc["modality"] = train_modality;
    if (!train_data.empty()) rc["data_dir"] = train_data;
    if (!train_out.empty()) rc["out_dir"] = resolve_out(train_out);
    if (!rc.contains("schedule")) rc["schedule"] = train_schedule;
    if (!rc.contains("seed")) rc["seed"] = seed;
    if (!rc.contains("preset")) rc["preset"] = preset;
    if (!rc.contains("prompts")) rc["prompts"] = prompts;
    char* summary = nullptr;
    const auto status = allspark_train(session.ptr, rc.dump().c_str(), &summary);
    return finish(session, status, summary, true);
  }

  if (eval->parsed()) {
    char* report = nullptr;
    const auto status = allspark_eval(session.ptr, eval_ckpt.c_str(), eval_data.c_str(),
                                      resolve_out(eval_out).c_str(), prompts.c_str(), &report);
    return finish(session, status, report, true);
  }

  if (gc->parsed()) {
    json req;
    req["modality"] = gc_modality;
    req["samples"] = gc_samples;
    req["precision"] = gc_precision;
    req["seed"] = seed;
    req["prompts"] = prompts;
    char* report = nullptr;
    const auto status = allspark_gradcheck(session.ptr, req.dump().c_str(), &report);
    if (status != ALLSPARK_OK) return finish(session, status, report, true);
    const bool passed = json::parse(report).at("passed").get<bool>();
    std::fputs(report, stdout);
    allspark_string_free(report);
    return passed ? 0 : 1;
  }

  if (ins->parsed()) {
    json req;
    req["modality"] = ins_modality;
    req["preset"] = preset;
    req["seed"] = seed;
    req["prompts"] = prompts;
    char* report = nullptr;
    const auto status = allspark_inspect(session.ptr, req.dump().c_str(), &report);
    if (status != ALLSPARK_OK) return finish(session, status, report, true);
    const auto j = json::parse(report);
    std::printf("modality:  %s (%s, %s preset)\n", j.at("modality").get<std::string>().c_str(),
                j.at("task").get<std::string>().c_str(), j.at("preset").get<std::string>().c_str());
    std::printf("tokens:    %zu x %zu\n", j.at("token_shape")[0].get<std::size_t>(),
                j.at("token_shape")[1].get<std::size_t>());
    std::printf("bridged:   %zu x %zu\n", j.at("bridged_shape")[0].get<std::size_t>(),
                j.at("bridged_shape")[1].get<std::size_t>());
    std::printf("assembled: %zu (boundary %zu, prompt %zu tokens)\n", j.at("assembled_length").get<std::size_t>(),
                j.at("boundary").get<std::size_t>(), j.at("prompt_tokens").get<std::size_t>());
    allspark_string_free(report);
    return 0;
  }

  return 1;
}

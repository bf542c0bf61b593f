#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "allspark.h"

namespace fs = std::filesystem;

namespace {

const std::string kPrompts = std::string(ALLSPARK_RESOURCE_DIR) + "/prompts.txt";

struct Session {
  allspark_session* ptr = nullptr;
  Session() { REQUIRE(allspark_session_new(&ptr) == ALLSPARK_OK); }
  ~Session() { allspark_session_free(ptr); }
};

std::string fresh_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("allspark_capi_" + tag);
  fs::remove_all(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("session lifecycle and version") {
  Session s;
  CHECK(std::string(allspark_last_error(s.ptr)).empty());
  CHECK(std::string(allspark_version()) == "0.1.0");
  CHECK(allspark_session_new(nullptr) == ALLSPARK_ERR_CONTRACT);
}

TEST_CASE("contract errors come back as status 1 with a message") {
  Session s;
  CHECK(allspark_generate(s.ptr, "{not json", "/tmp/x") == ALLSPARK_ERR_CONTRACT);
  CHECK(std::string(allspark_last_error(s.ptr)).find("json") != std::string::npos);
  CHECK(allspark_generate(s.ptr, R"({"modality":"nope","task":"classify"})", "/tmp/x") == ALLSPARK_ERR_CONTRACT);
}

TEST_CASE("io errors come back as status 2") {
  Session s;
  char* report = nullptr;
  CHECK(allspark_eval(s.ptr, "/no/such/checkpoint", "/no/such/data", "/tmp/x", kPrompts.c_str(), &report) ==
        ALLSPARK_ERR_IO);
  CHECK(std::string(allspark_last_error(s.ptr)).find("manifest") != std::string::npos);
}

TEST_CASE("generate, train, eval through the shared library") {
  Session s;
  const std::string data_dir = fresh_dir("data");
  const std::string run_dir = fresh_dir("run");
  const std::string eval_dir = fresh_dir("eval");

  const std::string spec = R"({"modality":"sar","task":"classify","count":6,"seed":3})";
  REQUIRE(allspark_generate(s.ptr, spec.c_str(), data_dir.c_str()) == ALLSPARK_OK);
  CHECK(fs::exists(data_dir + "/manifest.json"));

  const std::string rc = std::string("{\"modality\":\"sar\",\"data_dir\":\"") + data_dir + "\",\"out_dir\":\"" +
                         run_dir + "\",\"prompts\":\"" + kPrompts +
                         "\",\"seed\":5,\"schedule\":{\"max_lr\":1e-3,\"max_epochs\":3,"
                         "\"warmup_epochs\":1,\"steps_per_epoch\":10}}";
  char* summary = nullptr;
  REQUIRE_MESSAGE(allspark_train(s.ptr, rc.c_str(), &summary) == ALLSPARK_OK, allspark_last_error(s.ptr));
  REQUIRE(summary != nullptr);
  std::string sum = summary;
  allspark_string_free(summary);
  CHECK(sum.find("\"final_loss\"") != std::string::npos);
  CHECK(sum.find("\"steps\": 30") != std::string::npos);

  char* report = nullptr;
  REQUIRE(allspark_eval(s.ptr, (run_dir + "/checkpoint").c_str(), data_dir.c_str(), eval_dir.c_str(),
                        kPrompts.c_str(), &report) == ALLSPARK_OK);
  std::string rep = report;
  allspark_string_free(report);
  CHECK(rep.find("\"oa\"") != std::string::npos);
  CHECK(slurp(eval_dir + "/metrics.json") == rep);
  CHECK(slurp(eval_dir + "/metrics.csv").substr(0, 13) == "metric,value\n");

  // eval twice: byte-identical
  const std::string eval_dir2 = fresh_dir("eval2");
  char* report2 = nullptr;
  REQUIRE(allspark_eval(s.ptr, (run_dir + "/checkpoint").c_str(), data_dir.c_str(), eval_dir2.c_str(),
                        kPrompts.c_str(), &report2) == ALLSPARK_OK);
  CHECK(rep == std::string(report2));
  allspark_string_free(report2);
}

TEST_CASE("gradcheck through the shared library passes in 64-bit mode") {
  Session s;
  const std::string req =
      std::string(R"({"modality":"hsi","samples":40,"precision":"f64","prompts":")") + kPrompts + "\"}";
  char* report = nullptr;
  REQUIRE_MESSAGE(allspark_gradcheck(s.ptr, req.c_str(), &report) == ALLSPARK_OK, allspark_last_error(s.ptr));
  std::string rep = report;
  allspark_string_free(report);
  CHECK(rep.find("\"passed\": true") != std::string::npos);
  CHECK(rep.find("\"tolerance\": 1e-06") != std::string::npos);
}

TEST_CASE("gradcheck in 32-bit mode reports against the 1e-4 default") {
  Session s;
  const std::string req =
      std::string(R"({"modality":"hsi","samples":20,"precision":"f32","prompts":")") + kPrompts + "\"}";
  char* report = nullptr;
  REQUIRE(allspark_gradcheck(s.ptr, req.c_str(), &report) == ALLSPARK_OK);
  std::string rep = report;
  allspark_string_free(report);
  CHECK(rep.find("\"precision\": \"f32\"") != std::string::npos);
  CHECK(rep.find("\"tolerance\": 0.0001") != std::string::npos);
  CHECK(rep.find("\"max_rel_err\"") != std::string::npos);
}

TEST_CASE("inspect reports the shape walk") {
  Session s;
  const std::string req = std::string(R"({"modality":"pointcloud","preset":"desk","prompts":")") + kPrompts + "\"}";
  char* report = nullptr;
  REQUIRE_MESSAGE(allspark_inspect(s.ptr, req.c_str(), &report) == ALLSPARK_OK, allspark_last_error(s.ptr));
  std::string rep = report;
  allspark_string_free(report);
  CHECK(rep.find("\"token_shape\"") != std::string::npos);
  CHECK(rep.find("\"bridged_shape\"") != std::string::npos);
  CHECK(rep.find("\"verified\": true") != std::string::npos);

  // paper preset reports from the shape calculator without building params
  const std::string req2 = std::string(R"({"modality":"rgb","preset":"paper","prompts":")") + kPrompts + "\"}";
  char* report2 = nullptr;
  REQUIRE(allspark_inspect(s.ptr, req2.c_str(), &report2) == ALLSPARK_OK);
  std::string rep2 = report2;
  allspark_string_free(report2);
  CHECK(rep2.find("4096") != std::string::npos);
  CHECK(rep2.find("\"verified\": false") != std::string::npos);
}

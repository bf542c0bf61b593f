#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "allspark/prompts.hpp"

using namespace allspark;

namespace {
const std::string kRegistryPath = std::string(ALLSPARK_RESOURCE_DIR) + "/prompts.txt";
}

TEST_CASE("registry loads with expected per-modality counts") {
  auto reg = PromptRegistry::load(kRegistryPath);
  CHECK(reg.count(Modality::Text) == 1);
  CHECK(reg.count(Modality::Code) == 0);
  CHECK(reg.count(Modality::Rgb) == 4);
  CHECK(reg.count(Modality::Msi) == 2);
  CHECK(reg.count(Modality::Hsi) == 3);
  CHECK(reg.count(Modality::Table) == 2);
  CHECK(reg.count(Modality::Oblique) == 1);
  CHECK(reg.count(Modality::Trajectory) == 3);
  CHECK(reg.count(Modality::Sar) == 2);
  CHECK(reg.count(Modality::Infrared) == 2);
  CHECK(reg.count(Modality::Graph) == 2);
  CHECK(reg.count(Modality::Video) == 2);
  CHECK(reg.count(Modality::PointCloud) == 3);
}

TEST_CASE("eval mode returns the first rgb prompt") {
  auto reg = PromptRegistry::load(kRegistryPath);
  Rng rng(1);
  CHECK(select_prompt(reg, Modality::Rgb, PromptMode::Eval, rng) ==
        "This remote sensing image belongs to which of the following categories: [Category list of the NWPU "
        "dataset]");
}

TEST_CASE("singleton modalities are deterministic in eval mode") {
  auto reg = PromptRegistry::load(kRegistryPath);
  Rng rng(2);
  auto p1 = select_prompt(reg, Modality::Oblique, PromptMode::Eval, rng);
  auto p2 = select_prompt(reg, Modality::Oblique, PromptMode::Eval, rng);
  CHECK(p1 == p2);
  CHECK(p1 == "Please reconstruct the 3D model from the given images of five different views.");
}

TEST_CASE("code modality selects the empty prompt") {
  auto reg = PromptRegistry::load(kRegistryPath);
  Rng rng(3);
  CHECK(select_prompt(reg, Modality::Code, PromptMode::Train, rng).empty());
  CHECK(select_prompt(reg, Modality::Code, PromptMode::Eval, rng).empty());
}

TEST_CASE("train selection over hsi prompts is near-uniform (3 sigma)") {
  auto reg = PromptRegistry::load(kRegistryPath);
  Rng rng(12345);
  std::vector<int> freq(3, 0);
  const auto& prompts = reg.prompts(Modality::Hsi);
  REQUIRE(prompts.size() == 3);
  for (int i = 0; i < 3000; ++i) {
    auto p = select_prompt(reg, Modality::Hsi, PromptMode::Train, rng);
    for (std::size_t j = 0; j < 3; ++j) {
      if (p == prompts[j]) ++freq[j];
    }
  }
  // sigma for a count of 3000 draws at p = 1/3
  const double sigma = std::sqrt(3000.0 * (1.0 / 3.0) * (2.0 / 3.0));
  for (int j = 0; j < 3; ++j) CHECK(std::abs(freq[j] - 1000.0) <= 3.0 * sigma);
  CHECK(freq[0] + freq[1] + freq[2] == 3000);
}

TEST_CASE("train selection is reproducible from the rng state") {
  auto reg = PromptRegistry::load(kRegistryPath);
  auto draw = [&](std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> out;
    for (int i = 0; i < 20; ++i) out.push_back(select_prompt(reg, Modality::Rgb, PromptMode::Train, rng));
    return out;
  };
  CHECK(draw(7) == draw(7));
  CHECK(draw(7) != draw(8));
}

TEST_CASE("bad registries are rejected") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path();
  {
    std::ofstream f(dir / "prompts_missing.txt");
    f << "rgb\t1\tonly rgb\n";
  }
  CHECK_THROWS_AS(PromptRegistry::load((dir / "prompts_missing.txt").string()), IoError);
  {
    std::ofstream f(dir / "prompts_gap.txt");
    f << "rgb\t1\ta\nrgb\t3\tb\n";
  }
  CHECK_THROWS_AS(PromptRegistry::load((dir / "prompts_gap.txt").string()), IoError);
  CHECK_THROWS_AS(PromptRegistry::load((dir / "no_such_prompts.txt").string()), IoError);
}

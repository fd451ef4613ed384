#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "ocacnn/eval.hpp"
#include "support.hpp"

using namespace ocacnn;
namespace fs = std::filesystem;

namespace {

double brute_force_auc(const std::vector<double>& t, const std::vector<double>& u) {
  double wins = 0.0;
  for (double a : t)
    for (double b : u) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return wins / static_cast<double>(t.size() * u.size());
}

struct SmallBench {
  fs::path dir;
  DatasetManifest manifest;
  ProtocolOptions options;
};

SmallBench small_bench(const std::string& name, std::size_t k = 3) {
  SmallBench b;
  b.dir = test::scratch_dir(name);
  GeneratorConfig g;
  g.identities = k;
  g.samples = 12;
  g.image_size = 4;
  b.manifest = generate_identity_set(g, b.dir);
  b.options.arch = ArchConfig::tiny();
  b.options.train.epochs = 2;
  b.options.train.batch_size = 4;
  b.options.train.adam.lr = 1e-3;
  return b;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("auroc examples") {
  const std::vector<double> t{0.9, 0.8}, u{0.7, 0.85};
  CHECK(auroc(t, u).auroc == 0.75);
  CHECK(auroc(std::vector<double>{3, 4}, std::vector<double>{1, 2}).auroc == 1.0);
  CHECK(auroc(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1}).auroc == 0.5);
  CHECK_THROWS_AS(auroc(std::vector<double>{}, u), ContractError);

  const RocResult r = auroc(t, u);
  CHECK(r.points.front().fpr == 0.0);
  CHECK(r.points.front().tpr == 0.0);
  CHECK(r.points.back().fpr == 1.0);
  CHECK(r.points.back().tpr == 1.0);
  CHECK(trapezoid_area(r.points) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("auroc equals pairwise counting, ties included") {
  DeterministicRng rng(1, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nt = 1 + rng.uniform_index(30), nu = 1 + rng.uniform_index(30);
    const std::size_t levels = 2 + rng.uniform_index(8);  // few levels force ties
    std::vector<double> t(nt), u(nu);
    for (auto& v : t) v = static_cast<double>(rng.uniform_index(levels)) / static_cast<double>(levels);
    for (auto& v : u) v = static_cast<double>(rng.uniform_index(levels)) / static_cast<double>(levels);
    const double a = auroc(t, u).auroc;
    CHECK(std::abs(a - brute_force_auc(t, u)) <= 1e-12);

    std::vector<double> te(nt), ue(nu);
    std::transform(t.begin(), t.end(), te.begin(), [](double s) { return std::exp(3.0 * s) - 7.0; });
    std::transform(u.begin(), u.end(), ue.begin(), [](double s) { return std::exp(3.0 * s) - 7.0; });
    CHECK(auroc(te, ue).auroc == a);
  }
}

TEST_CASE("score_images") {
  const ArchConfig a = ArchConfig::tiny();
  DeterministicRng rng(2, 0);
  const Tensor imgs = test::random_tensor(rng, {5, 3, 4, 4}).cast<float>();
  ModelParams p = init_params(a, 2);
  const auto s = score_images(p, imgs, ScoreMode::neg_recon_error, 2);
  CHECK(s.size() == 5);
  for (double v : s) CHECK(v < 0.0);
  // Chunking does not change the per-image scores.
  const auto s1 = score_images(p, imgs, ScoreMode::neg_recon_error, 1);
  CHECK(s == s1);

  for (auto& [name, t] : p.tensors) {
    if (name.starts_with("classifier.")) t.fill(0.0f);
  }
  for (double v : score_images(p, imgs, ScoreMode::classifier_prob)) CHECK(v == 0.5);
}

TEST_CASE("perfect reconstruction scores zero") {
  // All-zero decoder weights with bias-free tanh output reconstruct a zero image.
  const ArchConfig a = ArchConfig::tiny();
  ModelParams p = init_params(a, 3);
  for (auto& [name, t] : p.tensors) {
    if (name.starts_with("decoder.")) t.fill(0.0f);
  }
  const auto s = score_images(p, Tensor({1, 3, 4, 4}, 0.0f), ScoreMode::neg_recon_error);
  CHECK(s[0] == 0.0);
}

TEST_CASE("run_protocol on a small benchmark") {
  SmallBench b = small_bench("proto", 3);
  const ImageStore store(b.manifest);
  const ProtocolReport full = run_protocol(b.manifest, store, b.options, TrainMode::full);
  CHECK(full.results.size() == 3);
  for (const auto& r : full.results) {
    CHECK(!r.failed);
    CHECK(r.auroc >= 0.0);
    CHECK(r.auroc <= 1.0);
    CHECK(r.n_target == 2);  // 12 files, 80/20 -> 10/2
    CHECK(r.n_unknown == 24);
  }

  SUBCASE("classifier_only is the lambda 0 run") {
    ProtocolOptions zero = b.options;
    zero.train.lambda_r = 0.0;
    const ProtocolReport lam0 = run_protocol(b.manifest, store, zero, TrainMode::full);
    const ProtocolReport conly = run_protocol(b.manifest, store, b.options, TrainMode::classifier_only);
    for (std::size_t i = 0; i < 3; ++i) CHECK(lam0.results[i].auroc == conly.results[i].auroc);
  }

  SUBCASE("identity order does not matter") {
    DatasetManifest reversed = b.manifest;
    std::stable_sort(reversed.entries.begin(), reversed.entries.end(),
                     [](const ManifestEntry& x, const ManifestEntry& y) { return x.identity > y.identity; });
    const ImageStore rstore(reversed);
    const ProtocolReport r = run_protocol(reversed, rstore, b.options, TrainMode::full);
    std::vector<double> a1, a2;
    for (const auto& x : full.results) a1.push_back(x.auroc);
    for (const auto& x : r.results) a2.push_back(x.auroc);
    std::sort(a1.begin(), a1.end());
    std::sort(a2.begin(), a2.end());
    CHECK(a1 == a2);
  }

  SUBCASE("ablation composes run_protocol") {
    const AblationReport ab = run_ablation_suite(b.manifest, store, b.options);
    REQUIRE(ab.reports.size() == 3);
    const auto it = std::find_if(ab.reports.begin(), ab.reports.end(),
                                 [](const ProtocolReport& r) { return r.mode == TrainMode::full; });
    REQUIRE(it != ab.reports.end());
    CHECK(format_machine(*it) == format_machine(full));
    const std::string table = format_table(ab.reports);
    CHECK(table.find("full") != std::string::npos);
    CHECK(table.find("classifier_only") != std::string::npos);
    CHECK(table.find("autoencoder_only") != std::string::npos);
  }

  SUBCASE("machine format") {
    const std::string text = format_machine(full);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
    CHECK(text.find("full\tMEAN\t") != std::string::npos);
    CHECK(text.find("full\tSTD\t") != std::string::npos);
  }
}

TEST_CASE("summarize uses the population deviation") {
  ProtocolReport r;
  for (double v : {0.5, 0.7, 0.9}) r.results.push_back({1, "x", v, 1, 1, false, ""});
  r.results.push_back({1, "y", 0.0, 0, 0, true, "diverged"});
  summarize(r);
  CHECK(r.mean == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(r.std == doctest::Approx(std::sqrt(0.08 / 3.0)).epsilon(1e-12));
  CHECK(r.failures == 1);
}

TEST_CASE("export_features") {
  SmallBench b = small_bench("export", 2);
  const ImageStore store(b.manifest);
  const ModelParams p = init_params(b.options.arch, 4);
  const auto out1 = b.dir / "out1", out2 = b.dir / "out2";
  export_features(p, b.manifest, store, "id00", out1);
  export_features(p, b.manifest, store, "id00", out2);
  const Tensor f = load_tensor<float>(out1 / "features.oct");
  CHECK(f.shape() == Shape{24, b.options.arch.feature_dim});
  std::ifstream labels(out1 / "labels.tsv");
  std::size_t rows = 0;
  for (std::string line; std::getline(labels, line);) rows += !line.empty() && line.rfind("identity", 0) != 0;
  CHECK(rows == 24);
  CHECK(bitwise_equal(f, load_tensor<float>(out2 / "features.oct")));
}

}

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "doctest.h"
#include "ocacnn/data.hpp"
#include "ocacnn/image_io.hpp"
#include "support.hpp"

using namespace ocacnn;
namespace fs = std::filesystem;

namespace {

GeneratorConfig small_config(std::size_t k = 3, std::size_t n = 20) {
  GeneratorConfig g;
  g.identities = k;
  g.samples = n;
  g.image_size = 8;
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_raw_ppm(const fs::path& path, std::size_t w, std::size_t h, unsigned char value) {
  std::ofstream out(path, std::ios::binary);
  out << "P6\n# test\n" << w << " " << h << "\n255\n";
  for (std::size_t i = 0; i < w * h * 3; ++i) out.put(static_cast<char>(value));
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("generator writes k*n files and is reproducible") {
  const auto d1 = test::scratch_dir("gen1"), d2 = test::scratch_dir("gen2");
  const DatasetManifest m = generate_identity_set(small_config(8, 10), d1);
  CHECK(m.entries.size() == 80);
  CHECK(m.identities().size() == 8);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d1)) files += e.is_regular_file() && e.path().extension() == ".oct";
  CHECK(files == 80);

  generate_identity_set(small_config(8, 10), d2);
  for (const auto& e : m.entries) CHECK(slurp(d1 / e.path) == slurp(d2 / e.path));
  CHECK(slurp(d1 / kManifestFile) == slurp(d2 / kManifestFile));

  const DatasetManifest back = read_manifest(d1 / kManifestFile);
  CHECK(back.entries.size() == 80);
  CHECK(back.image_size == 8);
}

TEST_CASE("generator preconditions") {
  CHECK_THROWS_WITH_AS(small_config(1).validate(), "need ≥ 2 identities", ContractError);
  CHECK_THROWS_AS(small_config(2, 5).validate(), ContractError);
}

TEST_CASE("identities differ and pixels stay in range") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    GeneratorConfig g = small_config(2);
    g.seed = seed;
    const auto a = identity_blobs(g, 0), b = identity_blobs(g, 1);
    double dist = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dist += std::hypot(a[i].cx - b[i].cx, a[i].cy - b[i].cy);
    CHECK(dist / static_cast<double>(a.size()) > 0.0);
  }
  GeneratorConfig g = small_config();
  g.noise_std = 0.5;
  const auto blobs = identity_blobs(g, 0);
  for (std::size_t s = 0; s < 20; ++s) {
    const Tensor img = render_sample(g, blobs, 0, s);
    for (float v : img.data()) {
      CHECK(v >= -1.0f);
      CHECK(v <= 1.0f);
    }
  }
  CHECK(bitwise_equal(render_sample(g, blobs, 0, 3), render_sample(g, blobs, 0, 3)));
}

TEST_CASE("build_splits follows the protocol") {
  DatasetManifest m;
  m.ratio = 0.85;
  for (int id = 0; id < 3; ++id) {
    for (int i = 0; i < (id == 0 ? 100 : 500); ++i) {
      m.entries.push_back({"p" + std::to_string(id), "f" + std::to_string(id) + "_" + std::to_string(i), Split::train});
    }
  }
  const ProtocolView v85 = build_splits(m, "p0", 0.85);
  CHECK(v85.train.size() == 85);
  CHECK(std::count(v85.test_is_target.begin(), v85.test_is_target.end(), true) == 15);
  CHECK(v85.test.size() == 15 + 1000);

  const ProtocolView v80 = build_splits(m, "p1", 0.8);
  CHECK(v80.train.size() == 400);
  CHECK(std::count(v80.test_is_target.begin(), v80.test_is_target.end(), true) == 100);
  for (std::size_t i : v80.train) CHECK(m.entries[i].identity == "p1");
  std::set<std::size_t> train(v80.train.begin(), v80.train.end());
  for (std::size_t i : v80.test) CHECK(!train.contains(i));

  const ProtocolView capped = build_splits(m, "p1", 0.8, 7);
  CHECK(capped.test.size() == 100 + 14);

  CHECK_THROWS_AS(build_splits(m, "nobody", 0.8), DataError);
  CHECK_THROWS_AS(build_splits(m, "p1", 1.0), ContractError);
}

TEST_CASE("batches cover the pool once per epoch") {
  std::vector<std::size_t> pool(400);
  for (std::size_t i = 0; i < 400; ++i) pool[i] = 1000 + i;
  BatchIterator it(pool, 64, DeterministicRng(1, Stream::shuffle));
  BatchIterator again(pool, 64, DeterministicRng(1, Stream::shuffle));
  CHECK(it.batches_per_epoch() == 7);
  std::vector<std::size_t> seen;
  for (int b = 0; b < 7; ++b) {
    const auto idx = it.next_indices();
    CHECK(idx.size() == (b < 6 ? 64u : 16u));
    CHECK(idx == again.next_indices());
    seen.insert(seen.end(), idx.begin(), idx.end());
  }
  std::sort(seen.begin(), seen.end());
  CHECK(seen == pool);
  CHECK(it.epoch() == 1);
  const auto first_next = it.next_indices();
  CHECK(first_next.size() == 64);
}

TEST_CASE("ppm decoding") {
  const auto dir = test::scratch_dir("ppm");
  for (unsigned char v : {0, 128, 255}) {
    write_raw_ppm(dir / "x.ppm", 2, 2, v);
    const Tensor img = read_ppm(dir / "x.ppm");
    CHECK(img.shape() == Shape{3, 2, 2});
    const double want = -1.0 + 2.0 * v / 255.0;
    CHECK(img[0] == doctest::Approx(want).epsilon(1e-6));
  }
  write_raw_ppm(dir / "x.ppm", 2, 2, 128);
  CHECK(read_ppm(dir / "x.ppm")[0] == doctest::Approx(0.00392157).epsilon(1e-4));

  Tensor img({3, 2, 2}, std::vector<float>{-1, 1, 0.5f, -0.5f, 0, 0, 1, 1, -1, -1, 0.25f, 0.75f});
  write_ppm(dir / "y.ppm", img);
  const Tensor back = read_ppm(dir / "y.ppm");
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 1.0f / 255.0f);

  std::ofstream(dir / "bad.ppm") << "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), FormatError);
}

TEST_CASE("ingest_directory") {
  const auto root = test::scratch_dir("ingest");
  for (const char* id : {"alice", "bob", "carol"}) {
    fs::create_directories(root / id);
    for (int i = 0; i < 4; ++i) write_raw_ppm(root / id / ("img" + std::to_string(i) + ".ppm"), 6, 6, 40 * i);
  }
  IngestOptions opts;
  const DatasetManifest m = ingest_directory(root, opts);
  CHECK(m.identities() == std::vector<std::string>{"alice", "bob", "carol"});
  CHECK(m.entries.size() == 12);
  CHECK(m.image_size == 6);
  CHECK(!fs::exists(root / kManifestFile));

  std::ofstream(root / "bob" / "broken.ppm") << "P6\n6 6\n255\n";
  CHECK_THROWS_AS(ingest_directory(root, opts), DataError);
  opts.tolerant = true;
  CHECK(ingest_directory(root, opts).entries.size() == 12);

  write_raw_ppm(root / "carol" / "wide.ppm", 10, 6, 9);
  opts.resize = true;
  opts.image_size = 6;
  const DatasetManifest resized = ingest_directory(root, opts);
  CHECK(resized.entries.size() == 13);
  const ImageStore store(resized);
  CHECK(store.image_shape() == Shape{3, 6, 6});
}

}

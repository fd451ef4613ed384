#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ocacnn/rng.hpp"
#include "ocacnn/tensor.hpp"

namespace ocacnn {

enum class Split { train, test };
std::string_view to_string(Split split);

struct ManifestEntry {
  std::string identity;
  std::string path;  // relative to the manifest's directory
  Split split = Split::train;
};

/// Identity-labelled image corpus. Each identity's files are divided into
/// train/test with `ratio`; the protocol view decides which of them are used.
struct DatasetManifest {
  std::filesystem::path root;  // directory holding the manifest; not serialized
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::uint64_t seed = 1;
  double ratio = 0.8;
  bool resize = false;  // images are center-cropped and resized to image_size on load
  std::vector<ManifestEntry> entries;

  /// Distinct identities in first-appearance order.
  std::vector<std::string> identities() const;
  /// Entry indices of one identity, ascending.
  std::vector<std::size_t> files_of(const std::string& identity) const;
};

inline constexpr const char* kManifestFile = "manifest.tsv";

/// Header of key=value lines (image_size, channels, seed, ratio, resize), then
/// one "identity<TAB>relative_path<TAB>train|test" line per file.
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& file);
DatasetManifest read_manifest(const std::filesystem::path& file);

/// Seeded shuffle of `files` (keyed by seed and identity name); the first
/// round(ratio * n) become train.
std::vector<Split> split_identity(std::size_t count, double ratio, std::uint64_t seed,
                                  const std::string& identity);

/// Recomputes the per-identity train/test assignment of every entry.
void assign_splits(DatasetManifest& manifest, double ratio);

enum class ImageFormat { oct, ppm };

struct GeneratorConfig {
  std::size_t identities = 8;
  std::size_t samples = 500;  // per identity
  std::size_t image_size = 32;
  std::size_t channels = 3;
  std::uint64_t seed = 1;
  double ratio = 0.8;
  std::size_t blob_count = 4;
  double gain_min = 0.6;
  double gain_max = 1.4;
  std::size_t jitter = 3;  // +- pixels
  double noise_std = 0.05;
  ImageFormat format = ImageFormat::oct;

  void validate() const;
};

struct Blob {
  double cx = 0, cy = 0;  // pixels
  double scale = 1;       // gaussian radius in pixels
  std::vector<double> color;
};

/// Blob layout of one identity, drawn once from (seed, identity index).
std::vector<Blob> identity_blobs(const GeneratorConfig& cfg, std::size_t identity);

/// One sample: gained, shifted blobs plus pixel noise, clamped to [-1, 1].
/// Pure function of (seed, identity, sample).
Tensor render_sample(const GeneratorConfig& cfg, const std::vector<Blob>& blobs,
                     std::size_t identity, std::size_t sample);

std::string identity_name(std::size_t identity, std::size_t total);

/// Writes id*/sample_*.{oct,ppm} and manifest.tsv under out_dir.
DatasetManifest generate_identity_set(const GeneratorConfig& cfg, const std::filesystem::path& out_dir);

struct IngestOptions {
  std::size_t image_size = 0;  // 0: take the size of the first image
  bool resize = false;
  bool tolerant = false;  // skip undecodable files instead of failing
  double ratio = 0.8;
  std::uint64_t seed = 1;
};

/// One subdirectory per identity holding .ppm or .oct images.
DatasetManifest ingest_directory(const std::filesystem::path& root, const IngestOptions& options);

/// One target's train/test view: train holds only target files; test holds the
/// target's held-out files followed by every file of every other identity.
struct ProtocolView {
  std::string target;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<bool> test_is_target;
};

/// `max_unknown_per_identity` = 0 keeps all unknown samples.
ProtocolView build_splits(const DatasetManifest& manifest, const std::string& target, double ratio,
                          std::size_t max_unknown_per_identity = 0);

/// All images of a manifest decoded into memory, indexed like its entries.
class ImageStore {
 public:
  explicit ImageStore(const DatasetManifest& manifest);

  std::size_t size() const noexcept { return count_; }
  Shape image_shape() const { return {channels_, size_, size_}; }
  std::span<const float> image(std::size_t index) const;
  /// Stacks the requested images into [n,C,H,W].
  Tensor gather(std::span<const std::size_t> indices) const;

 private:
  std::size_t count_ = 0, channels_ = 0, size_ = 0;
  std::vector<float> pixels_;
};

struct Batch {
  Tensor images;
  std::vector<std::string> identities;
  std::vector<std::size_t> indices;
};

/// Epoch-wise sampling without replacement; the order is reshuffled at the
/// start of each epoch from the owned generator.
class BatchIterator {
 public:
  BatchIterator(std::vector<std::size_t> pool, std::size_t batch_size, DeterministicRng rng);

  std::size_t batches_per_epoch() const noexcept;
  /// Completed epochs.
  std::size_t epoch() const noexcept { return epoch_; }
  std::vector<std::size_t> next_indices();

 private:
  void reshuffle();

  std::vector<std::size_t> pool_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  DeterministicRng rng_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
  bool started_ = false;
};

Batch next_batch(BatchIterator& it, const ImageStore& store, const DatasetManifest& manifest);

}  // namespace ocacnn

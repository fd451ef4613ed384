#include "ocacnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ocacnn/image_io.hpp"
#include "text_util.hpp"

namespace ocacnn {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

std::uint64_t identity_key(std::size_t identity) {
  return (static_cast<std::uint64_t>(identity) << 32) | 0xFFFFFFFFULL;
}

std::uint64_t sample_key(std::size_t identity, std::size_t sample) {
  return (static_cast<std::uint64_t>(identity) << 32) | static_cast<std::uint64_t>(sample);
}

void fisher_yates(std::vector<std::size_t>& values, DeterministicRng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(values[i - 1], values[j]);
  }
}

bool is_image_file(const fs::path& p) {
  const auto ext = p.extension().string();
  return ext == ".ppm" || ext == ".oct";
}

}  // namespace

std::string_view to_string(Split split) { return split == Split::train ? "train" : "test"; }

std::vector<std::string> DatasetManifest::identities() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.identity).second) ids.push_back(e.identity);
  }
  return ids;
}

std::vector<std::size_t> DatasetManifest::files_of(const std::string& identity) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].identity == identity) idx.push_back(i);
  }
  return idx;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw DataError("cannot open " + file.string() + " for writing");
  out << "image_size=" << manifest.image_size << '\n'
      << "channels=" << manifest.channels << '\n'
      << "seed=" << manifest.seed << '\n'
      << "ratio=" << format_double(manifest.ratio) << '\n'
      << "resize=" << (manifest.resize ? "true" : "false") << '\n';
  for (const auto& e : manifest.entries) {
    out << e.identity << '\t' << e.path << '\t' << to_string(e.split) << '\n';
  }
  if (!out) throw DataError("failed writing " + file.string());
}

DatasetManifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open manifest " + file.string());
  DatasetManifest m;
  m.root = file.parent_path();
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(in, line)) {
      ++lineno;
      const auto text = detail::trim(line);
      if (text.empty() || text.front() == '#') continue;
      if (text.find('\t') != std::string_view::npos) {
        const auto parts = detail::split(text, '\t');
        if (parts.size() != 3) throw FormatError("expected identity, path and split");
        Split split;
        if (parts[2] == "train") split = Split::train;
        else if (parts[2] == "test") split = Split::test;
        else throw FormatError("split must be train or test");
        m.entries.push_back({std::string(parts[0]), std::string(parts[1]), split});
        continue;
      }
      const auto eq = text.find('=');
      if (eq == std::string_view::npos) throw FormatError("expected key=value");
      const auto key = text.substr(0, eq);
      const auto value = text.substr(eq + 1);
      if (key == "image_size") m.image_size = detail::parse_int<std::size_t>(key, value);
      else if (key == "channels") m.channels = detail::parse_int<std::size_t>(key, value);
      else if (key == "seed") m.seed = detail::parse_int<std::uint64_t>(key, value);
      else if (key == "ratio") m.ratio = detail::parse_double(key, value);
      else if (key == "resize") m.resize = detail::parse_bool(key, value);
      else throw FormatError("unknown manifest key '" + std::string(key) + "'");
    }
  } catch (const Error& e) {
    throw FormatError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
  }
  if (m.entries.empty()) throw DataError(file.string() + ": manifest lists no files");
  return m;
}

std::vector<Split> split_identity(std::size_t count, double ratio, std::uint64_t seed,
                                  const std::string& identity) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split ratio must lie in (0, 1)");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  DeterministicRng rng = DeterministicRng(seed, Stream::split).fork(stable_hash(identity));
  fisher_yates(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(count)));
  std::vector<Split> splits(count, Split::test);
  for (std::size_t i = 0; i < n_train && i < count; ++i) splits[order[i]] = Split::train;
  return splits;
}

void assign_splits(DatasetManifest& manifest, double ratio) {
  manifest.ratio = ratio;
  for (const auto& id : manifest.identities()) {
    const auto files = manifest.files_of(id);
    const auto splits = split_identity(files.size(), ratio, manifest.seed, id);
    for (std::size_t i = 0; i < files.size(); ++i) manifest.entries[files[i]].split = splits[i];
  }
}

void GeneratorConfig::validate() const {
  if (identities < 2) throw ContractError("need ≥ 2 identities");
  if (samples < 10) throw ContractError("need >= 10 samples per identity");
  if (image_size < 4 || channels < 1) throw ContractError("generator image size must be >= 4");
  if (format == ImageFormat::ppm && channels != 3) throw ContractError("PPM output needs 3 channels");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split ratio must lie in (0, 1)");
  if (blob_count < 1) throw ContractError("blob_count must be >= 1");
  if (!(gain_min > 0.0 && gain_max >= gain_min)) throw ContractError("bad illumination gain range");
  if (!(noise_std >= 0.0)) throw ContractError("noise_std must be >= 0");
}

std::vector<Blob> identity_blobs(const GeneratorConfig& cfg, std::size_t identity) {
  DeterministicRng rng = DeterministicRng(cfg.seed, Stream::data).fork(identity_key(identity));
  const double size = static_cast<double>(cfg.image_size);
  std::vector<Blob> blobs(cfg.blob_count);
  for (auto& b : blobs) {
    b.cx = rng.uniform(0.2 * size, 0.8 * size);
    b.cy = rng.uniform(0.2 * size, 0.8 * size);
    b.scale = rng.uniform(0.08 * size, 0.2 * size);
    b.color.resize(cfg.channels);
    for (double& c : b.color) c = rng.uniform(-1.0, 1.0);
  }
  return blobs;
}

Tensor render_sample(const GeneratorConfig& cfg, const std::vector<Blob>& blobs,
                     std::size_t identity, std::size_t sample) {
  DeterministicRng rng = DeterministicRng(cfg.seed, Stream::data).fork(sample_key(identity, sample));
  const double gain = rng.uniform(cfg.gain_min, cfg.gain_max);
  const auto span = static_cast<std::uint64_t>(2 * cfg.jitter + 1);
  const double dx = static_cast<double>(rng.uniform_index(span)) - static_cast<double>(cfg.jitter);
  const double dy = static_cast<double>(rng.uniform_index(span)) - static_cast<double>(cfg.jitter);

  const std::size_t size = cfg.image_size;
  Tensor image(Shape{cfg.channels, size, size});
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      std::vector<double> pixel(cfg.channels, 0.0);
      for (const auto& b : blobs) {
        const double ex = static_cast<double>(x) - (b.cx + dx);
        const double ey = static_cast<double>(y) - (b.cy + dy);
        const double w = std::exp(-(ex * ex + ey * ey) / (2.0 * b.scale * b.scale));
        for (std::size_t c = 0; c < cfg.channels; ++c) pixel[c] += w * b.color[c];
      }
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        const double v = gain * pixel[c] + cfg.noise_std * rng.normal();
        image[(c * size + y) * size + x] = static_cast<float>(std::clamp(v, -1.0, 1.0));
      }
    }
  }
  return image;
}

std::string identity_name(std::size_t identity, std::size_t total) {
  std::size_t width = 2;
  for (std::size_t t = total; t >= 100; t /= 10) ++width;
  std::string digits = std::to_string(identity);
  if (digits.size() < width) digits.insert(0, width - digits.size(), '0');
  return "id" + digits;
}

DatasetManifest generate_identity_set(const GeneratorConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.image_size = cfg.image_size;
  manifest.channels = cfg.channels;
  manifest.seed = cfg.seed;
  manifest.ratio = cfg.ratio;
  const char* ext = cfg.format == ImageFormat::ppm ? ".ppm" : ".oct";
  const std::size_t sample_width = std::to_string(cfg.samples - 1).size();

  for (std::size_t id = 0; id < cfg.identities; ++id) {
    const std::string name = identity_name(id, cfg.identities);
    fs::create_directories(out_dir / name, ec);
    if (ec) throw DataError("cannot create " + (out_dir / name).string() + ": " + ec.message());
    const auto blobs = identity_blobs(cfg, id);
    for (std::size_t s = 0; s < cfg.samples; ++s) {
      std::string index = std::to_string(s);
      index.insert(0, sample_width - index.size(), '0');
      const std::string rel = name + "/sample_" + index + ext;
      const Tensor image = render_sample(cfg, blobs, id, s);
      if (cfg.format == ImageFormat::ppm) {
        write_ppm(out_dir / rel, image);
      } else {
        save_tensor(out_dir / rel, image);
      }
      manifest.entries.push_back({name, rel, Split::train});
    }
  }
  assign_splits(manifest, cfg.ratio);
  write_manifest(manifest, out_dir / kManifestFile);
  return manifest;
}

DatasetManifest ingest_directory(const fs::path& root, const IngestOptions& options) {
  if (!fs::is_directory(root)) throw DataError(root.string() + " is not a directory");
  std::vector<fs::path> identity_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) identity_dirs.push_back(entry.path());
  }
  std::sort(identity_dirs.begin(), identity_dirs.end());
  if (identity_dirs.empty()) throw DataError(root.string() + " has no identity subdirectories");

  DatasetManifest manifest;
  manifest.root = root;
  manifest.seed = options.seed;
  manifest.resize = options.resize;
  manifest.image_size = options.image_size;
  bool have_geometry = false;

  for (const auto& dir : identity_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    const std::string identity = dir.filename().string();
    for (const auto& file : files) {
      Tensor image;
      try {
        image = read_image(file);
      } catch (const DataError& e) {
        if (!options.tolerant) throw;
        std::cerr << "warning: skipping " << file.string() << ": " << e.what() << '\n';
        continue;
      }
      const std::size_t h = image.dim(1), w = image.dim(2);
      if (!have_geometry) {
        manifest.channels = image.dim(0);
        if (manifest.image_size == 0) {
          if (h != w && !options.resize) {
            throw DataError(file.string() + ": non-square image needs resize enabled");
          }
          manifest.image_size = std::min(h, w);
        }
        have_geometry = true;
      }
      if (image.dim(0) != manifest.channels) {
        throw DataError(file.string() + ": channel count differs from the rest of the corpus");
      }
      if ((h != manifest.image_size || w != manifest.image_size) && !options.resize) {
        throw DataError(file.string() + ": size " + std::to_string(h) + "x" + std::to_string(w) +
                        " differs from " + std::to_string(manifest.image_size) +
                        " and resize is disabled");
      }
      manifest.entries.push_back({identity, fs::relative(file, root).generic_string(), Split::train});
    }
  }
  if (manifest.entries.empty()) throw DataError(root.string() + " contains no decodable images");
  assign_splits(manifest, options.ratio);
  return manifest;
}

ProtocolView build_splits(const DatasetManifest& manifest, const std::string& target, double ratio,
                          std::size_t max_unknown_per_identity) {
  const auto target_files = manifest.files_of(target);
  if (target_files.empty()) throw DataError("unknown identity '" + target + "'");
  const auto splits = split_identity(target_files.size(), ratio, manifest.seed, target);

  ProtocolView view;
  view.target = target;
  for (std::size_t i = 0; i < target_files.size(); ++i) {
    if (splits[i] == Split::train) {
      view.train.push_back(target_files[i]);
    } else {
      view.test.push_back(target_files[i]);
      view.test_is_target.push_back(true);
    }
  }
  for (const auto& id : manifest.identities()) {
    if (id == target) continue;
    const auto files = manifest.files_of(id);
    const std::size_t keep = max_unknown_per_identity == 0
                                 ? files.size()
                                 : std::min(files.size(), max_unknown_per_identity);
    for (std::size_t i = 0; i < keep; ++i) {
      view.test.push_back(files[i]);
      view.test_is_target.push_back(false);
    }
  }
  return view;
}

ImageStore::ImageStore(const DatasetManifest& manifest)
    : count_(manifest.entries.size()), channels_(manifest.channels), size_(manifest.image_size) {
  const std::size_t per_image = channels_ * size_ * size_;
  pixels_.resize(count_ * per_image);
  for (std::size_t i = 0; i < count_; ++i) {
    const fs::path file = manifest.root / manifest.entries[i].path;
    Tensor image = read_image(file);
    if (image.dim(0) != channels_) {
      throw DataError(file.string() + ": expected " + std::to_string(channels_) + " channels");
    }
    if (image.dim(1) != size_ || image.dim(2) != size_) {
      if (!manifest.resize) {
        throw DataError(file.string() + ": image is " + shape_str(image.shape()) + ", manifest says " +
                        std::to_string(size_) + "x" + std::to_string(size_));
      }
      image = center_crop_resize(image, size_);
    }
    std::copy(image.data().begin(), image.data().end(), pixels_.begin() + static_cast<std::ptrdiff_t>(i * per_image));
  }
}

std::span<const float> ImageStore::image(std::size_t index) const {
  const std::size_t per_image = channels_ * size_ * size_;
  return std::span<const float>(pixels_).subspan(index * per_image, per_image);
}

Tensor ImageStore::gather(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw ContractError("gather: no indices");
  const std::size_t per_image = channels_ * size_ * size_;
  Tensor out(Shape{indices.size(), channels_, size_, size_});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= count_) throw ContractError("gather: index out of range");
    const auto src = image(indices[i]);
    std::copy(src.begin(), src.end(), out.raw() + i * per_image);
  }
  return out;
}

BatchIterator::BatchIterator(std::vector<std::size_t> pool, std::size_t batch_size, DeterministicRng rng)
    : pool_(std::move(pool)), batch_size_(batch_size), rng_(std::move(rng)) {
  if (pool_.empty()) throw ContractError("batch iterator: training set is empty");
  if (batch_size_ == 0) throw ContractError("batch iterator: batch size must be >= 1");
}

std::size_t BatchIterator::batches_per_epoch() const noexcept {
  return (pool_.size() + batch_size_ - 1) / batch_size_;
}

void BatchIterator::reshuffle() {
  order_ = pool_;
  fisher_yates(order_, rng_);
  cursor_ = 0;
}

std::vector<std::size_t> BatchIterator::next_indices() {
  if (!started_) {
    reshuffle();
    started_ = true;
  } else if (cursor_ >= order_.size()) {
    reshuffle();
  }
  const std::size_t end = std::min(cursor_ + batch_size_, order_.size());
  std::vector<std::size_t> batch(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  if (cursor_ == order_.size()) ++epoch_;
  return batch;
}

Batch next_batch(BatchIterator& it, const ImageStore& store, const DatasetManifest& manifest) {
  Batch batch;
  batch.indices = it.next_indices();
  batch.images = store.gather(batch.indices);
  for (std::size_t i : batch.indices) batch.identities.push_back(manifest.entries[i].identity);
  return batch;
}

}  // namespace ocacnn

#include "ocacnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ocacnn {

namespace {

std::string format_double(double v, int precision = 17) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

Tensor slice_rows(const Tensor& images, std::size_t begin, std::size_t end) {
  Shape shape = images.shape();
  const std::size_t per = images.size() / shape[0];
  shape[0] = end - begin;
  std::vector<float> values(images.data().begin() + static_cast<std::ptrdiff_t>(begin * per),
                            images.data().begin() + static_cast<std::ptrdiff_t>(end * per));
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

std::string_view to_string(ScoreMode mode) {
  return mode == ScoreMode::classifier_prob ? "classifier_prob" : "neg_recon_error";
}

ScoreMode score_mode_for(TrainMode mode) {
  return mode == TrainMode::autoencoder_only ? ScoreMode::neg_recon_error : ScoreMode::classifier_prob;
}

std::vector<double> score_images(const ModelParams& params, const Tensor& images, ScoreMode mode,
                                 std::size_t chunk) {
  if (images.rank() != 4) throw ShapeError("score_images: expected [M,C,H,W], got " + shape_str(images.shape()));
  if (chunk == 0) throw ContractError("score_images: chunk must be >= 1");
  const std::size_t m = images.dim(0);
  std::vector<double> scores;
  scores.reserve(m);
  for (std::size_t begin = 0; begin < m; begin += chunk) {
    const std::size_t end = std::min(m, begin + chunk);
    Tape<float> tape;
    ModelGraph<float> graph(tape, params, false);
    Var<float> x = tape.constant(slice_rows(images, begin, end));
    Var<float> features = graph.extract_features(x);
    if (mode == ScoreMode::classifier_prob) {
      const auto head = graph.classify(features, std::nullopt);
      for (float logit : head.logits.value().data()) {
        scores.push_back(1.0 / (1.0 + std::exp(-static_cast<double>(logit))));
      }
    } else {
      const Tensor rec = graph.decode(features).value();
      const Tensor& xv = x.value();
      const std::size_t per = xv.size() / xv.dim(0);
      for (std::size_t s = 0; s < xv.dim(0); ++s) {
        double err = 0.0;
        for (std::size_t i = s * per; i < (s + 1) * per; ++i) {
          err += std::abs(static_cast<double>(xv[i]) - rec[i]);
        }
        scores.push_back(-err);
      }
    }
  }
  return scores;
}

std::vector<ScoredSample> score_samples(const ModelParams& params, const DatasetManifest& manifest,
                                        const ImageStore& store, const ProtocolView& view,
                                        ScoreMode mode, std::size_t chunk) {
  std::vector<ScoredSample> out;
  out.reserve(view.test.size());
  for (std::size_t begin = 0; begin < view.test.size(); begin += chunk) {
    const std::size_t end = std::min(view.test.size(), begin + chunk);
    const std::span<const std::size_t> idx(view.test.data() + begin, end - begin);
    const auto scores = score_images(params, store.gather(idx), mode, chunk);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.push_back({scores[i], view.test_is_target[begin + i], manifest.entries[idx[i]].identity, mode});
    }
  }
  return out;
}

double trapezoid_area(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

RocResult auroc(std::span<const double> target_scores, std::span<const double> unknown_scores) {
  if (target_scores.empty() || unknown_scores.empty()) {
    throw ContractError("auroc needs at least one target and one unknown sample");
  }
  struct Item {
    double score;
    bool target;
  };
  std::vector<Item> items;
  items.reserve(target_scores.size() + unknown_scores.size());
  for (double s : target_scores) items.push_back({s, true});
  for (double s : unknown_scores) items.push_back({s, false});
  for (const auto& it : items) {
    if (std::isnan(it.score)) throw NumericalError("auroc: NaN score");
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

  const auto n_t = static_cast<double>(target_scores.size());
  const auto n_u = static_cast<double>(unknown_scores.size());

  // Rank statistic with midranks for ties.
  double target_rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    std::size_t targets = 0;
    while (j < items.size() && items[j].score == items[i].score) targets += items[j++].target;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    target_rank_sum += midrank * static_cast<double>(targets);
    i = j;
  }
  const double u = target_rank_sum - n_t * (n_t + 1.0) / 2.0;

  RocResult result;
  result.n_target = target_scores.size();
  result.n_unknown = unknown_scores.size();
  result.auroc = u / (n_t * n_u);

  // ROC from the highest threshold down.
  result.points.push_back({0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t end = items.size(); end > 0;) {
    std::size_t begin = end;
    while (begin > 0 && items[begin - 1].score == items[end - 1].score) {
      --begin;
      if (items[begin].target) ++tp; else ++fp;
    }
    result.points.push_back({static_cast<double>(fp) / n_u, static_cast<double>(tp) / n_t});
    end = begin;
  }
  const double area = trapezoid_area(result.points);
  if (std::abs(area - result.auroc) > 1e-12) {
    throw NumericalError("auroc: rank statistic " + format_double(result.auroc) +
                         " disagrees with ROC area " + format_double(area));
  }
  return result;
}

RocResult auroc(std::span<const ScoredSample> samples) {
  std::vector<double> targets, unknowns;
  for (const auto& s : samples) (s.is_target ? targets : unknowns).push_back(s.score);
  if (targets.empty() || unknowns.empty()) {
    throw ContractError("auroc needs at least one target and one unknown sample");
  }
  return auroc(targets, unknowns);
}

void summarize(ProtocolReport& report) {
  double sum = 0.0;
  std::size_t count = 0;
  report.failures = 0;
  for (const auto& r : report.results) {
    if (r.failed) {
      ++report.failures;
      continue;
    }
    sum += r.auroc;
    ++count;
  }
  report.mean = count ? sum / static_cast<double>(count) : std::nan("");
  double sq = 0.0;
  for (const auto& r : report.results) {
    if (!r.failed) sq += (r.auroc - report.mean) * (r.auroc - report.mean);
  }
  report.std = count ? std::sqrt(sq / static_cast<double>(count)) : std::nan("");
}

ProtocolReport run_protocol(const DatasetManifest& manifest, const ImageStore& store,
                            const ProtocolOptions& options, TrainMode mode, const ProgressFn& progress) {
  const auto identities = manifest.identities();
  if (identities.size() < 2) throw DataError("protocol needs at least 2 identities");
  const auto targets = options.targets.empty() ? identities : options.targets;

  ProtocolReport report;
  report.mode = mode;
  TrainOptions train = options.train;
  train.mode = mode;
  const ScoreMode score_mode = score_mode_for(mode);

  for (std::uint64_t seed : options.seeds) {
    train.seed = seed;
    for (const auto& target : targets) {
      const ProtocolView view = build_splits(manifest, target, options.ratio, options.max_unknown_per_identity);
      TargetResult entry;
      entry.seed = seed;
      entry.target = target;
      try {
        const TrainResult trained = train_target(manifest, store, view, options.arch, train);
        const auto scored = score_samples(trained.params, manifest, store, view, score_mode);
        const RocResult roc = auroc(scored);
        entry.auroc = roc.auroc;
        entry.n_target = roc.n_target;
        entry.n_unknown = roc.n_unknown;
      } catch (const NumericalError& e) {
        entry.failed = true;
        entry.error = e.what();
      }
      if (progress) progress(entry);
      report.results.push_back(std::move(entry));
    }
  }
  summarize(report);
  report.config["mode"] = std::string(to_string(mode));
  std::string seeds;
  for (std::uint64_t s : options.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  report.config["seeds"] = seeds;
  report.config["std"] = "population";
  return report;
}

AblationReport run_ablation_suite(const DatasetManifest& manifest, const ImageStore& store,
                                  const ProtocolOptions& options, const ProgressFn& progress) {
  AblationReport out;
  for (TrainMode mode : {TrainMode::autoencoder_only, TrainMode::classifier_only, TrainMode::full}) {
    out.reports.push_back(run_protocol(manifest, store, options, mode, progress));
  }
  for (std::size_t a = 0; a < out.reports.size(); ++a) {
    for (std::size_t b = 0; b < a; ++b) {
      out.differences.emplace_back(std::string(to_string(out.reports[a].mode)) + " - " +
                                       std::string(to_string(out.reports[b].mode)),
                                   out.reports[a].mean - out.reports[b].mean);
    }
  }
  return out;
}

std::string format_machine(const ProtocolReport& report) {
  std::ostringstream out;
  const auto mode = to_string(report.mode);
  for (const auto& r : report.results) {
    out << mode << '\t' << r.target << '\t' << (r.failed ? std::string("FAILED") : format_double(r.auroc)) << '\n';
  }
  out << mode << "\tMEAN\t" << format_double(report.mean) << '\n';
  out << mode << "\tSTD\t" << format_double(report.std) << '\n';
  return out.str();
}

std::string format_table(std::span<const ProtocolReport> reports) {
  std::ostringstream out;
  out << "# AUROC mean +- population std over (seed, target) runs\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-18s %8s %8s %6s %7s\n", "mode", "mean", "std", "runs", "failed");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-18s %8.4f %8.4f %6zu %7zu\n", std::string(to_string(r.mode)).c_str(),
                  r.mean, r.std, r.results.size(), r.failures);
    out << line;
  }
  return out.str();
}

std::string format_differences(const AblationReport& report) {
  std::ostringstream out;
  for (const auto& [label, diff] : report.differences) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-36s %+8.4f\n", label.c_str(), diff);
    out << line;
  }
  return out.str();
}

FeatureExport compute_features(const ModelParams& params, const DatasetManifest& manifest,
                               const ImageStore& store, const std::string& target, std::size_t chunk) {
  const std::size_t m = manifest.entries.size();
  const std::size_t d = params.arch.feature_dim;
  FeatureExport out;
  out.features = Tensor(Shape{m, d});
  for (std::size_t begin = 0; begin < m; begin += chunk) {
    const std::size_t end = std::min(m, begin + chunk);
    std::vector<std::size_t> idx(end - begin);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
    const Tensor f = extract_features(params, store.gather(idx));
    std::copy(f.data().begin(), f.data().end(), out.features.raw() + begin * d);
  }
  for (const auto& e : manifest.entries) {
    out.identities.push_back(e.identity);
    out.is_target.push_back(e.identity == target);
  }
  return out;
}

void export_features(const ModelParams& params, const DatasetManifest& manifest,
                     const ImageStore& store, const std::string& target,
                     const std::filesystem::path& out_dir) {
  const FeatureExport fx = compute_features(params, manifest, store, target);
  std::filesystem::create_directories(out_dir);
  save_tensor(out_dir / "features.oct", fx.features);
  std::ofstream labels(out_dir / "labels.tsv", std::ios::trunc);
  if (!labels) throw DataError("cannot write " + (out_dir / "labels.tsv").string());
  for (std::size_t i = 0; i < fx.identities.size(); ++i) {
    labels << fx.identities[i] << '\t' << (fx.is_target[i] ? 1 : 0) << '\n';
  }
}

}  // namespace ocacnn

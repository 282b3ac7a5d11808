#include "quadrat/evaluator.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "quadrat/errors.hpp"

namespace quadrat {

namespace {

LabelSet normalized(std::span<const std::int64_t> labels) {
  LabelSet out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

double image_f1(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth,
                const F1Options& options) {
  const LabelSet pred = normalized(predicted);
  const LabelSet real = normalized(truth);
  if (pred.empty() && real.empty()) return options.both_empty_score;
  LabelSet common;
  std::set_intersection(pred.begin(), pred.end(), real.begin(), real.end(),
                        std::back_inserter(common));
  const double tp = static_cast<double>(common.size());
  if (tp == 0.0) return 0.0;
  const double fp = static_cast<double>(pred.size()) - tp;
  const double fn = static_cast<double>(real.size()) - tp;
  // Equal to 2PR / (P + R) with P = tp / (tp + fp) and R = tp / (tp + fn).
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

GroundTruth GroundTruth::from_entries(std::vector<GroundTruthEntry> entries) {
  std::unordered_set<std::string> seen;
  for (auto& e : entries) {
    if (e.quadrat_id.empty()) throw InputError("ground truth: empty quadrat_id");
    if (e.transect_id.empty()) {
      throw InputError("ground truth: quadrat '" + e.quadrat_id + "' has no transect");
    }
    if (!seen.insert(e.quadrat_id).second) {
      throw InputError("ground truth: duplicate quadrat_id '" + e.quadrat_id + "'");
    }
    e.species = normalized(e.species);
  }
  GroundTruth gt;
  gt.entries_ = std::move(entries);
  return gt;
}

ScoreReport final_score(const std::map<std::string, LabelSet>& predictions,
                        const GroundTruth& truth, const F1Options& options) {
  ScoreReport report;
  std::map<std::string, std::vector<ImageScore>> by_transect;
  std::unordered_set<std::string> known;
  for (const auto& e : truth.entries()) {
    known.insert(e.quadrat_id);
    ImageScore score{e.quadrat_id, e.transect_id, 0.0, false};
    auto it = predictions.find(e.quadrat_id);
    if (it == predictions.end()) {
      score.missing = true;
      score.f1 = image_f1({}, e.species, options);
    } else {
      score.f1 = image_f1(it->second, e.species, options);
    }
    by_transect[e.transect_id].push_back(std::move(score));
  }
  for (const auto& [qid, labels] : predictions) {
    if (!known.count(qid)) report.unknown_predictions.push_back(qid);
  }

  double total = 0.0;
  for (auto& [transect, images] : by_transect) {
    std::sort(images.begin(), images.end(),
              [](const ImageScore& a, const ImageScore& b) { return a.quadrat_id < b.quadrat_id; });
    double sum = 0.0;
    for (const auto& img : images) sum += img.f1;
    const double mean = sum / static_cast<double>(images.size());
    report.transects.push_back({transect, mean, images.size()});
    total += mean;
    for (auto& img : images) {
      if (img.missing) report.missing_predictions.push_back(img.quadrat_id);
      report.images.push_back(std::move(img));
    }
  }
  report.final_score = report.transects.empty() ? 0.0 : total / static_cast<double>(report.transects.size());
  return report;
}

}  // namespace quadrat

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace quadrat {

/// Species labels of one image. Any integer labelling works; duplicates are ignored.
using LabelSet = std::vector<std::int64_t>;

struct F1Options {
  double both_empty_score = 1.0;  // score when prediction and truth are both empty
};

/// Harmonic mean of precision and recall for one image.
double image_f1(std::span<const std::int64_t> predicted, std::span<const std::int64_t> truth,
                const F1Options& options = {});

struct GroundTruthEntry {
  std::string quadrat_id;
  std::string transect_id;
  LabelSet species;
};

class GroundTruth {
 public:
  /// Quadrat ids must be unique and transect ids non-empty; throws InputError.
  static GroundTruth from_entries(std::vector<GroundTruthEntry> entries);

  const std::vector<GroundTruthEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::vector<GroundTruthEntry> entries_;
};

struct ImageScore {
  std::string quadrat_id;
  std::string transect_id;
  double f1 = 0.0;
  bool missing = false;  // no prediction supplied; scored as an empty set
};

struct TransectScore {
  std::string transect_id;
  double mean_f1 = 0.0;
  std::size_t image_count = 0;
};

struct ScoreReport {
  std::vector<ImageScore> images;        // sorted by (transect_id, quadrat_id)
  std::vector<TransectScore> transects;  // sorted by transect_id
  double final_score = 0.0;
  std::vector<std::string> missing_predictions;
  std::vector<std::string> unknown_predictions;  // predicted quadrats absent from the truth
};

/// Mean over transects of the mean per-image F1 within each transect.
ScoreReport final_score(const std::map<std::string, LabelSet>& predictions,
                        const GroundTruth& truth, const F1Options& options = {});

}  // namespace quadrat

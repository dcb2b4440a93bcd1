#pragma once

#include <cstdint>
#include <vector>

#include "flarecast/error.hpp"

namespace flarecast {

/// Binary confusion counts; positive means flaring.
struct ConfusionMatrix {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  long long actual_positives() const { return tp + fn; }
  long long actual_negatives() const { return fp + tn; }
  long long total() const { return tp + fp + fn + tn; }

  bool operator==(const ConfusionMatrix&) const = default;
};

struct SkillScores {
  double tss = 0.0;
  double hss2 = 0.0;
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& truths);

/// True Skill Statistic, TP/(TP+FN) - FP/(FP+TN), evaluated as the single
/// integer ratio (TP*TN - FP*FN)/(P*N) so equal rationals give equal doubles.
/// Requires at least one actual positive and one actual negative.
double tss(const ConfusionMatrix& cm);

/// Updated Heidke skill score, 2(TP*TN - FN*FP) / (P(FN+TN) + N(TP+FP)).
/// Requires a nonzero denominator.
double hss2(const ConfusionMatrix& cm);

SkillScores skill_scores(const ConfusionMatrix& cm);

/// Mean, unbiased sample variance and the raw values of repeated trials.
/// A single trial has zero variance by convention.
struct TrialAggregate {
  double mean = 0.0;
  double variance = 0.0;
  std::vector<double> values;
};

TrialAggregate aggregate(const std::vector<double>& values);

}  // namespace flarecast

#include "flarecast/eval.hpp"

namespace flarecast {

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& truths) {
  if (predictions.size() != truths.size())
    throw ComputeError("confusion: predictions and truths differ in length");
  if (predictions.empty()) throw ComputeError("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred_pos = predictions[i] > 0;
    const bool true_pos = truths[i] > 0;
    if (pred_pos && true_pos)
      ++cm.tp;
    else if (pred_pos && !true_pos)
      ++cm.fp;
    else if (!pred_pos && true_pos)
      ++cm.fn;
    else
      ++cm.tn;
  }
  return cm;
}

double tss(const ConfusionMatrix& cm) {
  const long long p = cm.actual_positives();
  const long long n = cm.actual_negatives();
  if (p == 0 || n == 0)
    throw ComputeError("undefined skill: TSS needs both actual classes present");
  const long long num = cm.tp * cm.tn - cm.fp * cm.fn;
  return static_cast<double>(num) / (static_cast<double>(p) * static_cast<double>(n));
}

double hss2(const ConfusionMatrix& cm) {
  const long long p = cm.actual_positives();
  const long long n = cm.actual_negatives();
  const long long den = p * (cm.fn + cm.tn) + n * (cm.tp + cm.fp);
  if (den == 0) throw ComputeError("undefined skill: HSS2 denominator is zero");
  const long long num = 2 * (cm.tp * cm.tn - cm.fn * cm.fp);
  return static_cast<double>(num) / static_cast<double>(den);
}

SkillScores skill_scores(const ConfusionMatrix& cm) { return {tss(cm), hss2(cm)}; }

TrialAggregate aggregate(const std::vector<double>& values) {
  if (values.empty()) throw ComputeError("aggregate: empty input");
  TrialAggregate out;
  out.values = values;
  bool constant = true;
  for (const double v : values) constant = constant && v == values.front();
  if (constant) {
    // Identical trials have exactly that mean and zero spread; summing would
    // smear both with rounding error (e.g. ten 0.7s).
    out.mean = values.front();
    return out;
  }
  double sum = 0.0;
  for (const double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (const double v : values) {
      const double d = v - out.mean;
      sq += d * d;
    }
    out.variance = sq / static_cast<double>(values.size() - 1);
  }
  return out;
}

}  // namespace flarecast

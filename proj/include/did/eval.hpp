#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "did/errors.hpp"

namespace did {

/// Rows are true classes, columns predicted.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::uint64_t> counts;  // n x n row-major

  explicit ConfusionMatrix(std::size_t n = 0)
      : n_classes(n), counts(n * n, 0) {}

  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * n_classes + pred];
  }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * n_classes + pred];
  }
  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion(const std::vector<int>& truths,
                                 const std::vector<int>& preds,
                                 std::size_t n_classes) {
  if (truths.size() != preds.size())
    throw Error("label lists differ in length");
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] < 0 || static_cast<std::size_t>(truths[i]) >= n_classes ||
        preds[i] < 0 || static_cast<std::size_t>(preds[i]) >= n_classes)
      throw LabelOutOfRange("label out of range at index " +
                            std::to_string(i));
    ++cm.at(static_cast<std::size_t>(truths[i]),
            static_cast<std::size_t>(preds[i]));
  }
  return cm;
}

struct BinaryCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// One-vs-rest reduction with `positive` as the positive class.
inline BinaryCounts collapse(const ConfusionMatrix& cm, std::size_t positive) {
  BinaryCounts b;
  for (std::size_t t = 0; t < cm.n_classes; ++t)
    for (std::size_t p = 0; p < cm.n_classes; ++p) {
      std::uint64_t c = cm.at(t, p);
      if (t == positive && p == positive) b.tp += c;
      else if (t == positive) b.fn += c;
      else if (p == positive) b.fp += c;
      else b.tn += c;
    }
  return b;
}

/// PR, RC, FO, F1. A metric whose denominator is zero is reported as
/// undefined rather than 0 or NaN.
struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> fall_out;
  std::optional<double> f1;
};

inline Metrics metrics(const BinaryCounts& c) {
  Metrics m;
  if (c.tp + c.fp > 0)
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0)
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.fp + c.tn > 0)
    m.fall_out = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
  // harmonic mean of PR and RC, computed from counts: 2TP / (2TP + FP + FN);
  // undefined when PR + RC = 0 (that is, TP = 0)
  if (m.precision && m.recall && c.tp > 0)
    m.f1 = 2.0 * static_cast<double>(c.tp) /
           static_cast<double>(2 * c.tp + c.fp + c.fn);
  return m;
}

inline Metrics metrics(const ConfusionMatrix& cm, std::size_t positive) {
  return metrics(collapse(cm, positive));
}

struct MulticlassReport {
  std::vector<Metrics> per_class;          // one-vs-rest
  Metrics macro;                           // unweighted mean over defined classes
  Metrics weighted;                        // weighted by true-class support
  std::vector<std::size_t> undefined_classes;  // excluded from the macro mean
};

inline MulticlassReport multiclass_report(const ConfusionMatrix& cm) {
  MulticlassReport rep;
  double sum_pr = 0, sum_rc = 0, sum_fo = 0, sum_f1 = 0;
  double wsum_pr = 0, wsum_rc = 0, wsum_fo = 0, wsum_f1 = 0;
  std::size_t n_pr = 0, n_rc = 0, n_fo = 0, n_f1 = 0;
  std::uint64_t w_pr = 0, w_rc = 0, w_fo = 0, w_f1 = 0;
  for (std::size_t c = 0; c < cm.n_classes; ++c) {
    Metrics m = metrics(cm, c);
    std::uint64_t support = 0;
    for (std::size_t p = 0; p < cm.n_classes; ++p) support += cm.at(c, p);
    if (!m.precision && !m.recall && !m.f1)
      rep.undefined_classes.push_back(c);
    if (m.precision) { sum_pr += *m.precision; ++n_pr;
                       wsum_pr += *m.precision * support; w_pr += support; }
    if (m.recall)    { sum_rc += *m.recall; ++n_rc;
                       wsum_rc += *m.recall * support; w_rc += support; }
    if (m.fall_out)  { sum_fo += *m.fall_out; ++n_fo;
                       wsum_fo += *m.fall_out * support; w_fo += support; }
    if (m.f1)        { sum_f1 += *m.f1; ++n_f1;
                       wsum_f1 += *m.f1 * support; w_f1 += support; }
    rep.per_class.push_back(std::move(m));
  }
  if (n_pr) rep.macro.precision = sum_pr / n_pr;
  if (n_rc) rep.macro.recall = sum_rc / n_rc;
  if (n_fo) rep.macro.fall_out = sum_fo / n_fo;
  if (n_f1) rep.macro.f1 = sum_f1 / n_f1;
  if (w_pr) rep.weighted.precision = wsum_pr / w_pr;
  if (w_rc) rep.weighted.recall = wsum_rc / w_rc;
  if (w_fo) rep.weighted.fall_out = wsum_fo / w_fo;
  if (w_f1) rep.weighted.f1 = wsum_f1 / w_f1;
  return rep;
}

inline nlohmann::json metrics_to_json(const Metrics& m) {
  auto put = [](const std::optional<double>& v) -> nlohmann::json {
    if (v) return *v;
    return nullptr;
  };
  return {{"precision", put(m.precision)},
          {"recall", put(m.recall)},
          {"fall_out", put(m.fall_out)},
          {"f1", put(m.f1)}};
}

inline nlohmann::json report_to_json(
    const ConfusionMatrix& cm, const MulticlassReport& rep,
    const std::map<int, std::string>& class_names = {}) {
  nlohmann::json j;
  nlohmann::json counts = nlohmann::json::array();
  for (std::size_t t = 0; t < cm.n_classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < cm.n_classes; ++p) row.push_back(cm.at(t, p));
    counts.push_back(row);
  }
  j["counts"] = counts;
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t c = 0; c < rep.per_class.size(); ++c) {
    nlohmann::json e = metrics_to_json(rep.per_class[c]);
    auto it = class_names.find(static_cast<int>(c));
    e["name"] = it != class_names.end() ? it->second
                                        : "class" + std::to_string(c);
    per_class.push_back(e);
  }
  j["per_class"] = per_class;
  j["macro"] = metrics_to_json(rep.macro);
  j["weighted"] = metrics_to_json(rep.weighted);
  j["undefined_classes"] = rep.undefined_classes;
  return j;
}

}  // namespace did

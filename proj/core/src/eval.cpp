#include "ctxtag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace ctxtag {

double precision_score(long predicted, long correct) {
  return predicted > 0 ? static_cast<double>(correct) / predicted : 0.0;
}

double recall_score(long gold, long correct) {
  return gold > 0 ? static_cast<double>(correct) / gold : 0.0;
}

double f1_score(long gold, long predicted, long correct) {
  const double p = precision_score(predicted, correct);
  const double r = recall_score(gold, correct);
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

EvalReport evaluate(
    const std::vector<Sentence>& gold,
    const std::vector<std::vector<std::string>>& predicted_labels) {
  if (gold.size() != predicted_labels.size())
    throw DataError("evaluate: " + std::to_string(gold.size()) +
                    " gold sentences vs " +
                    std::to_string(predicted_labels.size()) + " predictions");

  EvalReport report;
  std::map<std::string, EvalReport::Counts> per_type;

  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i].tokens.size() != predicted_labels[i].size())
      throw DataError("evaluate: length mismatch at sentence " +
                      std::to_string(i) + " (" +
                      std::to_string(gold[i].tokens.size()) + " tokens vs " +
                      std::to_string(predicted_labels[i].size()) + " labels)");
    std::vector<std::string> gold_labels;
    gold_labels.reserve(gold[i].tokens.size());
    for (const auto& t : gold[i].tokens) gold_labels.push_back(t.gold_label);

    const std::vector<Span> gold_spans = extract_spans(gold_labels);
    const std::vector<Span> pred_spans = extract_spans(predicted_labels[i]);
    const std::set<Span> gold_set(gold_spans.begin(), gold_spans.end());

    for (const auto& sp : gold_spans) {
      ++report.counts.gold;
      ++per_type[sp.entity_type].gold;
    }
    for (const auto& sp : pred_spans) {
      ++report.counts.predicted;
      ++per_type[sp.entity_type].predicted;
      if (gold_set.count(sp)) {
        ++report.counts.correct;
        ++per_type[sp.entity_type].correct;
      }
    }
  }

  report.precision = precision_score(report.counts.predicted, report.counts.correct);
  report.recall = recall_score(report.counts.gold, report.counts.correct);
  report.f1 = f1_score(report.counts.gold, report.counts.predicted,
                       report.counts.correct);
  for (const auto& [type, c] : per_type) {
    report.per_type[type] = {c, f1_score(c.gold, c.predicted, c.correct)};
  }
  return report;
}

std::string report_to_json(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  auto counts = [&](const EvalReport::Counts& c) {
    out << "{\"gold\": " << c.gold << ", \"predicted\": " << c.predicted
        << ", \"correct\": " << c.correct << "}";
  };
  out << "{\n";
  out << "  \"corpus\": \"" << report.corpus_name << "\",\n";
  out << "  \"model\": \"" << report.model_description << "\",\n";
  out << "  \"precision\": " << report.precision << ",\n";
  out << "  \"recall\": " << report.recall << ",\n";
  out << "  \"f1\": " << report.f1 << ",\n";
  out << "  \"counts\": ";
  counts(report.counts);
  out << ",\n  \"per_type\": {";
  bool first = true;
  for (const auto& [type, entry] : report.per_type) {
    if (!first) out << ",";
    first = false;
    out << "\n    \"" << type << "\": {\"counts\": ";
    counts(entry.first);
    out << ", \"f1\": " << entry.second << "}";
  }
  out << (report.per_type.empty() ? "}" : "\n  }") << "\n}\n";
  return out.str();
}

std::string format_f1_percent(double f1_percent) {
  // half-up at the second decimal
  const double rounded = std::floor(f1_percent * 100.0 + 0.5) / 100.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", rounded);
  return buf;
}

std::string render_study(const StudyReport& sr,
                         const std::vector<ExternalRow>& external_rows) {
  struct Line {
    std::string dataset, model;
    double f1;  // percent
  };
  std::vector<Line> lines;
  for (const auto& row : sr.rows)
    lines.push_back({row.dataset_label, row.model_label, row.report.f1 * 100.0});
  for (const auto& row : external_rows)
    lines.push_back({row.dataset_label, row.model_label, row.f1});

  // Best score per dataset is bolded, second best underlined.
  std::map<std::string, std::vector<double>> by_dataset;
  for (const auto& l : lines) by_dataset[l.dataset].push_back(l.f1);
  for (auto& [dataset, scores] : by_dataset)
    std::sort(scores.begin(), scores.end(), std::greater<>());

  std::string out = "| Dataset | Model | F1 score |\n|---|---|---|\n";
  for (const auto& l : lines) {
    const auto& scores = by_dataset[l.dataset];
    std::string cell = format_f1_percent(l.f1);
    if (l.f1 == scores[0]) {
      cell = "**" + cell + "**";
    } else if (scores.size() > 1 && l.f1 == scores[1]) {
      cell = "<u>" + cell + "</u>";
    }
    out += "| " + l.dataset + " | " + l.model + " | " + cell + " |\n";
  }
  return out;
}

}  // namespace ctxtag

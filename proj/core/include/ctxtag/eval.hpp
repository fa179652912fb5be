#pragma once

#include <map>
#include <string>
#include <vector>

#include "ctxtag/corpus.hpp"

namespace ctxtag {

// Exact-span micro-averaged precision/recall/F1 with a per-entity-type
// breakdown. A predicted span is correct iff (start, end, type) all match.
struct EvalReport {
  struct Counts {
    long gold = 0;
    long predicted = 0;
    long correct = 0;
  };

  double precision = 0;
  double recall = 0;
  double f1 = 0;
  Counts counts;
  std::map<std::string, std::pair<Counts, double>> per_type;  // counts, f1
  std::string corpus_name;
  std::string model_description;
};

double f1_score(long gold, long predicted, long correct);
double precision_score(long predicted, long correct);
double recall_score(long gold, long correct);

// Predicted labels are repaired by extract_spans before scoring; illegal BIO
// output never crashes evaluation. Throws DataError on misalignment, naming
// the first offending sentence.
EvalReport evaluate(const std::vector<Sentence>& gold,
                    const std::vector<std::vector<std::string>>& predicted_labels);

// Machine-readable report (JSON): all counts plus per-type scores.
std::string report_to_json(const EvalReport& report);

struct StudyRow {
  std::string dataset_label;
  std::string model_label;
  EvalReport report;
};

struct StudyReport {
  std::vector<StudyRow> rows;
};

// User-supplied comparison numbers (never computed here).
struct ExternalRow {
  std::string dataset_label;
  std::string model_label;
  double f1 = 0;  // percent scale
};

// Markdown table; F1 printed half-up to 2 decimals on the percent scale.
// Per dataset the best score is bolded and the second best underlined.
std::string render_study(const StudyReport& sr,
                         const std::vector<ExternalRow>& external_rows = {});

// Half-up rounding to 2 decimals, e.g. 87.005 -> "87.01".
std::string format_f1_percent(double f1_percent);

}  // namespace ctxtag

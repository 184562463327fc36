#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "slidegen/layout_core.hpp"
#include "slidegen/llm_gateway.hpp"

namespace slidegen {

// ---------------------------------------------------------------------------
// ROUGE

/// Lowercase, split on non-alphanumerics, drop empties. No stemming, no
/// stopword removal.
inline std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const PrfScore&) const = default;
};

inline PrfScore make_prf(double overlap, double cand_total, double ref_total) {
  PrfScore s;
  s.precision = cand_total > 0.0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0.0 ? overlap / ref_total : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

/// Clipped n-gram overlap over token lists.
inline PrfScore rouge_n(const std::vector<std::string>& candidate,
                        const std::vector<std::string>& reference, int n) {
  if (n < 1) throw ValidationError("rouge_n: n must be >= 1");
  auto ngram_counts = [n](const std::vector<std::string>& tokens) {
    std::map<std::string, int> counts;
    if (static_cast<int>(tokens.size()) >= n) {
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
        std::string gram;
        for (int j = 0; j < n; ++j) {
          if (j) gram += '\x1f';
          gram += tokens[i + j];
        }
        counts[gram] += 1;
      }
    }
    return counts;
  };
  const auto cand = ngram_counts(candidate);
  const auto ref = ngram_counts(reference);
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [gram, count] : cand) {
    cand_total += count;
    const auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [gram, count] : ref) ref_total += count;
  return make_prf(overlap, cand_total, ref_total);
}

/// Longest common subsequence length via dynamic programming.
inline int lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<int> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        curr[j] = prev[j - 1] + 1;
      else
        curr[j] = std::max(prev[j], curr[j - 1]);
    }
    std::swap(prev, curr);
  }
  return prev[b.size()];
}

inline PrfScore rouge_l(const std::vector<std::string>& candidate,
                        const std::vector<std::string>& reference) {
  const double lcs = lcs_length(candidate, reference);
  return make_prf(lcs, static_cast<double>(candidate.size()),
                  static_cast<double>(reference.size()));
}

struct RougeScores {
  PrfScore rouge1;
  PrfScore rouge2;
  PrfScore rougeL;
  bool operator==(const RougeScores&) const = default;
};

inline RougeScores score_rouge(const std::string& candidate_text,
                               const std::string& reference_text) {
  const auto cand = tokenize(candidate_text);
  const auto ref = tokenize(reference_text);
  return {rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)};
}

/// Content a slide contributes to ROUGE scoring: text elements concatenated
/// in element order.
inline std::string slide_content_text(const SlideSpec& spec) {
  std::string out;
  for (const auto& e : spec.elements) {
    if (!e.is_text() || !e.text) continue;
    if (!out.empty()) out += "\n";
    out += *e.text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LLM-as-judge

enum class JudgeCriterion {
  align_space,
  logical_flow,
  text_visual_consistency,
  visual_appeal,
  readability,
};

inline constexpr std::array<JudgeCriterion, 5> kAllJudgeCriteria = {
    JudgeCriterion::align_space, JudgeCriterion::logical_flow,
    JudgeCriterion::text_visual_consistency, JudgeCriterion::visual_appeal,
    JudgeCriterion::readability};

inline const char* to_string(JudgeCriterion c) {
  switch (c) {
    case JudgeCriterion::align_space: return "align_space";
    case JudgeCriterion::logical_flow: return "logical_flow";
    case JudgeCriterion::text_visual_consistency: return "text_visual_consistency";
    case JudgeCriterion::visual_appeal: return "visual_appeal";
    case JudgeCriterion::readability: return "readability";
  }
  return "align_space";
}

struct JudgeScore {
  JudgeCriterion criterion = JudgeCriterion::align_space;
  std::string reason;
  int score = 0;  // 1..5
  bool operator==(const JudgeScore&) const = default;
};

/// Rubric prompt per criterion, loaded from versioned assets.
using RubricSet = std::map<JudgeCriterion, std::string>;

struct JudgeOptions {
  std::string model = "mock-vision";
  double temperature = 0.0;
};

/// Scores the rendered slide against every rubric criterion, one
/// schema-validated {reason, score} reply each.
inline std::vector<JudgeScore> judge_layout(const ImageAttachment& final_render,
                                            const SlideSpec& spec, const RubricSet& rubrics,
                                            Transport& transport, const JudgeOptions& options = {}) {
  std::vector<JudgeScore> out;
  for (const JudgeCriterion criterion : kAllJudgeCriteria) {
    const auto it = rubrics.find(criterion);
    if (it == rubrics.end())
      throw AssetError(std::string("missing rubric for criterion '") + to_string(criterion) + "'");
    ChatRequest req;
    req.model = options.model;
    req.temperature = options.temperature;
    req.reply_schema = "judge_score";
    req.messages.push_back({"system", it->second, std::nullopt});
    std::ostringstream user;
    user << "Score the attached slide render for this criterion. The slide has "
         << spec.elements.size() << " elements on a " << spec.geometry.width << "x"
         << spec.geometry.height << "pt canvas. Reply with JSON {\"reason\": ..., \"score\": 1-5}.";
    req.messages.push_back({"user", user.str(), final_render});
    const json reply = complete(req, transport);
    out.push_back(JudgeScore{criterion, reply.at("reason").get<std::string>(),
                             reply.at("score").get<int>()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and report tables

struct SlideEvalRecord {
  std::string slide_id;
  RougeScores rouge;
  std::vector<JudgeScore> judge;  // may be empty when judging is disabled
};

struct LayoutAggregate {
  double align_space = 0.0;        // element level
  double logical_flow = 0.0;       // slide level
  double coherence = 0.0;          // slide level (text-visual consistency)
  double visual_appeal = 0.0;      // overall impression
  double readability = 0.0;        // overall impression
  int judged_slides = 0;
};

struct EvalReport {
  std::vector<SlideEvalRecord> slides;
  RougeScores mean_rouge;
  LayoutAggregate layout;
};

inline EvalReport aggregate(const std::vector<SlideEvalRecord>& records) {
  EvalReport report;
  report.slides = records;
  if (records.empty()) return report;

  auto add = [](PrfScore& acc, const PrfScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (const auto& r : records) {
    add(report.mean_rouge.rouge1, r.rouge.rouge1);
    add(report.mean_rouge.rouge2, r.rouge.rouge2);
    add(report.mean_rouge.rougeL, r.rouge.rougeL);
  }
  const double n = static_cast<double>(records.size());
  for (PrfScore* s : {&report.mean_rouge.rouge1, &report.mean_rouge.rouge2,
                      &report.mean_rouge.rougeL}) {
    s->precision /= n;
    s->recall /= n;
    s->f1 /= n;
  }

  std::map<JudgeCriterion, std::pair<double, int>> sums;
  int judged = 0;
  for (const auto& r : records) {
    if (r.judge.empty()) continue;
    ++judged;
    for (const auto& score : r.judge) {
      sums[score.criterion].first += score.score;
      sums[score.criterion].second += 1;
    }
  }
  auto mean_of = [&sums](JudgeCriterion c) {
    const auto it = sums.find(c);
    return (it == sums.end() || it->second.second == 0)
               ? 0.0
               : it->second.first / it->second.second;
  };
  report.layout.align_space = mean_of(JudgeCriterion::align_space);
  report.layout.logical_flow = mean_of(JudgeCriterion::logical_flow);
  report.layout.coherence = mean_of(JudgeCriterion::text_visual_consistency);
  report.layout.visual_appeal = mean_of(JudgeCriterion::visual_appeal);
  report.layout.readability = mean_of(JudgeCriterion::readability);
  report.layout.judged_slides = judged;
  return report;
}

namespace detail {

inline std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace detail

/// Columnar content table: ROUGE-1/2/L x P/R/F1 per slide plus the mean row.
inline std::string format_content_table(const EvalReport& report) {
  std::ostringstream out;
  out << "Slide              | ROUGE-1 P     R     F1 | ROUGE-2 P     R     F1 | "
         "ROUGE-L P     R     F1\n";
  out << std::string(100, '-') << "\n";
  auto row = [&out](const std::string& name, const RougeScores& s) {
    auto cell = [](const PrfScore& p) {
      return detail::fixed2(p.precision) + "  " + detail::fixed2(p.recall) + "  " +
             detail::fixed2(p.f1);
    };
    out << name;
    for (std::size_t i = name.size(); i < 19; ++i) out << ' ';
    out << "| " << cell(s.rouge1) << "        | " << cell(s.rouge2) << "        | "
        << cell(s.rougeL) << "\n";
  };
  for (const auto& r : report.slides) row(r.slide_id, r.rouge);
  row("mean", report.mean_rouge);
  return out.str();
}

/// Columnar layout table: Element-Level | Slide-Level | Overall Impression.
inline std::string format_layout_table(const EvalReport& report) {
  std::ostringstream out;
  out << "Result Type        | Element-Level | Slide-Level          | Overall Impression\n";
  out << "                   | Align & Space | Logic     Coherence  | Visual Appeal  Readability\n";
  out << std::string(95, '-') << "\n";
  const auto& l = report.layout;
  out << "Generated          | " << detail::fixed2(l.align_space) << "          | "
      << detail::fixed2(l.logical_flow) << "      " << detail::fixed2(l.coherence)
      << "       | " << detail::fixed2(l.visual_appeal) << "           "
      << detail::fixed2(l.readability) << "\n";
  return out.str();
}

inline json eval_report_to_json(const EvalReport& report) {
  auto prf = [](const PrfScore& s) {
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  json slides = json::array();
  for (const auto& r : report.slides) {
    json judge = json::array();
    for (const auto& s : r.judge)
      judge.push_back({{"criterion", to_string(s.criterion)}, {"reason", s.reason},
                       {"score", s.score}});
    slides.push_back({{"slide", r.slide_id},
                      {"rouge",
                       {{"rouge1", prf(r.rouge.rouge1)},
                        {"rouge2", prf(r.rouge.rouge2)},
                        {"rougeL", prf(r.rouge.rougeL)}}},
                      {"judge", judge}});
  }
  return {{"slides", slides},
          {"mean_rouge",
           {{"rouge1", prf(report.mean_rouge.rouge1)},
            {"rouge2", prf(report.mean_rouge.rouge2)},
            {"rougeL", prf(report.mean_rouge.rougeL)}}},
          {"layout",
           {{"align_space", report.layout.align_space},
            {"logical_flow", report.layout.logical_flow},
            {"coherence", report.layout.coherence},
            {"visual_appeal", report.layout.visual_appeal},
            {"readability", report.layout.readability},
            {"judged_slides", report.layout.judged_slides}}}};
}

}  // namespace slidegen

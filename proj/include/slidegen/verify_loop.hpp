#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "slidegen/layout_core.hpp"
#include "slidegen/llm_gateway.hpp"
#include "slidegen/prompts.hpp"
#include "slidegen/visualizer.hpp"

namespace slidegen {

// ---------------------------------------------------------------------------
// Review data

struct Recommendation {
  int element = 0;
  std::string recommendation;
  std::optional<Edit> parsed;
  bool operator==(const Recommendation&) const = default;
};

enum class ReviewSource { geometric, visual_llm, merged };

inline const char* to_string(ReviewSource s) {
  switch (s) {
    case ReviewSource::geometric: return "geometric";
    case ReviewSource::visual_llm: return "visual_llm";
    case ReviewSource::merged: return "merged";
  }
  return "geometric";
}

struct ReviewReport {
  int iteration = 0;
  std::vector<Finding> findings;
  std::vector<Recommendation> recommendations;
  ReviewSource source = ReviewSource::geometric;
  std::vector<std::string> warnings;
};

/// Edges within aligned_tol of a grid line or another element's edge count as
/// aligned; deviations in (aligned_tol, warn_tol] get an AlignTo suggestion.
struct AlignmentPolicy {
  double aligned_tol = 4.0;
  double warn_tol = 12.0;
  double grid = 36.0;
};

struct LoopConfig {
  int max_iters = 3;  // refine rounds; capped at 10
  bool stop_on_no_findings = true;
  bool stop_on_fixpoint = true;
  bool use_visual_llm = false;
  bool continue_on_gateway_error = true;  // degrade to geometric-only
  AlignmentPolicy alignment{};
};

// ---------------------------------------------------------------------------
// Number formatting for recommendation phrasing

namespace verifydetail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// Rounds a ratio up to one decimal place (the suggested-scale convention).
inline double ceil_tenth(double ratio) {
  return std::ceil(ratio * 10.0 - 1e-9) / 10.0;
}

inline int reading_rank(const SlideSpec& spec, int id) {
  std::vector<const Element*> order;
  for (const auto& e : spec.elements) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(), [](const Element* a, const Element* b) {
    if (a->bounds.top != b->bounds.top) return a->bounds.top < b->bounds.top;
    return a->bounds.left < b->bounds.left;
  });
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i]->id == id) return static_cast<int>(i);
  return -1;
}

/// Smallest translation that separates `moving` from `fixed`, preferring
/// results that stay on the slide.
inline std::pair<double, double> separation_move(const Rect& moving, const Rect& fixed,
                                                 const SlideGeometry& geometry) {
  struct Candidate {
    double dx, dy;
    double magnitude;
  };
  const std::vector<Candidate> candidates = {
      {fixed.right - moving.left, 0.0, std::abs(fixed.right - moving.left)},   // push right
      {fixed.left - moving.right, 0.0, std::abs(fixed.left - moving.right)},   // push left
      {0.0, fixed.bottom - moving.top, std::abs(fixed.bottom - moving.top)},   // push down
      {0.0, fixed.top - moving.bottom, std::abs(fixed.top - moving.bottom)},   // push up
  };
  std::vector<std::size_t> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].magnitude < candidates[b].magnitude;
  });
  for (std::size_t idx : order) {
    const auto& c = candidates[idx];
    if (within_slide(moving.translated(c.dx, c.dy), geometry)) return {c.dx, c.dy};
  }
  const auto& best = candidates[order.front()];
  return {best.dx, best.dy};
}

inline std::string move_phrase(const Rect& bounds, double dx, double dy) {
  std::ostringstream out;
  bool first = true;
  if (dx != 0.0) {
    const double pct = 100.0 * std::abs(dx) / bounds.width();
    out << "Move " << (dx > 0 ? "rightward" : "leftward") << " by " << fmt_num(pct)
        << "% of its width";
    first = false;
  }
  if (dy != 0.0) {
    if (!first) out << " and ";
    out << (first ? "Move " : "move ") << (dy > 0 ? "downward" : "upward") << " by "
        << fmt_num(100.0 * std::abs(dy) / bounds.height()) << "% of its height";
  }
  return out.str();
}

}  // namespace verifydetail

// ---------------------------------------------------------------------------
// Geometric review

/// Deterministic reviewer covering overlap, bounds, overflow, alignment,
/// font consistency, title hierarchy, aspect distortion and balance. Every
/// edit-bearing finding also appears as a Recommendation so the Refiner can
/// apply it.
inline ReviewReport geometric_review(const SlideSpec& spec, const SlideGeometry& geometry,
                                     const AlignmentPolicy& policy = {},
                                     const FigureStore* assets = nullptr) {
  using namespace verifydetail;
  ReviewReport report;
  report.source = ReviewSource::geometric;

  auto add_recommendation = [&report](int element, std::string text, const Edit& edit) {
    report.recommendations.push_back({element, std::move(text), edit});
  };

  // Object overlapping: one finding per interior-intersecting pair. The
  // later element in reading order moves; the trace notes that choice.
  for (std::size_t i = 0; i < spec.elements.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.elements.size(); ++j) {
      const Element& a = spec.elements[i];
      const Element& b = spec.elements[j];
      const auto overlap = rects_overlap(a.bounds, b.bounds);
      if (!overlap.overlapping) continue;
      const bool move_b = reading_rank(spec, b.id) >= reading_rank(spec, a.id);
      const Element& moving = move_b ? b : a;
      const Element& fixed = move_b ? a : b;
      const auto [dx, dy] = separation_move(moving.bounds, fixed.bounds, geometry);
      Finding f;
      f.element_ids = {a.id, b.id};
      f.kind = FindingKind::overlap;
      f.severity = Severity::error;
      f.suggested_edit = Edit{moving.id, MoveEdit{dx, dy}};
      f.note = "elements " + std::to_string(a.id) + " and " + std::to_string(b.id) +
               " overlap by " + fmt_num(overlap.area) + "pt^2; moving later element " +
               std::to_string(moving.id);
      report.findings.push_back(f);
      add_recommendation(moving.id,
                         move_phrase(moving.bounds, dx, dy) + " to clear the overlap with element " +
                             std::to_string(fixed.id) + ".",
                         *f.suggested_edit);
    }
  }

  // Element bounding: minimal translation back inside, or a shrink when the
  // element cannot fit at its current size.
  for (const auto& e : spec.elements) {
    if (within_slide(e.bounds, geometry)) continue;
    Finding f;
    f.element_ids = {e.id};
    f.kind = FindingKind::out_of_bounds;
    f.severity = Severity::error;
    if (auto clamped = clamp_into(e.bounds, geometry)) {
      const double dx = clamped->left - e.bounds.left;
      const double dy = clamped->top - e.bounds.top;
      f.suggested_edit = Edit{e.id, MoveEdit{dx, dy}};
      f.note = "element " + std::to_string(e.id) + " exceeds the slide";
      report.findings.push_back(f);
      add_recommendation(e.id, move_phrase(e.bounds, dx, dy) + " to stay within the slide.",
                         *f.suggested_edit);
    } else {
      const double fit = std::min(geometry.width / e.bounds.width(),
                                  geometry.height / e.bounds.height());
      const double factor = std::max(0.2, std::floor(fit * 10.0) / 10.0);
      f.suggested_edit = Edit{e.id, ScaleBoxEdit{factor, factor}};
      f.note = "element " + std::to_string(e.id) + " is larger than the slide";
      report.findings.push_back(f);
      add_recommendation(e.id,
                         "Reduce width by " + fmt_num(1.0 / factor) + "x to fit the slide.",
                         *f.suggested_edit);
    }
  }

  // Text overflow: grow the box by the rounded-up height ratio.
  for (const auto& e : spec.elements) {
    if (!e.is_text() || !e.text || !e.font || e.text->empty()) continue;
    double required = 0.0;
    bool degenerate = false;
    try {
      required = estimate_text_extent(*e.text, *e.font, e.bounds.width()).required_height;
    } catch (const DegenerateBox&) {
      degenerate = true;
    }
    if (degenerate) {
      const double char_width = kAvgGlyphWidthFactor * e.font->size_pt;
      const double fx =
          std::min(9.9, std::max(1.1, verifydetail::ceil_tenth(char_width / e.bounds.width())));
      Finding f;
      f.element_ids = {e.id};
      f.kind = FindingKind::text_overflow;
      f.severity = Severity::error;
      f.suggested_edit = Edit{e.id, ScaleBoxEdit{fx, 1.0}};
      f.note = "element " + std::to_string(e.id) + " is narrower than one character";
      report.findings.push_back(f);
      add_recommendation(e.id, "Increase width by " + fmt_num(fx) + "x to fit at least one character.",
                         *f.suggested_edit);
      continue;
    }
    if (required <= e.bounds.height() + 1e-6) continue;  // fp-equal heights are a fit
    const double fy = std::min(9.9, verifydetail::ceil_tenth(required / e.bounds.height()));
    Finding f;
    f.element_ids = {e.id};
    f.kind = FindingKind::text_overflow;
    f.severity = Severity::error;
    f.suggested_edit = Edit{e.id, ScaleBoxEdit{1.0, fy}};
    f.note = "element " + std::to_string(e.id) + " needs " + fmt_num(required) + "pt of height for its text";
    report.findings.push_back(f);
    add_recommendation(e.id,
                       "Increase text box height by " + fmt_num(fy) + "x to fit overflowing text.",
                       *f.suggested_edit);
  }

  // Positioning and alignment, per axis against the margin grid and peers.
  for (const auto& e : spec.elements) {
    struct Axis {
      RectEdge edge;
      double value;
      const char* name;
    };
    const Axis axes[2] = {{RectEdge::left, e.bounds.left, "left"},
                          {RectEdge::top, e.bounds.top, "top"}};
    for (const auto& axis : axes) {
      std::vector<double> targets;
      const double limit = axis.edge == RectEdge::left ? geometry.width : geometry.height;
      for (double g = 0.0; g <= limit + 1e-9; g += policy.grid) targets.push_back(g);
      for (const auto& other : spec.elements) {
        if (other.id == e.id) continue;
        targets.push_back(axis.edge == RectEdge::left ? other.bounds.left : other.bounds.top);
      }
      double best_target = targets.front();
      double best_dev = std::abs(axis.value - best_target);
      for (double t : targets) {
        const double dev = std::abs(axis.value - t);
        if (dev < best_dev - 1e-12 || (std::abs(dev - best_dev) <= 1e-12 && t < best_target)) {
          best_dev = dev;
          best_target = t;
        }
      }
      if (best_dev > policy.aligned_tol && best_dev <= policy.warn_tol) {
        Finding f;
        f.element_ids = {e.id};
        f.kind = FindingKind::misalignment;
        f.severity = Severity::warning;
        f.suggested_edit = Edit{e.id, AlignToEdit{axis.edge, best_target}};
        f.note = std::string("element ") + std::to_string(e.id) + " " + axis.name + " edge is " +
                 fmt_num(best_dev) + "pt off the nearest guide";
        report.findings.push_back(f);
        add_recommendation(e.id,
                           std::string("Align ") + axis.name + " to " + fmt_num(best_target) + ".",
                           *f.suggested_edit);
      }
    }
  }

  // Text formatting consistency: one font family per slide.
  {
    std::set<std::string> families;
    std::vector<int> text_ids;
    for (const auto& e : spec.elements) {
      if (!e.is_text() || !e.font) continue;
      families.insert(e.font->family);
      text_ids.push_back(e.id);
    }
    if (families.size() > 1) {
      Finding f;
      f.element_ids = text_ids;
      f.kind = FindingKind::font_inconsistency;
      f.severity = Severity::warning;
      std::string list;
      for (const auto& fam : families) list += (list.empty() ? "" : ", ") + fam;
      f.note = "multiple font families in use: " + list;
      report.findings.push_back(f);
    }
  }

  // Title hierarchy: the title must out-size every body font.
  {
    double max_body = 0.0;
    bool has_body = false;
    for (const auto& e : spec.elements)
      if (e.kind == ElementKind::body && e.font) {
        max_body = std::max(max_body, e.font->size_pt);
        has_body = true;
      }
    if (has_body) {
      for (const auto& e : spec.elements) {
        if (e.kind != ElementKind::title || !e.font) continue;
        if (e.font->size_pt > max_body) continue;
        const double delta = max_body + 2.0 - e.font->size_pt;
        Finding f;
        f.element_ids = {e.id};
        f.kind = FindingKind::title_hierarchy;
        f.severity = Severity::warning;
        f.suggested_edit = Edit{e.id, FontDeltaEdit{delta}};
        f.note = "title font " + fmt_num(e.font->size_pt) + "pt does not exceed body max " +
                 fmt_num(max_body) + "pt";
        report.findings.push_back(f);
        add_recommendation(e.id, "Increase font size by " + fmt_num(delta) + "pt.",
                           *f.suggested_edit);
      }
    }
  }

  // Image distortion, when natural sizes are known: flag aspect drift > 10%.
  if (assets) {
    for (const auto& e : spec.elements) {
      if (e.kind != ElementKind::image || !e.image_ref) continue;
      const FigureAsset* asset = assets->resolve(*e.image_ref);
      if (!asset || !asset->natural_size || asset->natural_size->height <= 0.0) continue;
      const double natural = asset->natural_size->width / asset->natural_size->height;
      const double current = e.bounds.width() / e.bounds.height();
      if (std::abs(current / natural - 1.0) <= 0.10) continue;
      Rect fixed = e.bounds;
      fixed.bottom = fixed.top + fixed.width() / natural;
      Finding f;
      f.element_ids = {e.id};
      f.kind = FindingKind::image_distortion;
      f.severity = Severity::warning;
      f.suggested_edit = Edit{e.id, SetBoundsEdit{fixed}};
      f.note = "image aspect " + fmt_num(current) + " drifts from natural " + fmt_num(natural);
      report.findings.push_back(f);
      add_recommendation(e.id, "Resize the image box to its natural aspect ratio.",
                         *f.suggested_edit);
    }
  }

  // Composition balance: area-weighted horizontal centroid near the middle.
  if (!spec.elements.empty()) {
    double weighted = 0.0, total = 0.0;
    std::vector<int> ids;
    for (const auto& e : spec.elements) {
      weighted += e.bounds.area() * e.bounds.center_x();
      total += e.bounds.area();
      ids.push_back(e.id);
    }
    if (total > 0.0) {
      const double centroid = weighted / total;
      if (centroid < 0.35 * geometry.width || centroid > 0.65 * geometry.width) {
        Finding f;
        f.element_ids = ids;
        f.kind = FindingKind::composition_balance;
        f.severity = Severity::warning;
        f.note = "horizontal centroid at " + fmt_num(centroid) + "pt of " +
                 fmt_num(geometry.width) + "pt leans to one side";
        report.findings.push_back(f);
      }
    }
  }

  return report;
}

// ---------------------------------------------------------------------------
// Recommendation grammar

/// Parses the reviewer phrasing grammar into a typed edit. Total: anything
/// outside the grammar yields nullopt.
inline std::optional<Edit> parse_recommendation(const SlideSpec& spec, int element_id,
                                                const std::string& text) {
  static const std::regex scale_re(
      R"(^\s*(increase|reduce)\s+(?:text\s+box\s+)?(height|width)\s+by\s+([0-9]*\.?[0-9]+)\s*x\b)",
      std::regex::icase);
  static const std::regex move_re(
      R"(^\s*move\s+(up|down|left|right)(?:ward)?\s+by\s+([0-9]*\.?[0-9]+)\s*%\s+of\s+its\s+(height|width)\b)",
      std::regex::icase);
  static const std::regex font_re(
      R"(^\s*(increase|reduce)\s+font\s+size\s+by\s+([0-9]*\.?[0-9]+)\s*pt\b)",
      std::regex::icase);
  static const std::regex align_re(
      R"(^\s*align\s+(left|right|top|bottom)\s+to\s+(-?[0-9]*\.?[0-9]+)\b)", std::regex::icase);

  const Element* element = spec.find(element_id);
  if (!element) return std::nullopt;
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };

  std::smatch m;
  if (std::regex_search(text, m, scale_re)) {
    const double given = std::stod(m[3].str());
    if (given <= 0.0) return std::nullopt;
    const double factor = lower(m[1].str()) == "increase" ? given : 1.0 / given;
    if (factor <= kMinScaleFactor || factor >= kMaxScaleFactor) return std::nullopt;
    ScaleBoxEdit scale;
    if (lower(m[2].str()) == "height")
      scale.fy = factor;
    else
      scale.fx = factor;
    return Edit{element_id, scale};
  }
  if (std::regex_search(text, m, move_re)) {
    const double pct = std::stod(m[2].str());
    const double dim =
        lower(m[3].str()) == "height" ? element->bounds.height() : element->bounds.width();
    const double delta = pct / 100.0 * dim;
    const std::string dir = lower(m[1].str());
    MoveEdit move;
    if (dir == "down")
      move.dy = delta;
    else if (dir == "up")
      move.dy = -delta;
    else if (dir == "right")
      move.dx = delta;
    else
      move.dx = -delta;
    return Edit{element_id, move};
  }
  if (std::regex_search(text, m, font_re)) {
    const double delta = std::stod(m[2].str());
    return Edit{element_id,
                FontDeltaEdit{lower(m[1].str()) == "increase" ? delta : -delta}};
  }
  if (std::regex_search(text, m, align_re)) {
    const std::string edge = lower(m[1].str());
    AlignToEdit align;
    align.coordinate = std::stod(m[2].str());
    if (edge == "left")
      align.edge = RectEdge::left;
    else if (edge == "right")
      align.edge = RectEdge::right;
    else if (edge == "top")
      align.edge = RectEdge::top;
    else
      align.edge = RectEdge::bottom;
    return Edit{element_id, align};
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Visual review

struct VisualReviewOptions {
  std::string vision_model = "mock-vision";
  double temperature = 0.0;
};

namespace verifydetail {

inline std::string element_inventory(const SlideSpec& spec) {
  std::ostringstream out;
  out << "Slide is " << fmt_num(spec.geometry.width) << " x " << fmt_num(spec.geometry.height)
      << " points. Elements:\n";
  for (const auto& e : spec.elements) {
    out << "- id " << e.id << " (" << to_string(e.kind) << ") bounds [" << fmt_num(e.bounds.left)
        << ", " << fmt_num(e.bounds.top) << ", " << fmt_num(e.bounds.right) << ", "
        << fmt_num(e.bounds.bottom) << "]";
    if (e.font) out << " font " << fmt_num(e.font->size_pt) << "pt";
    out << "\n";
  }
  return out.str();
}

}  // namespace verifydetail

/// Asks the vision model for the structured recommendation list over the
/// annotated render. Items naming unknown element ids are dropped with a
/// warning; an empty list is a valid "slide is clean" reply.
inline ReviewReport visual_review(const ImageAttachment& annotated_image, const SlideSpec& spec,
                                  const PromptLibrary& prompts, Transport& transport,
                                  const VisualReviewOptions& options = {},
                                  std::vector<PromptSnapshot>* snapshots = nullptr) {
  ChatRequest req;
  req.model = options.vision_model;
  req.temperature = options.temperature;
  req.reply_schema = "review_list";
  const std::string inventory = verifydetail::element_inventory(spec);
  req.messages = {{"system", prompts.prompt("visual_review"), std::nullopt},
                  {"user", inventory, annotated_image}};
  if (snapshots) snapshots->push_back({"visual_review", inventory});

  const json reply = complete(req, transport);
  ReviewReport report;
  report.source = ReviewSource::visual_llm;
  for (const auto& item : reply) {
    const int id = item.at("element").get<int>();
    const std::string text = item.at("recommendation").get<std::string>();
    if (!spec.find(id)) {
      report.warnings.push_back("dropped recommendation for unknown element id " +
                                std::to_string(id));
      continue;
    }
    Recommendation rec;
    rec.element = id;
    rec.recommendation = text;
    rec.parsed = parse_recommendation(spec, id, text);
    if (!rec.parsed)
      report.warnings.push_back("recommendation for element " + std::to_string(id) +
                                " is outside the edit grammar: \"" + text + "\"");
    report.recommendations.push_back(std::move(rec));
  }
  return report;
}

/// Concatenates geometric findings/recommendations with the visual ones;
/// duplicate (element, action) pairs keep the geometric entry.
inline ReviewReport merge_reports(const ReviewReport& geometric, const ReviewReport& visual) {
  ReviewReport merged;
  merged.source = ReviewSource::merged;
  merged.findings = geometric.findings;
  merged.warnings = geometric.warnings;
  merged.warnings.insert(merged.warnings.end(), visual.warnings.begin(), visual.warnings.end());
  std::set<std::pair<int, std::string>> seen;
  auto push = [&](const Recommendation& rec) {
    const std::string key = rec.parsed ? action_name(rec.parsed->action) : "unparsed";
    if (rec.parsed && !seen.insert({rec.element, key}).second) return;
    merged.recommendations.push_back(rec);
  };
  for (const auto& rec : geometric.recommendations) push(rec);
  for (const auto& rec : visual.recommendations) push(rec);
  return merged;
}

// ---------------------------------------------------------------------------
// Refiner

struct RefineResult {
  SlideSpec spec;
  std::vector<std::string> warnings;
};

/// Applies the report's parsed edits in order, one at a time so a failing
/// edit never aborts the batch. Unparsed recommendations are skipped with a
/// warning. Untouched fields pass through unchanged.
inline RefineResult refine(const SlideSpec& spec, const ReviewReport& report) {
  RefineResult result{spec, {}};
  for (const auto& rec : report.recommendations) {
    if (!rec.parsed) {
      result.warnings.push_back("skipped unparsed recommendation for element " +
                                std::to_string(rec.element) + ": \"" + rec.recommendation + "\"");
      continue;
    }
    try {
      auto applied = apply_edits(result.spec, {*rec.parsed});
      for (const auto& outcome : applied.outcomes)
        if (outcome.status == EditStatus::skipped_infeasible)
          result.warnings.push_back("edit on element " + std::to_string(outcome.target_id) +
                                    " skipped: " + outcome.detail);
      result.spec = std::move(applied.spec);
    } catch (const Error& e) {
      result.warnings.push_back(std::string("edit failed: ") + e.what());
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Loop controller

enum class TerminationReason { no_findings, fixpoint, max_iters };

inline const char* to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::no_findings: return "no_findings";
    case TerminationReason::fixpoint: return "fixpoint";
    case TerminationReason::max_iters: return "max_iters";
  }
  return "no_findings";
}

struct LoopTraceEntry {
  int iteration = 0;
  ReviewReport report;
  std::string spec_hash;  // hash of the spec the report reviewed
};

struct LoopResult {
  SlideSpec spec;
  std::vector<LoopTraceEntry> trace;
  TerminationReason reason = TerminationReason::no_findings;
  std::vector<std::string> notes;
  std::string final_spec_hash;
};

struct LoopDeps {
  const PromptLibrary* prompts = nullptr;  // required for visual review
  Transport* transport = nullptr;          // required for visual review
  const FigureStore* assets = nullptr;     // enables the distortion check
  RenderOptions render_options{};
  VisualReviewOptions visual{};
  std::vector<PromptSnapshot>* snapshots = nullptr;
};

inline std::string spec_hash(const SlideSpec& spec);

/// An error finding or an applicable edit keeps the loop going; advisory
/// warnings without edits (balance, font mixing) do not.
inline bool report_actionable(const ReviewReport& report) {
  for (const auto& f : report.findings)
    if (f.severity == Severity::error) return true;
  for (const auto& rec : report.recommendations)
    if (rec.parsed) return true;
  return false;
}

/// Review -> refine until the report is clean, the spec stops changing, or
/// max_iters refine rounds have run. The trace keeps every report with the
/// hash of the spec it reviewed.
inline LoopResult run_loop(const SlideSpec& initial, const LoopConfig& config,
                           const LoopDeps& deps = {}) {
  if (config.max_iters < 1 || config.max_iters > 10)
    throw ValidationError("loop max_iters must be in [1, 10]");

  LoopResult result;
  result.spec = initial;
  bool visual_enabled = config.use_visual_llm && deps.prompts && deps.transport;
  if (config.use_visual_llm && !visual_enabled)
    result.notes.push_back("visual review disabled: prompts/transport not configured");
  if (visual_enabled && !deps.render_options.raster_enabled) {
    visual_enabled = false;
    result.notes.push_back("visual review skipped: rasterization unavailable");
  }

  for (int round = 0;; ++round) {
    ReviewReport report =
        geometric_review(result.spec, result.spec.geometry, config.alignment, deps.assets);
    if (visual_enabled) {
      try {
        RenderOptions annotated = deps.render_options;
        annotated.annotate = true;
        const FigureStore empty_store;
        const VectorDoc doc =
            render(result.spec, deps.assets ? *deps.assets : empty_store, annotated);
        const RasterImage raster = rasterize(doc, annotated);
        const ImageAttachment image{"image/x-portable-pixmap", base64_encode(raster.to_ppm())};
        const ReviewReport visual = visual_review(image, result.spec, *deps.prompts,
                                                  *deps.transport, deps.visual, deps.snapshots);
        report = merge_reports(report, visual);
      } catch (const GatewayError& e) {
        if (!config.continue_on_gateway_error) throw;
        visual_enabled = false;
        result.notes.push_back(std::string("visual review dropped after gateway error: ") +
                               e.what());
      }
    }
    report.iteration = round;
    result.trace.push_back({round, report, spec_hash(result.spec)});

    if (config.stop_on_no_findings && !report_actionable(report)) {
      result.reason = TerminationReason::no_findings;
      break;
    }
    RefineResult refined = refine(result.spec, report);
    for (auto& w : refined.warnings) result.notes.push_back("iteration " + std::to_string(round) + ": " + w);
    if (config.stop_on_fixpoint && refined.spec == result.spec) {
      result.reason = TerminationReason::fixpoint;
      break;
    }
    result.spec = std::move(refined.spec);
    if (round + 1 >= config.max_iters) {
      result.reason = TerminationReason::max_iters;
      break;
    }
  }
  result.final_spec_hash = spec_hash(result.spec);
  return result;
}

// ---------------------------------------------------------------------------
// Trace serialization

inline json edit_to_json(const Edit& edit) {
  json out = {{"target", edit.target_id}, {"action", action_name(edit.action)}};
  if (const auto* m = std::get_if<MoveEdit>(&edit.action)) {
    out["dx"] = m->dx;
    out["dy"] = m->dy;
  } else if (const auto* s = std::get_if<ScaleBoxEdit>(&edit.action)) {
    out["fx"] = s->fx;
    out["fy"] = s->fy;
  } else if (const auto* b = std::get_if<SetBoundsEdit>(&edit.action)) {
    out["rect"] = {b->rect.left, b->rect.top, b->rect.right, b->rect.bottom};
  } else if (const auto* f = std::get_if<FontDeltaEdit>(&edit.action)) {
    out["delta_pt"] = f->delta_pt;
  } else if (const auto* a = std::get_if<AlignToEdit>(&edit.action)) {
    out["edge"] = to_string(a->edge);
    out["coordinate"] = a->coordinate;
  }
  return out;
}

inline json finding_to_json(const Finding& f) {
  json out = {{"elements", f.element_ids},
              {"kind", to_string(f.kind)},
              {"severity", to_string(f.severity)},
              {"note", f.note}};
  if (f.suggested_edit) out["suggested_edit"] = edit_to_json(*f.suggested_edit);
  return out;
}

inline json report_to_json(const ReviewReport& report) {
  json findings = json::array();
  for (const auto& f : report.findings) findings.push_back(finding_to_json(f));
  json recs = json::array();
  for (const auto& r : report.recommendations) {
    json rec = {{"element", r.element}, {"recommendation", r.recommendation}};
    if (r.parsed) rec["parsed"] = edit_to_json(*r.parsed);
    recs.push_back(std::move(rec));
  }
  return {{"iteration", report.iteration},
          {"source", to_string(report.source)},
          {"findings", findings},
          {"recommendations", recs},
          {"warnings", report.warnings}};
}

inline json trace_to_json(const LoopResult& result) {
  json iterations = json::array();
  for (const auto& entry : result.trace) {
    json e = report_to_json(entry.report);
    e["spec_hash"] = entry.spec_hash;
    iterations.push_back(std::move(e));
  }
  return {{"iterations", iterations},
          {"termination", to_string(result.reason)},
          {"final_spec_hash", result.final_spec_hash},
          {"notes", result.notes}};
}

inline std::string spec_hash(const SlideSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(slide_to_json(spec).dump())));
  return buf;
}

}  // namespace slidegen

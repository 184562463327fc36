#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "slidegen/doc_model.hpp"
#include "slidegen/eval.hpp"
#include "slidegen/llm_gateway.hpp"
#include "slidegen/prompts.hpp"
#include "slidegen/retrieval.hpp"

namespace slidegen {

// ---------------------------------------------------------------------------
// Figure reference extraction

struct FigureMention {
  std::string label;  // normalized, e.g. "Figure 2"
  int count = 1;      // occurrences in the scanned text
  bool operator==(const FigureMention&) const = default;
};

/// Maps an alternative prefix (e.g. "Fig.") to its canonical label prefix.
struct LabelAlias {
  std::string prefix;
  std::string canonical;  // "Figure" or "Table"
};

namespace detail {

inline std::string escape_regex(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

}  // namespace detail

/// Finds case-sensitive "Figure N" / "Table N" references (N a positive
/// integer), in order of first occurrence, with per-label counts. Extra label
/// aliases are off unless configured.
inline std::vector<FigureMention> extract_figure_refs(
    const std::string& text, const std::vector<LabelAlias>& aliases = {}) {
  std::string pattern = "\\b(Figure|Table";
  for (const auto& alias : aliases) pattern += "|" + detail::escape_regex(alias.prefix);
  pattern += ") ([1-9][0-9]*)\\b";
  const std::regex re(pattern);

  std::vector<FigureMention> out;
  std::map<std::string, std::size_t> index_of;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
       it != std::sregex_iterator(); ++it) {
    std::string prefix = (*it)[1].str();
    for (const auto& alias : aliases)
      if (prefix == alias.prefix) prefix = alias.canonical;
    const std::string label = prefix + " " + (*it)[2].str();
    const auto found = index_of.find(label);
    if (found == index_of.end()) {
      index_of[label] = out.size();
      out.push_back({label, 1});
    } else {
      out[found->second].count += 1;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figure candidate matching

struct FigureCandidate {
  std::string asset_id;
  std::string label;
  std::string caption;
  int mention_count = 1;
  bool operator==(const FigureCandidate&) const = default;
};

struct MatchedFigures {
  std::vector<FigureCandidate> candidates;
  std::vector<std::string> warnings;  // one per unresolved label
};

inline MatchedFigures match_figures(const std::vector<FigureMention>& mentions,
                                    const Paper& paper) {
  MatchedFigures out;
  for (const auto& mention : mentions) {
    const FigureAsset* asset = paper.find_figure_by_label(mention.label);
    if (!asset) {
      out.warnings.push_back(mention.label + " unresolved");
      continue;
    }
    out.candidates.push_back({asset->id, asset->label, asset->caption, mention.count});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Content planning

struct ContentPlan {
  std::string slide_title;
  std::vector<std::string> bullets;
  std::vector<std::string> selected_figures;  // asset ids, subset of candidates
  std::optional<std::string> speaker_context;
  bool operator==(const ContentPlan&) const = default;
};

struct ContentGenOptions {
  std::string chat_model = "mock-chat";
  bool full_paper_mode = false;  // feed every section instead of the retrieved ones
  double temperature = 0.0;
};

namespace detail {

inline std::string sections_block(const SlideTask& task, const std::vector<RankedSection>& ranked,
                                  bool full_paper) {
  std::ostringstream out;
  if (full_paper) {
    for (const auto& s : task.paper.sections) out << "## " << s.heading << "\n" << s.text << "\n\n";
  } else {
    for (const auto& r : ranked) {
      const Section* s = task.paper.find_section(r.section_id);
      if (!s) throw ValidationError("ranked section '" + r.section_id + "' not in paper");
      out << "## " << s->heading << "\n" << s->text << "\n\n";
    }
  }
  return out.str();
}

inline std::string figures_block(const std::vector<FigureCandidate>& candidates) {
  if (candidates.empty()) return "(none)\n";
  std::ostringstream out;
  for (const auto& c : candidates)
    out << "- " << c.asset_id << ": " << c.label << " — " << c.caption << " (mentioned "
        << c.mention_count << "x)\n";
  return out.str();
}

inline std::string neighbor_context_block(const SlideTask& task) {
  if (!task.prev_slide && !task.next_slide) return "";
  std::ostringstream out;
  out << "\nSurrounding slides, for coherent flow and transitions:\n";
  if (task.prev_slide)
    out << "Previous slide content:\n" << slide_content_text(*task.prev_slide) << "\n";
  if (task.next_slide)
    out << "Next slide content:\n" << slide_content_text(*task.next_slide) << "\n";
  return out.str();
}

}  // namespace detail

/// Plans the slide's content from retrieved sections, figure candidates and
/// neighbor-slide context. The reply must pick figures only from the
/// candidate list; violations trigger the gateway's single repair reprompt.
inline ContentPlan generate_content(const SlideTask& task,
                                    const std::vector<RankedSection>& sections,
                                    const std::vector<FigureCandidate>& candidates,
                                    const PromptLibrary& prompts, Transport& transport,
                                    const ContentGenOptions& options = {},
                                    std::vector<PromptSnapshot>* snapshots = nullptr) {
  validate_task(task);
  if (sections.empty() && !options.full_paper_mode)
    throw ValidationError(
        "generate_content: no retrieved sections; enable full-paper mode to use the whole paper");

  const std::string rendered = render_template(
      prompts.prompt("content_plan"),
      {{"topic", task.topic},
       {"sections", detail::sections_block(task, sections, options.full_paper_mode)},
       {"figures", detail::figures_block(candidates)},
       {"neighbor_context", detail::neighbor_context_block(task)}});
  if (snapshots) snapshots->push_back({"content_plan", rendered});

  ChatRequest req;
  req.model = options.chat_model;
  req.temperature = options.temperature;
  req.reply_schema = "content_plan";
  req.messages = {{"user", rendered, std::nullopt}};

  const ReplyValidator& base = builtin_reply_schemas().at("content_plan");
  ReplyValidator validator = [&base, &candidates](const json& j) -> std::optional<std::string> {
    if (auto err = base(j)) return err;
    if (j.contains("selected_figures")) {
      for (const auto& f : j.at("selected_figures")) {
        const std::string id = f.get<std::string>();
        const bool known = std::any_of(candidates.begin(), candidates.end(),
                                       [&id](const FigureCandidate& c) { return c.asset_id == id; });
        if (!known) return "selected figure '" + id + "' is not among the candidates";
      }
    }
    return std::nullopt;
  };
  const json reply = complete(req, transport, validator);

  ContentPlan plan;
  plan.slide_title = reply.at("slide_title").get<std::string>();
  for (const auto& b : reply.at("bullets")) plan.bullets.push_back(b.get<std::string>());
  if (reply.contains("selected_figures"))
    for (const auto& f : reply.at("selected_figures"))
      plan.selected_figures.push_back(f.get<std::string>());
  if (reply.contains("speaker_context"))
    plan.speaker_context = reply.at("speaker_context").get<std::string>();
  return plan;
}

// ---------------------------------------------------------------------------
// Initial layout drafting

enum class OutOfBoundsPolicy {
  pass,    // leave defects for the verify loop (default)
  clamp,   // translate offending elements back inside
  strict,  // treat out-of-bounds as a schema violation
};

struct LayoutGenOptions {
  std::string chat_model = "mock-chat";
  int id_base = 301;
  OutOfBoundsPolicy oob = OutOfBoundsPolicy::pass;
  double temperature = 0.0;
};

namespace detail {

inline std::string bullets_block(const ContentPlan& plan) {
  std::ostringstream out;
  for (std::size_t i = 0; i < plan.bullets.size(); ++i)
    out << "- " << plan.bullets[i] << "\n";
  if (plan.bullets.empty()) out << "(none)\n";
  return out.str();
}

inline std::string plan_figures_block(const ContentPlan& plan, const Paper& paper) {
  if (plan.selected_figures.empty()) return "(none)\n";
  std::ostringstream out;
  for (const auto& id : plan.selected_figures) {
    const FigureAsset* asset = paper.find_figure(id);
    out << "- " << id;
    if (asset) {
      out << ": " << asset->label << " — " << asset->caption;
      if (asset->natural_size)
        out << " (natural size " << asset->natural_size->width << "x"
            << asset->natural_size->height << "pt)";
    }
    out << "\n";
  }
  return out.str();
}

inline std::string demonstrations_block(const SlideTask& task) {
  if (!task.prev_slide && !task.next_slide) return "";
  std::ostringstream out;
  out << "\nDemonstration slides (mimic their layout style):\n";
  if (task.prev_slide)
    out << "Previous slide layout:\n" << slide_to_json(*task.prev_slide).dump(2) << "\n";
  if (task.next_slide)
    out << "Next slide layout:\n" << slide_to_json(*task.next_slide).dump(2) << "\n";
  return out.str();
}

/// Reading order: top-to-bottom, then left-to-right, stable on parse order.
inline void normalize_element_ids(std::vector<Element>& elements, int id_base) {
  std::stable_sort(elements.begin(), elements.end(), [](const Element& a, const Element& b) {
    if (a.bounds.top != b.bounds.top) return a.bounds.top < b.bounds.top;
    return a.bounds.left < b.bounds.left;
  });
  for (std::size_t i = 0; i < elements.size(); ++i)
    elements[i].id = id_base + static_cast<int>(i);
}

inline std::optional<std::string> check_layout_covers_plan(const SlideSpec& spec,
                                                           const ContentPlan& plan) {
  std::vector<std::string> wanted_bullets = plan.bullets;
  std::vector<std::string> wanted_figures = plan.selected_figures;
  int titles = 0;
  for (const auto& e : spec.elements) {
    switch (e.kind) {
      case ElementKind::title: {
        ++titles;
        if (!e.text || *e.text != plan.slide_title)
          return "title element must carry the plan's slide_title verbatim";
        break;
      }
      case ElementKind::body: {
        if (!e.text) return "body element missing text";
        const auto it = std::find(wanted_bullets.begin(), wanted_bullets.end(), *e.text);
        if (it == wanted_bullets.end())
          return "body element text does not match any remaining plan bullet: '" + *e.text + "'";
        wanted_bullets.erase(it);
        break;
      }
      case ElementKind::image: {
        if (!e.image_ref) return "image element missing image_ref";
        const auto it = std::find(wanted_figures.begin(), wanted_figures.end(), *e.image_ref);
        if (it == wanted_figures.end())
          return "image element references '" + *e.image_ref +
                 "', which is not a remaining selected figure";
        wanted_figures.erase(it);
        break;
      }
    }
  }
  if (titles != 1) return "layout must contain exactly one title element";
  if (!wanted_bullets.empty()) return "plan bullet not placed: '" + wanted_bullets.front() + "'";
  if (!wanted_figures.empty())
    return "selected figure not placed: '" + wanted_figures.front() + "'";
  return std::nullopt;
}

}  // namespace detail

/// Drafts the initial layout for a content plan, with neighbor slides as
/// style demonstrations. Element ids are normalized to consecutive integers
/// from id_base in reading order. Out-of-bounds handling follows the policy;
/// the default leaves defects for the verify loop.
inline SlideSpec generate_initial_layout(const ContentPlan& plan, const SlideTask& task,
                                         const PromptLibrary& prompts, Transport& transport,
                                         const LayoutGenOptions& options = {},
                                         std::vector<PromptSnapshot>* snapshots = nullptr) {
  std::ostringstream width, height;
  width << task.deck_geometry.width;
  height << task.deck_geometry.height;
  const std::string rendered = render_template(
      prompts.prompt("initial_layout"),
      {{"width", width.str()},
       {"height", height.str()},
       {"title", plan.slide_title},
       {"bullets", detail::bullets_block(plan)},
       {"figures", detail::plan_figures_block(plan, task.paper)},
       {"demonstrations", detail::demonstrations_block(task)},
       {"id_base", std::to_string(options.id_base)}});
  if (snapshots) snapshots->push_back({"initial_layout", rendered});

  ChatRequest req;
  req.model = options.chat_model;
  req.temperature = options.temperature;
  req.reply_schema = "layout_elements";
  req.messages = {{"user", rendered, std::nullopt}};

  enum class FailureLayer { schema, layout };
  FailureLayer last_failure = FailureLayer::schema;
  const ReplyValidator& base = builtin_reply_schemas().at("layout_elements");
  auto build_spec = [&](const json& j) {
    SlideSpec spec;
    spec.geometry = task.deck_geometry;
    for (const auto& e : j.at("elements"))
      spec.elements.push_back(element_from_json(e, "layout reply"));
    detail::normalize_element_ids(spec.elements, options.id_base);
    return spec;
  };
  ReplyValidator validator = [&](const json& j) -> std::optional<std::string> {
    last_failure = FailureLayer::schema;
    if (auto err = base(j)) return err;
    SlideSpec spec;
    try {
      spec = build_spec(j);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    last_failure = FailureLayer::layout;
    const auto violations = validate(spec);
    if (!violations.empty()) return violations.front().message;
    if (auto err = detail::check_layout_covers_plan(spec, plan)) return err;
    if (options.oob == OutOfBoundsPolicy::strict) {
      for (const auto& e : spec.elements)
        if (!within_slide(e.bounds, spec.geometry))
          return "element " + std::to_string(e.id) + " exceeds the slide bounds";
    }
    return std::nullopt;
  };

  json reply;
  try {
    reply = complete(req, transport, validator);
  } catch (const SchemaError& e) {
    if (last_failure == FailureLayer::layout)
      throw LayoutValidationError(std::string("layout reply kept violating constraints: ") +
                                  e.what());
    throw;
  }

  SlideSpec spec = build_spec(reply);
  if (options.oob == OutOfBoundsPolicy::clamp) {
    for (auto& e : spec.elements) {
      if (!within_slide(e.bounds, spec.geometry)) {
        if (auto clamped = clamp_into(e.bounds, spec.geometry)) e.bounds = *clamped;
      }
    }
  }
  return spec;
}

}  // namespace slidegen

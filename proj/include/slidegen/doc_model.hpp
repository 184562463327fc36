#pragma once

#include <filesystem>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "slidegen/json_io.hpp"
#include "slidegen/layout_core.hpp"

namespace slidegen {

struct Section {
  std::string id;
  int index = 0;  // document order
  std::string heading;
  std::string text;  // plain text, paragraphs separated by blank lines
  bool operator==(const Section&) const = default;
};

enum class FigureKind { figure, table };

inline const char* to_string(FigureKind k) {
  return k == FigureKind::figure ? "figure" : "table";
}

struct FigureSize {
  double width = 0.0;  // points
  double height = 0.0;
  bool operator==(const FigureSize&) const = default;
};

struct FigureAsset {
  std::string id;
  FigureKind kind = FigureKind::figure;
  std::string label;  // e.g. "Figure 1"
  std::string caption;
  std::optional<std::string> image_path;
  std::optional<FigureSize> natural_size;
  bool operator==(const FigureAsset&) const = default;
};

struct Paper {
  std::string id;
  std::string title;
  std::vector<Section> sections;  // document order
  std::vector<FigureAsset> figures;

  const Section* find_section(const std::string& section_id) const {
    for (const auto& s : sections)
      if (s.id == section_id) return &s;
    return nullptr;
  }
  const FigureAsset* find_figure_by_label(const std::string& label) const {
    for (const auto& f : figures)
      if (f.label == label) return &f;
    return nullptr;
  }
  const FigureAsset* find_figure(const std::string& asset_id) const {
    for (const auto& f : figures)
      if (f.id == asset_id) return &f;
    return nullptr;
  }

  bool operator==(const Paper&) const = default;
};

struct SlideTask {
  Paper paper;
  std::string topic;
  std::optional<SlideSpec> prev_slide;
  std::optional<SlideSpec> next_slide;
  SlideGeometry deck_geometry{};
  bool allow_no_context = false;
};

inline void validate_task(const SlideTask& task) {
  if (task.topic.empty()) throw ValidationError("slide topic must not be empty");
  if (!task.prev_slide && !task.next_slide && !task.allow_no_context)
    throw ValidationError(
        "task has neither surrounding slide; pass the explicit no-context flag to proceed");
}

template <typename T>
struct Loaded {
  T value;
  std::vector<std::string> warnings;
};

inline const std::regex& figure_label_pattern() {
  static const std::regex re("(Figure|Table) [1-9][0-9]*");
  return re;
}

inline void validate_paper(const Paper& paper, const std::string& where) {
  if (paper.sections.empty()) throw ValidationError(where + ": paper has no sections");
  std::set<std::string> section_ids;
  int prev_index = -1;
  for (const auto& s : paper.sections) {
    if (!section_ids.insert(s.id).second)
      throw ValidationError(where + ": duplicate section id '" + s.id + "'");
    if (s.index <= prev_index)
      throw ValidationError(where + ": section '" + s.id +
                            "' index must be strictly increasing in document order");
    prev_index = s.index;
    if (s.text.empty())
      throw ValidationError(where + ": section '" + s.id + "' has empty text");
  }
  std::set<std::string> labels;
  std::set<std::string> figure_ids;
  for (const auto& f : paper.figures) {
    if (!figure_ids.insert(f.id).second)
      throw ValidationError(where + ": duplicate figure id '" + f.id + "'");
    if (!labels.insert(f.label).second)
      throw ValidationError(where + ": duplicate figure label '" + f.label + "'");
    if (!std::regex_match(f.label, figure_label_pattern()))
      throw ValidationError(where + ": figure '" + f.id + "' label '" + f.label +
                            "' does not match \"(Figure|Table) <positive integer>\"");
    if (f.image_path && !f.natural_size)
      throw ValidationError(where + ": figure '" + f.id +
                            "' has image_path but no natural_size");
  }
}

// ---------------------------------------------------------------------------
// Paper JSON

inline Paper paper_from_json(const json& doc, const std::string& where,
                             std::vector<std::string>* warnings = nullptr) {
  if (!doc.is_object()) throw ParseError(where + ": paper document must be a JSON object");
  jio::warn_unknown_keys(doc, {"id", "title", "sections", "figures"}, where, warnings);
  Paper paper;
  paper.id = jio::require_string(doc, "id", where);
  paper.title = jio::require_string(doc, "title", where);
  const json& sections = jio::require(doc, "sections", where);
  if (!sections.is_array()) throw ParseError(where + ": 'sections' must be an array");
  for (const auto& s : sections) {
    const std::string sec_where = where + " section " + std::to_string(paper.sections.size());
    jio::warn_unknown_keys(s, {"id", "index", "heading", "text"}, sec_where, warnings);
    Section section;
    section.id = jio::require_string(s, "id", sec_where);
    section.index = jio::require_int(s, "index", sec_where);
    if (section.index < 0) throw ParseError(sec_where + ": 'index' must be non-negative");
    section.heading = jio::require_string(s, "heading", sec_where);
    section.text = jio::require_string(s, "text", sec_where);
    paper.sections.push_back(std::move(section));
  }
  if (doc.contains("figures")) {
    const json& figures = doc.at("figures");
    if (!figures.is_array()) throw ParseError(where + ": 'figures' must be an array");
    for (const auto& f : figures) {
      const std::string fig_where = where + " figure " + std::to_string(paper.figures.size());
      jio::warn_unknown_keys(f, {"id", "kind", "label", "caption", "image_path", "natural_size"},
                             fig_where, warnings);
      FigureAsset asset;
      asset.id = jio::require_string(f, "id", fig_where);
      const std::string kind = jio::require_string(f, "kind", fig_where);
      if (kind == "figure")
        asset.kind = FigureKind::figure;
      else if (kind == "table")
        asset.kind = FigureKind::table;
      else
        throw ParseError(fig_where + ": 'kind' must be \"figure\" or \"table\"");
      asset.label = jio::require_string(f, "label", fig_where);
      asset.caption = jio::require_string(f, "caption", fig_where);
      if (f.contains("image_path")) asset.image_path = jio::require_string(f, "image_path", fig_where);
      if (f.contains("natural_size")) {
        const json& ns = f.at("natural_size");
        asset.natural_size = FigureSize{jio::require_number(ns, "width", fig_where),
                                        jio::require_number(ns, "height", fig_where)};
      }
      paper.figures.push_back(std::move(asset));
    }
  }
  validate_paper(paper, where);
  return paper;
}

inline json paper_to_json(const Paper& paper) {
  json sections = json::array();
  for (const auto& s : paper.sections)
    sections.push_back({{"id", s.id}, {"index", s.index}, {"heading", s.heading}, {"text", s.text}});
  json figures = json::array();
  for (const auto& f : paper.figures) {
    json fig = {{"id", f.id},
                {"kind", to_string(f.kind)},
                {"label", f.label},
                {"caption", f.caption}};
    if (f.image_path) fig["image_path"] = *f.image_path;
    if (f.natural_size)
      fig["natural_size"] = {{"width", f.natural_size->width}, {"height", f.natural_size->height}};
    figures.push_back(std::move(fig));
  }
  return {{"id", paper.id}, {"title", paper.title}, {"sections", sections}, {"figures", figures}};
}

inline Loaded<Paper> load_paper(const std::filesystem::path& path) {
  Loaded<Paper> out{{}, {}};
  out.value = paper_from_json(parse_json_file(path), path.string(), &out.warnings);
  return out;
}

inline void save_paper(const Paper& paper, const std::filesystem::path& path) {
  validate_paper(paper, path.string());
  write_json_file(path, paper_to_json(paper));
}

// ---------------------------------------------------------------------------
// Slide JSON

inline Element element_from_json(const json& e, const std::string& where,
                                 std::vector<std::string>* warnings = nullptr) {
  if (!e.is_object()) throw ParseError(where + ": element must be a JSON object");
  Element out;
  out.id = jio::require_int(e, "id", where);
  const std::string elem_where = where + " element " + std::to_string(out.id);
  jio::warn_unknown_keys(e, {"id", "kind", "bounds", "font", "text", "image_ref"}, elem_where,
                         warnings);
  const std::string kind = jio::require_string(e, "kind", elem_where);
  auto parsed_kind = element_kind_from_string(kind);
  if (!parsed_kind)
    throw ParseError(elem_where + ": 'kind' must be \"title\", \"body\" or \"image\"");
  out.kind = *parsed_kind;
  const json& bounds = jio::require(e, "bounds", elem_where);
  if (!bounds.is_array() || bounds.size() != 4 ||
      !std::all_of(bounds.begin(), bounds.end(), [](const json& v) { return v.is_number(); }))
    throw ParseError(elem_where + ": 'bounds' must be [left, top, right, bottom]");
  out.bounds = Rect{bounds[0].get<double>(), bounds[1].get<double>(), bounds[2].get<double>(),
                    bounds[3].get<double>()};
  if (e.contains("font")) {
    const json& f = e.at("font");
    jio::warn_unknown_keys(f, {"family", "size_pt", "bold", "color"}, elem_where + " font",
                           warnings);
    FontSpec font;
    font.family = jio::require_string(f, "family", elem_where + " font");
    font.size_pt = jio::require_number(f, "size_pt", elem_where + " font");
    if (f.contains("bold")) {
      if (!f.at("bold").is_boolean())
        throw ParseError(elem_where + " font: 'bold' must be a boolean");
      font.bold = f.at("bold").get<bool>();
    }
    if (f.contains("color")) {
      const json& c = f.at("color");
      if (!c.is_array() || c.size() != 3 ||
          !std::all_of(c.begin(), c.end(), [](const json& v) { return v.is_number_integer(); }))
        throw ParseError(elem_where + " font: 'color' must be [r, g, b]");
      font.color = RgbColor{c[0].get<int>(), c[1].get<int>(), c[2].get<int>()};
    }
    out.font = std::move(font);
  }
  if (e.contains("text")) {
    if (!e.at("text").is_string()) throw ParseError(elem_where + ": 'text' must be a string");
    out.text = e.at("text").get<std::string>();
  }
  if (e.contains("image_ref")) {
    if (!e.at("image_ref").is_string())
      throw ParseError(elem_where + ": 'image_ref' must be a string");
    out.image_ref = e.at("image_ref").get<std::string>();
  }
  return out;
}

inline json element_to_json(const Element& e) {
  json out = {{"id", e.id},
              {"kind", to_string(e.kind)},
              {"bounds", {e.bounds.left, e.bounds.top, e.bounds.right, e.bounds.bottom}}};
  if (e.font) {
    json font = {{"family", e.font->family}, {"size_pt", e.font->size_pt}};
    if (e.font->bold) font["bold"] = true;
    if (!(e.font->color == RgbColor{})) font["color"] = {e.font->color.r, e.font->color.g, e.font->color.b};
    out["font"] = std::move(font);
  }
  if (e.text) out["text"] = *e.text;
  if (e.image_ref) out["image_ref"] = *e.image_ref;
  return out;
}

inline SlideSpec slide_from_json(const json& doc, const std::string& where,
                                 std::vector<std::string>* warnings = nullptr,
                                 bool enforce_valid = true) {
  if (!doc.is_object()) throw ParseError(where + ": slide document must be a JSON object");
  jio::warn_unknown_keys(doc, {"geometry", "elements"}, where, warnings);
  SlideSpec spec;
  const json& geometry = jio::require(doc, "geometry", where);
  spec.geometry = SlideGeometry{jio::require_number(geometry, "width", where + " geometry"),
                                jio::require_number(geometry, "height", where + " geometry")};
  const json& elements = jio::require(doc, "elements", where);
  if (!elements.is_array()) throw ParseError(where + ": 'elements' must be an array");
  for (const auto& e : elements)
    spec.elements.push_back(element_from_json(e, where, warnings));
  if (enforce_valid) {
    auto violations = validate(spec);
    if (!violations.empty()) {
      std::string msg = where + ": slide fails validation:";
      for (const auto& v : violations) msg += "\n  - " + v.message;
      throw ValidationError(msg);
    }
  }
  return spec;
}

inline json slide_to_json(const SlideSpec& spec) {
  json elements = json::array();
  for (const auto& e : spec.elements) elements.push_back(element_to_json(e));
  return {{"geometry", {{"width", spec.geometry.width}, {"height", spec.geometry.height}}},
          {"elements", elements}};
}

inline Loaded<SlideSpec> load_slide(const std::filesystem::path& path) {
  Loaded<SlideSpec> out{{}, {}};
  out.value = slide_from_json(parse_json_file(path), path.string(), &out.warnings);
  return out;
}

/// Parses without enforcing hard invariants; the inspection commands use
/// this so a broken slide can still be reported on.
inline Loaded<SlideSpec> load_slide_lenient(const std::filesystem::path& path) {
  Loaded<SlideSpec> out{{}, {}};
  out.value = slide_from_json(parse_json_file(path), path.string(), &out.warnings, false);
  return out;
}

inline void save_slide(const SlideSpec& spec, const std::filesystem::path& path) {
  auto violations = validate(spec);
  if (!violations.empty()) {
    std::string msg = "refusing to save invalid slide to " + path.string() + ":";
    for (const auto& v : violations) msg += "\n  - " + v.message;
    throw ValidationError(msg);
  }
  write_json_file(path, slide_to_json(spec));
}

}  // namespace slidegen

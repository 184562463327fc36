#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "slidegen/errors.hpp"

namespace slidegen {

// All coordinates are in points (pt). Default deck geometry is 4:3,
// 10in x 7.5in at 72pt/in.
struct SlideGeometry {
  double width = 720.0;
  double height = 540.0;
  bool operator==(const SlideGeometry&) const = default;
};

struct Rect {
  double left = 0.0;
  double top = 0.0;
  double right = 0.0;
  double bottom = 0.0;

  double width() const { return right - left; }
  double height() const { return bottom - top; }
  double area() const { return width() * height(); }
  double center_x() const { return (left + right) / 2.0; }
  double center_y() const { return (top + bottom) / 2.0; }
  bool valid() const { return left < right && top < bottom; }

  Rect translated(double dx, double dy) const {
    return {left + dx, top + dy, right + dx, bottom + dy};
  }

  bool operator==(const Rect&) const = default;
};

struct RgbColor {
  int r = 0;
  int g = 0;
  int b = 0;
  bool operator==(const RgbColor&) const = default;
};

inline constexpr double kMinFontPt = 6.0;
inline constexpr double kMaxFontPt = 96.0;
inline constexpr double kLineHeightFactor = 1.2;
inline constexpr double kAvgGlyphWidthFactor = 0.5;

struct FontSpec {
  std::string family = "Helvetica";
  double size_pt = 18.0;
  bool bold = false;
  RgbColor color{};
  bool operator==(const FontSpec&) const = default;
};

enum class ElementKind { title, body, image };

inline const char* to_string(ElementKind k) {
  switch (k) {
    case ElementKind::title: return "title";
    case ElementKind::body: return "body";
    case ElementKind::image: return "image";
  }
  return "body";
}

inline std::optional<ElementKind> element_kind_from_string(const std::string& s) {
  if (s == "title") return ElementKind::title;
  if (s == "body") return ElementKind::body;
  if (s == "image") return ElementKind::image;
  return std::nullopt;
}

struct Element {
  int id = 0;
  ElementKind kind = ElementKind::body;
  Rect bounds{};
  std::optional<FontSpec> font;
  std::optional<std::string> text;
  std::optional<std::string> image_ref;

  bool is_text() const { return kind == ElementKind::title || kind == ElementKind::body; }
  bool operator==(const Element&) const = default;
};

struct SlideSpec {
  SlideGeometry geometry{};
  std::vector<Element> elements;

  const Element* find(int id) const {
    for (const auto& e : elements)
      if (e.id == id) return &e;
    return nullptr;
  }
  Element* find(int id) {
    for (auto& e : elements)
      if (e.id == id) return &e;
    return nullptr;
  }

  bool operator==(const SlideSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Typed edits

inline constexpr double kMinScaleFactor = 0.1;
inline constexpr double kMaxScaleFactor = 10.0;

struct MoveEdit {
  double dx = 0.0;
  double dy = 0.0;
  bool operator==(const MoveEdit&) const = default;
};

// Scale anchor is the top-left corner for text boxes and the center for
// images; images keep their aspect ratio via the geometric-mean factor.
struct ScaleBoxEdit {
  double fx = 1.0;
  double fy = 1.0;
  bool operator==(const ScaleBoxEdit&) const = default;
};

struct SetBoundsEdit {
  Rect rect{};
  bool operator==(const SetBoundsEdit&) const = default;
};

struct FontDeltaEdit {
  double delta_pt = 0.0;
  bool operator==(const FontDeltaEdit&) const = default;
};

enum class RectEdge { left, top, right, bottom };

inline const char* to_string(RectEdge e) {
  switch (e) {
    case RectEdge::left: return "left";
    case RectEdge::top: return "top";
    case RectEdge::right: return "right";
    case RectEdge::bottom: return "bottom";
  }
  return "left";
}

struct AlignToEdit {
  RectEdge edge = RectEdge::left;
  double coordinate = 0.0;
  bool operator==(const AlignToEdit&) const = default;
};

using EditAction = std::variant<MoveEdit, ScaleBoxEdit, SetBoundsEdit, FontDeltaEdit, AlignToEdit>;

struct Edit {
  int target_id = 0;
  EditAction action{MoveEdit{}};
  bool operator==(const Edit&) const = default;
};

inline const char* action_name(const EditAction& a) {
  struct Visitor {
    const char* operator()(const MoveEdit&) const { return "move"; }
    const char* operator()(const ScaleBoxEdit&) const { return "scale_box"; }
    const char* operator()(const SetBoundsEdit&) const { return "set_bounds"; }
    const char* operator()(const FontDeltaEdit&) const { return "font_delta"; }
    const char* operator()(const AlignToEdit&) const { return "align_to"; }
  };
  return std::visit(Visitor{}, a);
}

// ---------------------------------------------------------------------------
// Findings

enum class FindingKind {
  overlap,
  out_of_bounds,
  text_overflow,
  misalignment,
  font_inconsistency,
  title_hierarchy,
  image_distortion,
  composition_balance,
};

inline const char* to_string(FindingKind k) {
  switch (k) {
    case FindingKind::overlap: return "overlap";
    case FindingKind::out_of_bounds: return "out_of_bounds";
    case FindingKind::text_overflow: return "text_overflow";
    case FindingKind::misalignment: return "misalignment";
    case FindingKind::font_inconsistency: return "font_inconsistency";
    case FindingKind::title_hierarchy: return "title_hierarchy";
    case FindingKind::image_distortion: return "image_distortion";
    case FindingKind::composition_balance: return "composition_balance";
  }
  return "overlap";
}

enum class Severity { error, warning };

inline const char* to_string(Severity s) {
  return s == Severity::error ? "error" : "warning";
}

struct Finding {
  std::vector<int> element_ids;
  FindingKind kind = FindingKind::overlap;
  Severity severity = Severity::error;
  std::optional<Edit> suggested_edit;
  std::string note;
  bool operator==(const Finding&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::vector<int> element_ids;
  std::string message;
  bool operator==(const Violation&) const = default;
};

/// Hard invariant check; violations are data, not exceptions.
inline std::vector<Violation> validate(const SlideSpec& spec) {
  std::vector<Violation> out;
  if (spec.geometry.width <= 0 || spec.geometry.height <= 0)
    out.push_back({{}, "slide geometry must have positive width and height"});
  std::vector<int> seen;
  for (const auto& e : spec.elements) {
    if (std::find(seen.begin(), seen.end(), e.id) != seen.end()) {
      out.push_back({{e.id}, "duplicate element id " + std::to_string(e.id)});
    }
    seen.push_back(e.id);
    if (!(e.bounds.left < e.bounds.right))
      out.push_back({{e.id}, "element " + std::to_string(e.id) + ": left must be < right"});
    if (!(e.bounds.top < e.bounds.bottom))
      out.push_back({{e.id}, "element " + std::to_string(e.id) + ": top must be < bottom"});
    if (e.is_text()) {
      if (!e.text)
        out.push_back({{e.id}, "text element " + std::to_string(e.id) + " is missing text"});
      if (!e.font)
        out.push_back({{e.id}, "text element " + std::to_string(e.id) + " is missing font"});
    }
    if (e.kind == ElementKind::image && !e.image_ref)
      out.push_back({{e.id}, "image element " + std::to_string(e.id) + " is missing image_ref"});
    if (e.font && !(e.font->size_pt >= kMinFontPt && e.font->size_pt <= kMaxFontPt))
      out.push_back({{e.id}, "element " + std::to_string(e.id) + ": font size " +
                                 std::to_string(e.font->size_pt) + " outside [6, 96]"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometric predicates

struct OverlapResult {
  bool overlapping = false;
  double area = 0.0;
};

/// True iff the interiors intersect; rects sharing only an edge do not overlap.
inline OverlapResult rects_overlap(const Rect& a, const Rect& b) {
  const double w = std::min(a.right, b.right) - std::max(a.left, b.left);
  const double h = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
  if (w <= 0.0 || h <= 0.0) return {};
  return {true, w * h};
}

/// Boundary-inclusive containment in the slide.
inline bool within_slide(const Rect& r, const SlideGeometry& g) {
  return r.left >= 0.0 && r.top >= 0.0 && r.right <= g.width && r.bottom <= g.height;
}

struct TextExtent {
  int lines = 0;
  double required_height = 0.0;
  bool operator==(const TextExtent&) const = default;
};

inline std::size_t count_codepoints(const std::string& text) {
  std::size_t n = 0;
  for (unsigned char c : text)
    if ((c & 0xC0) != 0x80) ++n;  // skip UTF-8 continuation bytes
  return n;
}

/// Font-file-free extent heuristic: average glyph width 0.5*size_pt,
/// line height 1.2*size_pt.
inline TextExtent estimate_text_extent(const std::string& text, const FontSpec& font,
                                       double box_width) {
  if (box_width <= 0.0)
    throw DegenerateBox("text box width must be positive, got " + std::to_string(box_width));
  const double char_width = kAvgGlyphWidthFactor * font.size_pt;
  const int chars_per_line = static_cast<int>(std::floor(box_width / char_width));
  if (chars_per_line < 1)
    throw DegenerateBox("text box narrower than one character (" + std::to_string(box_width) +
                        "pt at font size " + std::to_string(font.size_pt) + ")");
  const std::size_t chars = count_codepoints(text);
  if (chars == 0) return {0, 0.0};
  const int lines =
      static_cast<int>((chars + static_cast<std::size_t>(chars_per_line) - 1) /
                       static_cast<std::size_t>(chars_per_line));
  return {lines, lines * kLineHeightFactor * font.size_pt};
}

/// Estimated characters per line for a box width, shared with the renderer.
inline int chars_per_line(const FontSpec& font, double box_width) {
  return static_cast<int>(std::floor(box_width / (kAvgGlyphWidthFactor * font.size_pt)));
}

/// Minimal translation that brings r inside g, or nullopt if r cannot fit.
inline std::optional<Rect> clamp_into(const Rect& r, const SlideGeometry& g) {
  if (r.width() > g.width || r.height() > g.height) return std::nullopt;
  double dx = 0.0, dy = 0.0;
  if (r.left < 0.0)
    dx = -r.left;
  else if (r.right > g.width)
    dx = g.width - r.right;
  if (r.top < 0.0)
    dy = -r.top;
  else if (r.bottom > g.height)
    dy = g.height - r.bottom;
  return r.translated(dx, dy);
}

// ---------------------------------------------------------------------------
// Edit application

enum class EditStatus { applied, skipped_infeasible };

struct EditOutcome {
  std::size_t index = 0;
  int target_id = 0;
  EditStatus status = EditStatus::applied;
  bool clamped = false;
  std::string detail;
};

struct ApplyResult {
  SlideSpec spec;
  std::vector<EditOutcome> outcomes;
};

namespace detail {

inline std::optional<std::string> check_edit(const EditAction& action) {
  if (const auto* s = std::get_if<ScaleBoxEdit>(&action)) {
    const bool ok = s->fx > kMinScaleFactor && s->fx < kMaxScaleFactor &&
                    s->fy > kMinScaleFactor && s->fy < kMaxScaleFactor;
    if (!ok) return std::string("scale factors must lie in (0.1, 10)");
  }
  if (const auto* s = std::get_if<SetBoundsEdit>(&action)) {
    if (!s->rect.valid()) return std::string("set_bounds rect must satisfy left<right, top<bottom");
  }
  return std::nullopt;
}

inline Rect scaled_bounds(const Element& e, const ScaleBoxEdit& s) {
  const Rect& r = e.bounds;
  if (e.kind == ElementKind::image) {
    // Aspect-preserving: geometric mean when the axes disagree, center anchor.
    const double f = (s.fx == s.fy) ? s.fx : std::sqrt(s.fx * s.fy);
    const double hw = r.width() * f / 2.0;
    const double hh = r.height() * f / 2.0;
    return {r.center_x() - hw, r.center_y() - hh, r.center_x() + hw, r.center_y() + hh};
  }
  return {r.left, r.top, r.left + r.width() * s.fx, r.top + r.height() * s.fy};
}

}  // namespace detail

/// Applies edits sequentially; later edits see earlier results. After each
/// edit the target element is translated minimally back inside the slide.
/// An edit whose result cannot fit the slide is reverted and reported as
/// skipped. Untouched elements and fields are returned unmodified.
inline ApplyResult apply_edits(const SlideSpec& spec, const std::vector<Edit>& edits) {
  ApplyResult result{spec, {}};
  for (std::size_t i = 0; i < edits.size(); ++i) {
    const Edit& edit = edits[i];
    Element* target = result.spec.find(edit.target_id);
    if (!target)
      throw UnknownTarget("edit " + std::to_string(i) + " targets unknown element id " +
                          std::to_string(edit.target_id));
    if (auto err = detail::check_edit(edit.action))
      throw ValidationError("edit " + std::to_string(i) + " on element " +
                            std::to_string(edit.target_id) + ": " + *err);

    EditOutcome outcome{i, edit.target_id, EditStatus::applied, false, {}};
    const Element before = *target;

    struct Apply {
      Element& e;
      EditOutcome& out;
      void operator()(const MoveEdit& m) { e.bounds = e.bounds.translated(m.dx, m.dy); }
      void operator()(const ScaleBoxEdit& s) { e.bounds = detail::scaled_bounds(e, s); }
      void operator()(const SetBoundsEdit& s) { e.bounds = s.rect; }
      void operator()(const AlignToEdit& a) {
        double dx = 0.0, dy = 0.0;
        switch (a.edge) {
          case RectEdge::left: dx = a.coordinate - e.bounds.left; break;
          case RectEdge::right: dx = a.coordinate - e.bounds.right; break;
          case RectEdge::top: dy = a.coordinate - e.bounds.top; break;
          case RectEdge::bottom: dy = a.coordinate - e.bounds.bottom; break;
        }
        e.bounds = e.bounds.translated(dx, dy);
      }
      void operator()(const FontDeltaEdit& d) {
        if (!e.font) {
          out.status = EditStatus::skipped_infeasible;
          out.detail = "element has no font";
          return;
        }
        const double requested = e.font->size_pt + d.delta_pt;
        const double clamped = std::clamp(requested, kMinFontPt, kMaxFontPt);
        if (clamped != requested) {
          out.clamped = true;
          out.detail = "font size clamped to [6, 96]";
        }
        e.font->size_pt = clamped;
      }
    };
    std::visit(Apply{*target, outcome}, edit.action);

    if (outcome.status == EditStatus::skipped_infeasible) {
      *target = before;
      result.outcomes.push_back(std::move(outcome));
      continue;
    }

    if (!within_slide(target->bounds, result.spec.geometry)) {
      auto clamped = clamp_into(target->bounds, result.spec.geometry);
      if (!clamped) {
        *target = before;
        outcome.status = EditStatus::skipped_infeasible;
        outcome.detail = "element larger than slide after edit";
        result.outcomes.push_back(std::move(outcome));
        continue;
      }
      target->bounds = *clamped;
      outcome.clamped = true;
    }
    result.outcomes.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace slidegen

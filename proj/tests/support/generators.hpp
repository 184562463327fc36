#pragma once

// Deterministic random generators shared by the unit and acceptance suites.

#include <random>
#include <string>
#include <vector>

#include "slidegen/layout_core.hpp"

namespace testsupport {

inline std::string random_text(std::mt19937& rng, int length) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz    ";
  std::uniform_int_distribution<int> pick(0, static_cast<int>(sizeof(alphabet)) - 2);
  std::string out;
  out.reserve(length);
  for (int i = 0; i < length; ++i) out += alphabet[pick(rng)];
  return out;
}

// ---------------------------------------------------------------------------
// Grid-aligned clean specs for the seeded-defect suites.
//
// Geometry 720x540, 36pt grid. Title spans the top; body elements sit in two
// symmetric columns (left 36, right 396), width 288, height 72, rows at
// 108/180/252. The bottom band (396+) stays empty so defect fixes always
// have room. Construction keeps the geometric reviewer silent: everything on
// grid, one font family, title above body sizes, balanced columns.

struct CleanSpecLayout {
  slidegen::SlideSpec spec;
  std::vector<int> left_column_ids;   // top-to-bottom
  std::vector<int> right_column_ids;  // top-to-bottom
};

inline CleanSpecLayout random_clean_spec(std::mt19937& rng) {
  using namespace slidegen;
  CleanSpecLayout out;
  out.spec.geometry = {720, 540};

  Element title;
  title.id = 301;
  title.kind = ElementKind::title;
  title.bounds = {36, 36, 684, 90};
  title.font = FontSpec{"Helvetica", 28, true, {20, 20, 20}};
  title.text = "Topic " + std::to_string(rng() % 100);
  out.spec.elements.push_back(title);

  std::uniform_int_distribution<int> rows_dist(1, 3);
  const int rows = rows_dist(rng);  // same count per column keeps the balance centered
  std::uniform_int_distribution<int> text_len(20, 90);
  int next_id = 302;
  for (int col = 0; col < 2; ++col) {
    const double left = col == 0 ? 36.0 : 396.0;
    for (int row = 0; row < rows; ++row) {
      const double top = 108.0 + 72.0 * row;
      Element body;
      body.id = next_id++;
      body.kind = ElementKind::body;
      body.bounds = {left, top, left + 288.0, top + 72.0};
      body.font = FontSpec{"Helvetica", 18, false, {}};
      body.text = random_text(rng, text_len(rng));
      out.spec.elements.push_back(body);
      (col == 0 ? out.left_column_ids : out.right_column_ids).push_back(body.id);
    }
  }
  return out;
}

enum class DefectKind { overlap, out_of_bounds, text_overflow };

struct SeededDefect {
  slidegen::SlideSpec spec;
  DefectKind kind = DefectKind::overlap;
  std::vector<int> expected_ids;  // every id the reviewer must name
};

inline SeededDefect inject_defect(std::mt19937& rng, DefectKind kind) {
  using namespace slidegen;
  for (;;) {
    CleanSpecLayout layout = random_clean_spec(rng);
    SlideSpec& spec = layout.spec;
    SeededDefect out;
    out.kind = kind;

    switch (kind) {
      case DefectKind::overlap: {
        // Needs two vertically adjacent bodies in one column; slide the lower
        // one up so the interiors intersect. Offsets in [13, 23] keep every
        // edge well clear of the 4/12pt alignment bands.
        if (layout.left_column_ids.size() < 2) continue;  // redraw a spec with more rows
        const auto& column =
            rng() % 2 == 0 ? layout.left_column_ids : layout.right_column_ids;
        std::uniform_int_distribution<std::size_t> row_pick(0, column.size() - 2);
        const std::size_t upper_index = row_pick(rng);
        const int upper_id = column[upper_index];
        const int lower_id = column[upper_index + 1];
        std::uniform_int_distribution<int> offset(13, 23);
        Element* lower = spec.find(lower_id);
        const double dy = -offset(rng);
        lower->bounds = lower->bounds.translated(0, dy);
        out.expected_ids = {upper_id, lower_id};
        break;
      }
      case DefectKind::out_of_bounds: {
        // Push one body below the bottom edge; the bottom band is empty so
        // the clamp lands on the 468 grid row without new collisions.
        const auto& column = rng() % 2 == 0 ? layout.left_column_ids : layout.right_column_ids;
        std::uniform_int_distribution<std::size_t> pick(0, column.size() - 1);
        const int id = column[pick(rng)];
        std::uniform_int_distribution<int> spill(13, 23);
        Element* e = spec.find(id);
        const double new_top = 468.0 + spill(rng);
        e->bounds = {e->bounds.left, new_top, e->bounds.right, new_top + 72.0};
        out.expected_ids = {id};
        break;
      }
      case DefectKind::text_overflow: {
        // Lengthen the text of a column's bottom-most body; growth below it
        // stays inside the slide and meets no neighbor.
        const auto& column = rng() % 2 == 0 ? layout.left_column_ids : layout.right_column_ids;
        const int id = column.back();
        std::uniform_int_distribution<int> text_len(97, 192);  // 4..6 wrapped lines
        Element* e = spec.find(id);
        e->text = random_text(rng, text_len(rng));
        out.expected_ids = {id};
        break;
      }
    }
    out.spec = spec;
    return out;
  }
}

// ---------------------------------------------------------------------------
// Unconstrained-but-fitting specs and arbitrary edit lists for the boundary
// safety property.

inline slidegen::SlideSpec random_fitting_spec(std::mt19937& rng) {
  using namespace slidegen;
  SlideSpec spec;
  spec.geometry = {720, 540};
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_real_distribution<double> pos_x(-150.0, 800.0);
  std::uniform_real_distribution<double> pos_y(-150.0, 650.0);
  std::uniform_real_distribution<double> width(10.0, 700.0);
  std::uniform_real_distribution<double> height(10.0, 520.0);
  std::uniform_real_distribution<double> font_size(6.0, 96.0);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    Element e;
    e.id = 301 + i;
    const int kind = static_cast<int>(rng() % 3);
    e.kind = kind == 0 ? ElementKind::title : (kind == 1 ? ElementKind::body : ElementKind::image);
    e.bounds.left = pos_x(rng);
    e.bounds.top = pos_y(rng);
    e.bounds.right = e.bounds.left + width(rng);
    e.bounds.bottom = e.bounds.top + height(rng);
    if (e.kind == ElementKind::image) {
      e.image_ref = "fig-" + std::to_string(i);
    } else {
      e.font = FontSpec{"Helvetica", font_size(rng), false, {}};
      e.text = random_text(rng, 1 + static_cast<int>(rng() % 60));
    }
    spec.elements.push_back(std::move(e));
  }
  return spec;
}

inline std::vector<slidegen::Edit> random_edits(std::mt19937& rng,
                                                const slidegen::SlideSpec& spec) {
  using namespace slidegen;
  std::vector<Edit> edits;
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_int_distribution<std::size_t> pick(0, spec.elements.size() - 1);
  std::uniform_real_distribution<double> delta(-800.0, 800.0);
  std::uniform_real_distribution<double> factor(0.2, 5.0);
  std::uniform_real_distribution<double> coord(-150.0, 800.0);
  std::uniform_real_distribution<double> extent(10.0, 900.0);
  std::uniform_real_distribution<double> font_delta(-30.0, 30.0);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const int target = spec.elements[pick(rng)].id;
    switch (rng() % 5) {
      case 0: edits.push_back({target, MoveEdit{delta(rng), delta(rng)}}); break;
      case 1: edits.push_back({target, ScaleBoxEdit{factor(rng), factor(rng)}}); break;
      case 2: {
        Rect r;
        r.left = coord(rng);
        r.top = coord(rng);
        r.right = r.left + extent(rng);
        r.bottom = r.top + extent(rng);
        edits.push_back({target, SetBoundsEdit{r}});
        break;
      }
      case 3: edits.push_back({target, FontDeltaEdit{font_delta(rng)}}); break;
      default: {
        const RectEdge edges[4] = {RectEdge::left, RectEdge::top, RectEdge::right,
                                   RectEdge::bottom};
        edits.push_back({target, AlignToEdit{edges[rng() % 4], coord(rng)}});
        break;
      }
    }
  }
  return edits;
}

}  // namespace testsupport

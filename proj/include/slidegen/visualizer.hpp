#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "slidegen/doc_model.hpp"
#include "slidegen/layout_core.hpp"

namespace slidegen {

inline std::vector<RgbColor> default_palette() {
  return {{230, 25, 75},  {60, 180, 75},  {67, 99, 216},  {245, 130, 49},
          {145, 30, 180}, {66, 212, 244}, {240, 50, 230}, {154, 99, 36}};
}

struct RenderOptions {
  bool annotate = true;
  double scale = 2.0;  // pixels per point
  std::vector<RgbColor> palette = default_palette();
  bool allow_placeholders = true;  // gray box for unresolvable images
  bool raster_enabled = true;
};

inline RgbColor palette_color(const RenderOptions& opts, int element_id) {
  if (opts.palette.empty()) throw ValidationError("render palette must not be empty");
  const int n = static_cast<int>(opts.palette.size());
  return opts.palette[((element_id % n) + n) % n];
}

/// Figure assets addressable by element image_ref.
class FigureStore {
public:
  FigureStore() = default;
  explicit FigureStore(const Paper& paper) {
    for (const auto& f : paper.figures) assets_[f.id] = f;
  }
  const FigureAsset* resolve(const std::string& asset_id) const {
    const auto it = assets_.find(asset_id);
    return it == assets_.end() ? nullptr : &it->second;
  }

private:
  std::map<std::string, FigureAsset> assets_;
};

// ---------------------------------------------------------------------------
// Draw commands (consumed by the software rasterizer)

struct FillRectCmd {
  Rect px;
  RgbColor color;
};
struct StrokeRectCmd {
  Rect px;
  RgbColor color;
  int width_px = 2;
};
struct DigitsCmd {  // small bitmap digits, used for annotation IDs
  double x_px = 0, y_px = 0;
  RgbColor color;
  std::string digits;
  int pixel_size = 2;  // magnification of the 5x7 glyph grid
};
using DrawCmd = std::variant<FillRectCmd, StrokeRectCmd, DigitsCmd>;

struct VectorDoc {
  int width_px = 0;
  int height_px = 0;
  std::string svg;
  std::vector<DrawCmd> commands;
};

namespace vizdetail {

inline std::string hex_color(const RgbColor& c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r & 0xff, c.g & 0xff, c.b & 0xff);
  return buf;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Hard line break every chars_per_line codepoints, mirroring the extent
/// heuristic so rendered overflow matches what the geometric checker reports.
inline std::vector<std::string> wrap_text(const std::string& text, int chars_per_line) {
  std::vector<std::string> lines;
  if (text.empty()) return lines;
  if (chars_per_line < 1) return {text};
  std::string current;
  int count = 0;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = 1;
    const auto c = static_cast<unsigned char>(text[i]);
    if (c >= 0xF0)
      len = 4;
    else if (c >= 0xE0)
      len = 3;
    else if (c >= 0xC0)
      len = 2;
    current += text.substr(i, len);
    i += len;
    if (++count == chars_per_line) {
      lines.push_back(std::move(current));
      current.clear();
      count = 0;
    }
  }
  if (!current.empty()) lines.push_back(std::move(current));
  return lines;
}

}  // namespace vizdetail

/// Renders the spec to a deterministic SVG document plus the draw-command
/// list the rasterizer consumes. With annotate on, every element gets a
/// colored bounding box (palette color = id mod palette size) labeled with
/// its ID at the box's top-left.
inline VectorDoc render(const SlideSpec& spec, const FigureStore& assets,
                        const RenderOptions& opts) {
  using namespace vizdetail;
  if (opts.scale <= 0) throw ValidationError("render scale must be positive");
  if (opts.palette.empty()) throw ValidationError("render palette must not be empty");

  const double s = opts.scale;
  VectorDoc doc;
  doc.width_px = static_cast<int>(std::lround(spec.geometry.width * s));
  doc.height_px = static_cast<int>(std::lround(spec.geometry.height * s));

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << doc.width_px << "\" height=\""
      << doc.height_px << "\" viewBox=\"0 0 " << doc.width_px << " " << doc.height_px << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << doc.width_px << "\" height=\"" << doc.height_px
      << "\" fill=\"#ffffff\"/>\n";
  svg << "<g class=\"content\">\n";

  auto px = [s](const Rect& r) {
    return Rect{r.left * s, r.top * s, r.right * s, r.bottom * s};
  };

  for (const auto& e : spec.elements) {
    if (e.kind == ElementKind::image) {
      const FigureAsset* asset = e.image_ref ? assets.resolve(*e.image_ref) : nullptr;
      const Rect box = px(e.bounds);
      if (asset && asset->image_path) {
        svg << "<image x=\"" << fmt(box.left) << "\" y=\"" << fmt(box.top) << "\" width=\""
            << fmt(box.width()) << "\" height=\"" << fmt(box.height()) << "\" href=\""
            << escape_xml(*asset->image_path) << "\" preserveAspectRatio=\"none\"/>\n";
        doc.commands.push_back(FillRectCmd{box, {210, 210, 210}});
        doc.commands.push_back(StrokeRectCmd{box, {120, 120, 120}, 2});
      } else {
        if (!opts.allow_placeholders)
          throw AssetError("unresolvable image reference '" +
                           (e.image_ref ? *e.image_ref : std::string("<none>")) +
                           "' for element " + std::to_string(e.id));
        svg << "<rect x=\"" << fmt(box.left) << "\" y=\"" << fmt(box.top) << "\" width=\""
            << fmt(box.width()) << "\" height=\"" << fmt(box.height())
            << "\" fill=\"#d9d9d9\" stroke=\"#8c8c8c\" stroke-width=\"2\"/>\n";
        const std::string label = e.image_ref ? *e.image_ref : "missing image";
        svg << "<text x=\"" << fmt(box.left + 6 * s) << "\" y=\"" << fmt(box.top + 14 * s)
            << "\" font-family=\"monospace\" font-size=\"" << fmt(10 * s)
            << "\" fill=\"#595959\">" << escape_xml(label) << "</text>\n";
        doc.commands.push_back(FillRectCmd{box, {217, 217, 217}});
        doc.commands.push_back(StrokeRectCmd{box, {140, 140, 140}, 2});
      }
      continue;
    }

    if (!e.text || !e.font) continue;  // invalid text elements render as nothing
    const FontSpec& font = *e.font;
    const int cpl = chars_per_line(font, e.bounds.width());
    const auto lines = wrap_text(*e.text, cpl);
    const std::string fill = hex_color(font.color);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const double line_top = e.bounds.top + static_cast<double>(i) * kLineHeightFactor * font.size_pt;
      const double baseline = line_top + font.size_pt;
      svg << "<text x=\"" << fmt(e.bounds.left * s) << "\" y=\"" << fmt(baseline * s)
          << "\" font-family=\"" << escape_xml(font.family) << "\" font-size=\""
          << fmt(font.size_pt * s) << "\"";
      if (font.bold) svg << " font-weight=\"bold\"";
      svg << " fill=\"" << fill << "\">" << escape_xml(lines[i]) << "</text>\n";
      // Raster stand-in: one bar per line, width proportional to its fill.
      const double frac =
          cpl >= 1 ? std::min(1.0, static_cast<double>(count_codepoints(lines[i])) / cpl) : 1.0;
      const Rect bar{e.bounds.left, line_top + 0.2 * font.size_pt,
                     e.bounds.left + frac * e.bounds.width(), line_top + font.size_pt};
      doc.commands.push_back(FillRectCmd{px(bar), font.color});
    }
  }
  svg << "</g>\n";

  if (opts.annotate) {
    svg << "<g class=\"annotations\">\n";
    for (const auto& e : spec.elements) {
      const RgbColor color = palette_color(opts, e.id);
      const std::string stroke = hex_color(color);
      const Rect box = px(e.bounds);
      svg << "<g class=\"ann\" data-id=\"" << e.id << "\">";
      svg << "<rect x=\"" << fmt(box.left) << "\" y=\"" << fmt(box.top) << "\" width=\""
          << fmt(box.width()) << "\" height=\"" << fmt(box.height())
          << "\" fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"2\"/>";
      svg << "<text x=\"" << fmt(box.left + 3) << "\" y=\"" << fmt(box.top + 13)
          << "\" font-family=\"monospace\" font-size=\"12\" fill=\"" << stroke << "\">" << e.id
          << "</text>";
      svg << "</g>\n";
      doc.commands.push_back(StrokeRectCmd{box, color, 2});
      doc.commands.push_back(DigitsCmd{box.left + 3, box.top + 3, color, std::to_string(e.id), 2});
    }
    svg << "</g>\n";
  }

  svg << "</svg>\n";
  doc.svg = svg.str();
  return doc;
}

// ---------------------------------------------------------------------------
// Software rasterizer

struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  void set(int x, int y, const RgbColor& c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    rgb[i] = static_cast<std::uint8_t>(c.r);
    rgb[i + 1] = static_cast<std::uint8_t>(c.g);
    rgb[i + 2] = static_cast<std::uint8_t>(c.b);
  }

  /// Binary PPM (P6); portable and byte-deterministic.
  std::string to_ppm() const {
    std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
    return out;
  }
};

namespace vizdetail {

// 5x7 bitmap digits for annotation IDs in rasters.
inline const std::array<std::array<std::uint8_t, 7>, 10>& digit_font() {
  static const std::array<std::array<std::uint8_t, 7>, 10> font = {{
      {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
      {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
      {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
      {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
      {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
      {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
      {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
      {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
      {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
      {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
  }};
  return font;
}

inline void fill_rect(RasterImage& img, const Rect& px, const RgbColor& c) {
  const int x0 = std::max(0, static_cast<int>(std::floor(px.left)));
  const int y0 = std::max(0, static_cast<int>(std::floor(px.top)));
  const int x1 = std::min(img.width, static_cast<int>(std::ceil(px.right)));
  const int y1 = std::min(img.height, static_cast<int>(std::ceil(px.bottom)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) img.set(x, y, c);
}

inline void stroke_rect(RasterImage& img, const Rect& px, const RgbColor& c, int width) {
  fill_rect(img, {px.left, px.top, px.right, px.top + width}, c);
  fill_rect(img, {px.left, px.bottom - width, px.right, px.bottom}, c);
  fill_rect(img, {px.left, px.top, px.left + width, px.bottom}, c);
  fill_rect(img, {px.right - width, px.top, px.right, px.bottom}, c);
}

inline void draw_digits(RasterImage& img, const DigitsCmd& cmd) {
  double cursor = cmd.x_px;
  for (char ch : cmd.digits) {
    if (ch < '0' || ch > '9') {
      cursor += 6.0 * cmd.pixel_size;
      continue;
    }
    const auto& glyph = digit_font()[ch - '0'];
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (!(glyph[row] & (1 << (4 - col)))) continue;
        for (int dy = 0; dy < cmd.pixel_size; ++dy)
          for (int dx = 0; dx < cmd.pixel_size; ++dx)
            img.set(static_cast<int>(cursor) + col * cmd.pixel_size + dx,
                    static_cast<int>(cmd.y_px) + row * cmd.pixel_size + dy, cmd.color);
      }
    }
    cursor += 6.0 * cmd.pixel_size;
  }
}

}  // namespace vizdetail

/// Rasterizes the draw commands of a rendered document. Raster dimensions are
/// the slide geometry times scale, rounded to the nearest pixel.
inline RasterImage rasterize(const VectorDoc& doc, const RenderOptions& opts) {
  if (!opts.raster_enabled)
    throw RasterBackendUnavailable("rasterization disabled; vector output remains usable");
  RasterImage img;
  img.width = doc.width_px;
  img.height = doc.height_px;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0xFF);
  for (const auto& cmd : doc.commands) {
    if (const auto* fill = std::get_if<FillRectCmd>(&cmd))
      vizdetail::fill_rect(img, fill->px, fill->color);
    else if (const auto* stroke = std::get_if<StrokeRectCmd>(&cmd))
      vizdetail::stroke_rect(img, stroke->px, stroke->color, stroke->width_px);
    else if (const auto* digits = std::get_if<DigitsCmd>(&cmd))
      vizdetail::draw_digits(img, *digits);
  }
  return img;
}

}  // namespace slidegen

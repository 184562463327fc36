#include "slidegen/verify_loop.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <random>
#include <set>

#include "support/generators.hpp"
#include "support/golden.hpp"

using namespace slidegen;

namespace {

PromptLibrary prompts() { return PromptLibrary::load(testsupport::source_dir() / "assets"); }

SlideSpec clean_spec() {
  SlideSpec spec;
  spec.geometry = {720, 540};
  Element title;
  title.id = 301;
  title.kind = ElementKind::title;
  title.bounds = {36, 36, 684, 90};
  title.font = FontSpec{"Helvetica", 28, true, {}};
  title.text = "Findings";
  Element b1;
  b1.id = 302;
  b1.kind = ElementKind::body;
  b1.bounds = {36, 108, 684, 288};
  b1.font = FontSpec{"Helvetica", 18, false, {}};
  b1.text = "First takeaway holds across every benchmark we ran";
  Element b2;
  b2.id = 303;
  b2.kind = ElementKind::body;
  b2.bounds = {36, 324, 684, 468};
  b2.font = FontSpec{"Helvetica", 18, false, {}};
  b2.text = "Second takeaway survives ablation";
  spec.elements = {title, b1, b2};
  return spec;
}

}  // namespace

TEST_CASE("clean aligned spec reviews with zero findings") {
  auto spec = clean_spec();
  auto report = geometric_review(spec, spec.geometry);
  CHECK(report.findings.empty());
  CHECK(report.recommendations.empty());
}

TEST_CASE("overflowing text suggests the rounded-up height scale") {
  auto spec = clean_spec();
  // 100 chars at 18pt in a 200pt-wide, 80pt-tall box: needs 108pt.
  spec.elements[1].bounds = {36, 108, 236, 188};
  spec.elements[1].text = std::string(100, 'a');
  auto report = geometric_review(spec, spec.geometry);
  REQUIRE(report.findings.size() == 1);
  const Finding& f = report.findings[0];
  CHECK(f.kind == FindingKind::text_overflow);
  CHECK(f.severity == Severity::error);
  CHECK(f.element_ids == std::vector<int>{302});
  REQUIRE(f.suggested_edit.has_value());
  const auto* scale = std::get_if<ScaleBoxEdit>(&f.suggested_edit->action);
  REQUIRE(scale != nullptr);
  CHECK(scale->fy == Catch::Approx(1.4));  // 108/80 = 1.35, rounded up to one decimal
  REQUIRE(report.recommendations.size() == 1);
  CHECK(report.recommendations[0].recommendation ==
        "Increase text box height by 1.4x to fit overflowing text.");
}

TEST_CASE("out-of-bounds element gets the minimal translation back inside") {
  auto spec = clean_spec();
  spec.elements[2].bounds = {400, 400, 760, 500};  // right 760 on a 720 slide
  auto report = geometric_review(spec, spec.geometry);
  REQUIRE(report.findings.size() == 1);
  const Finding& f = report.findings[0];
  CHECK(f.kind == FindingKind::out_of_bounds);
  CHECK(f.element_ids == std::vector<int>{303});
  REQUIRE(f.suggested_edit.has_value());
  const auto* move = std::get_if<MoveEdit>(&f.suggested_edit->action);
  REQUIRE(move != nullptr);
  CHECK(move->dx == Catch::Approx(-40.0));
  CHECK(move->dy == 0.0);
}

TEST_CASE("interior overlap reports the pair and moves the later element") {
  auto spec = clean_spec();
  spec.elements[2].bounds = {36, 250, 684, 430};  // intrudes 38pt into body 302
  auto report = geometric_review(spec, spec.geometry);
  REQUIRE_FALSE(report.findings.empty());
  const Finding& f = report.findings[0];
  CHECK(f.kind == FindingKind::overlap);
  CHECK(f.element_ids == std::vector<int>{302, 303});
  REQUIRE(f.suggested_edit.has_value());
  CHECK(f.suggested_edit->target_id == 303);  // later in reading order
  CHECK(f.note.find("moving later element 303") != std::string::npos);
  const auto* move = std::get_if<MoveEdit>(&f.suggested_edit->action);
  REQUIRE(move != nullptr);
  CHECK(move->dy == Catch::Approx(38.0));  // push down to edge contact
}

TEST_CASE("edge-touching elements do not overlap") {
  auto spec = clean_spec();
  spec.elements[2].bounds = {36, 288, 684, 468};  // shares body 302's bottom edge
  auto report = geometric_review(spec, spec.geometry);
  for (const auto& f : report.findings) CHECK(f.kind != FindingKind::overlap);
}

TEST_CASE("misalignment inside the warn band suggests AlignTo the nearest guide") {
  auto spec = clean_spec();
  spec.elements[1].bounds = {44, 108, 692, 288};  // left 44: 8pt off the 36 grid line
  auto report = geometric_review(spec, spec.geometry);
  REQUIRE(report.findings.size() == 1);
  const Finding& f = report.findings[0];
  CHECK(f.kind == FindingKind::misalignment);
  CHECK(f.severity == Severity::warning);
  REQUIRE(f.suggested_edit.has_value());
  const auto* align = std::get_if<AlignToEdit>(&f.suggested_edit->action);
  REQUIRE(align != nullptr);
  CHECK(align->edge == RectEdge::left);
  CHECK(align->coordinate == Catch::Approx(36.0));

  // Within tolerance (<= 4pt) counts as aligned; far off (> 12pt) is free placement.
  spec.elements[1].bounds = {39, 108, 687, 288};
  CHECK(geometric_review(spec, spec.geometry).findings.empty());
  spec.elements[1].bounds = {56, 108, 704, 288};
  auto far_report = geometric_review(spec, spec.geometry);
  for (const auto& g : far_report.findings) CHECK(g.kind != FindingKind::misalignment);
}

TEST_CASE("title must out-size body text") {
  auto spec = clean_spec();
  spec.elements[0].font->size_pt = 16;  // body is 18
  auto report = geometric_review(spec, spec.geometry);
  REQUIRE(report.findings.size() == 1);
  const Finding& f = report.findings[0];
  CHECK(f.kind == FindingKind::title_hierarchy);
  CHECK(f.severity == Severity::warning);
  REQUIRE(f.suggested_edit.has_value());
  const auto* delta = std::get_if<FontDeltaEdit>(&f.suggested_edit->action);
  REQUIRE(delta != nullptr);
  CHECK(delta->delta_pt == Catch::Approx(4.0));  // to 18 + 2
}

TEST_CASE("mixed font families warn without an auto edit") {
  auto spec = clean_spec();
  spec.elements[2].font->family = "Georgia";
  auto report = geometric_review(spec, spec.geometry);
  REQUIRE(report.findings.size() == 1);
  CHECK(report.findings[0].kind == FindingKind::font_inconsistency);
  CHECK_FALSE(report.findings[0].suggested_edit.has_value());
  CHECK(report.recommendations.empty());
}

TEST_CASE("lopsided layouts warn about balance without an auto edit") {
  SlideSpec spec;
  spec.geometry = {720, 540};
  Element e;
  e.id = 301;
  e.kind = ElementKind::body;
  e.bounds = {0, 108, 144, 288};
  e.font = FontSpec{"Helvetica", 18, false, {}};
  e.text = "left heavy";
  spec.elements = {e};
  auto report = geometric_review(spec, spec.geometry);
  bool saw_balance = false;
  for (const auto& f : report.findings)
    if (f.kind == FindingKind::composition_balance) {
      saw_balance = true;
      CHECK(f.severity == Severity::warning);
      CHECK_FALSE(f.suggested_edit.has_value());
    }
  CHECK(saw_balance);
}

TEST_CASE("aspect drift beyond 10% suggests a proportional resize") {
  Paper paper;
  paper.id = "p";
  paper.title = "t";
  paper.sections = {{"s", 0, "h", "text"}};
  paper.figures = {{"fig-wide", FigureKind::figure, "Figure 1", "Wide plot.",
                    std::string("figs/wide.png"), FigureSize{400, 200}}};
  FigureStore store(paper);
  auto spec = clean_spec();
  Element image;
  image.id = 304;
  image.kind = ElementKind::image;
  image.bounds = {372, 490, 516, 538};  // 144x48 = 3.0 vs natural 2.0
  image.image_ref = "fig-wide";
  spec.elements.push_back(image);
  auto report = geometric_review(spec, spec.geometry, {}, &store);
  bool saw_distortion = false;
  for (const auto& f : report.findings)
    if (f.kind == FindingKind::image_distortion) {
      saw_distortion = true;
      REQUIRE(f.suggested_edit.has_value());
      const auto* sb = std::get_if<SetBoundsEdit>(&f.suggested_edit->action);
      REQUIRE(sb != nullptr);
      CHECK(sb->rect.height() == Catch::Approx(72.0));  // 144 / 2.0
    }
  CHECK(saw_distortion);
  // Without the asset store the check is skipped.
  auto no_assets = geometric_review(spec, spec.geometry);
  for (const auto& f : no_assets.findings) CHECK(f.kind != FindingKind::image_distortion);
}

TEST_CASE("recommendation grammar parses the worked exemplars") {
  SlideSpec spec;
  spec.geometry = {720, 540};
  Element e;
  e.id = 302;
  e.kind = ElementKind::body;
  e.bounds = {100, 200, 300, 400};
  e.font = FontSpec{"Helvetica", 16, false, {}};
  e.text = "Sample Text";
  spec.elements = {e};

  auto scale = parse_recommendation(spec, 302, "Increase text box height by 1.2x to fit overflowing text.");
  REQUIRE(scale.has_value());
  CHECK(*scale == Edit{302, ScaleBoxEdit{1.0, 1.2}});

  auto move = parse_recommendation(spec, 302, "Move downward by 10% of its height");
  REQUIRE(move.has_value());
  CHECK(*move == Edit{302, MoveEdit{0.0, 20.0}});

  auto font = parse_recommendation(spec, 302, "Reduce font size by 2pt to fit within the bounding box.");
  REQUIRE(font.has_value());
  CHECK(*font == Edit{302, FontDeltaEdit{-2.0}});

  auto align = parse_recommendation(spec, 302, "Align left to 36");
  REQUIRE(align.has_value());
  CHECK(*align == Edit{302, AlignToEdit{RectEdge::left, 36.0}});

  auto reduce = parse_recommendation(spec, 302, "Reduce width by 2x");
  REQUIRE(reduce.has_value());
  CHECK(*reduce == Edit{302, ScaleBoxEdit{0.5, 1.0}});

  CHECK_FALSE(parse_recommendation(spec, 302, "make it prettier").has_value());
  CHECK_FALSE(parse_recommendation(spec, 999, "Move downward by 10% of its height").has_value());
}

TEST_CASE("refine equals apply_edits over the parsed recommendations") {
  auto spec = clean_spec();
  ReviewReport report;
  report.recommendations = {
      {302, "Move downward by 10% of its height",
       parse_recommendation(spec, 302, "Move downward by 10% of its height")},
      {301, "Reduce font size by 2pt", Edit{301, FontDeltaEdit{-2.0}}},
      {303, "gibberish", std::nullopt},
  };
  auto refined = refine(spec, report);
  auto direct = apply_edits(spec, {*report.recommendations[0].parsed,
                                   *report.recommendations[1].parsed});
  CHECK(refined.spec == direct.spec);
  REQUIRE(refined.warnings.size() == 1);
  CHECK(refined.warnings[0].find("303") != std::string::npos);
  // Frame property: the untouched element is byte-identical.
  CHECK(refined.spec.elements[2] == spec.elements[2]);
}

TEST_CASE("refine survives unknown targets without aborting the batch") {
  auto spec = clean_spec();
  ReviewReport report;
  report.recommendations = {
      {999, "Move downward by 10% of its height", Edit{999, MoveEdit{0, 10}}},
      {302, "Move downward by 10% of its height", Edit{302, MoveEdit{0, 10}}},
  };
  auto refined = refine(spec, report);
  CHECK(refined.spec.elements[1].bounds.top == Catch::Approx(118.0));
  REQUIRE(refined.warnings.size() == 1);
  CHECK(refined.warnings[0].find("999") != std::string::npos);
}

TEST_CASE("visual_review maps the structured reply onto recommendations") {
  auto lib = prompts();
  auto spec = clean_spec();
  const char* reply = R"([
    {"element": 302, "recommendation": "Increase text box height by 1.2x to fit overflowing text."},
    {"element": 303, "recommendation": "Move downward by 10% of its height"},
    {"element": 303, "recommendation": "Reduce font size by 2pt to fit within the bounding box."}
  ])";
  MockTransport mock({reply});
  ImageAttachment image{"image/x-portable-pixmap", "AAAA"};
  auto report = visual_review(image, spec, lib, mock);
  CHECK(report.source == ReviewSource::visual_llm);
  REQUIRE(report.recommendations.size() == 3);
  CHECK(report.recommendations[0].element == 302);
  REQUIRE(report.recommendations[0].parsed.has_value());
  CHECK(std::get_if<ScaleBoxEdit>(&report.recommendations[0].parsed->action) != nullptr);
  REQUIRE(report.recommendations[1].parsed.has_value());
  const auto* move = std::get_if<MoveEdit>(&report.recommendations[1].parsed->action);
  REQUIRE(move != nullptr);
  CHECK(move->dy == Catch::Approx(14.4));  // 10% of body 303's 144pt height
  // The request embedded the annotated image.
  REQUIRE(mock.requests().size() == 1);
  CHECK(mock.requests()[0].messages[1].image.has_value());
}

TEST_CASE("visual_review drops unknown element ids with a warning") {
  auto lib = prompts();
  auto spec = clean_spec();
  const char* reply = R"([
    {"element": 999, "recommendation": "Move downward by 10% of its height"},
    {"element": 302, "recommendation": "untranslatable advice"}
  ])";
  MockTransport mock({reply});
  ImageAttachment image{"image/x-portable-pixmap", "AAAA"};
  auto report = visual_review(image, spec, lib, mock);
  REQUIRE(report.recommendations.size() == 1);
  CHECK(report.recommendations[0].element == 302);
  CHECK_FALSE(report.recommendations[0].parsed.has_value());
  REQUIRE(report.warnings.size() == 2);
  CHECK(report.warnings[0].find("999") != std::string::npos);
}

TEST_CASE("empty visual reply is a clean report") {
  auto lib = prompts();
  auto spec = clean_spec();
  MockTransport mock({"[]"});
  ImageAttachment image{"image/x-portable-pixmap", "AAAA"};
  auto report = visual_review(image, spec, lib, mock);
  CHECK(report.recommendations.empty());
  CHECK(report.warnings.empty());
  CHECK_FALSE(report_actionable(report));
}

TEST_CASE("merge keeps geometric suggestions over duplicate visual ones") {
  ReviewReport geo;
  geo.source = ReviewSource::geometric;
  geo.recommendations = {{302, "Increase text box height by 1.4x to fit overflowing text.",
                          Edit{302, ScaleBoxEdit{1.0, 1.4}}}};
  ReviewReport vis;
  vis.source = ReviewSource::visual_llm;
  vis.recommendations = {{302, "Increase text box height by 1.2x to fit overflowing text.",
                          Edit{302, ScaleBoxEdit{1.0, 1.2}}},
                         {303, "Move downward by 10% of its height", Edit{303, MoveEdit{0, 14.4}}}};
  auto merged = merge_reports(geo, vis);
  CHECK(merged.source == ReviewSource::merged);
  REQUIRE(merged.recommendations.size() == 2);
  const auto* scale = std::get_if<ScaleBoxEdit>(&merged.recommendations[0].parsed->action);
  REQUIRE(scale != nullptr);
  CHECK(scale->fy == Catch::Approx(1.4));  // the geometric one won
  CHECK(merged.recommendations[1].element == 303);
}

TEST_CASE("run_loop converges in one refine round on a single overflow defect") {
  auto spec = clean_spec();
  spec.elements[1].bounds = {36, 108, 236, 188};
  spec.elements[1].text = std::string(100, 'a');
  LoopConfig config;
  auto result = run_loop(spec, config);
  CHECK(result.reason == TerminationReason::no_findings);
  REQUIRE(result.trace.size() == 2);  // defect report + clean report
  CHECK(result.trace[0].report.findings.size() == 1);
  CHECK(result.trace[1].report.findings.empty());
  CHECK(geometric_review(result.spec, result.spec.geometry).findings.empty());
  CHECK(result.spec.elements[1].bounds.height() == Catch::Approx(112.0));  // 80 * 1.4
}

TEST_CASE("run_loop on a clean spec stops immediately with no_findings") {
  auto spec = clean_spec();
  auto result = run_loop(spec, LoopConfig{});
  CHECK(result.reason == TerminationReason::no_findings);
  CHECK(result.trace.size() == 1);
  CHECK(result.spec == spec);
  CHECK(result.final_spec_hash == spec_hash(spec));
}

TEST_CASE("cycling visual advice stops at max_iters with a full trace") {
  auto lib = prompts();
  auto spec = clean_spec();
  MockTransport mock({
      R"([{"element": 302, "recommendation": "Move downward by 10% of its height"}])",
      R"([{"element": 302, "recommendation": "Move upward by 10% of its height"}])",
      R"([{"element": 302, "recommendation": "Move downward by 10% of its height"}])",
  });
  LoopConfig config;
  config.use_visual_llm = true;
  LoopDeps deps;
  deps.prompts = &lib;
  deps.transport = &mock;
  auto result = run_loop(spec, config, deps);
  CHECK(result.reason == TerminationReason::max_iters);
  CHECK(result.trace.size() == 3);
  CHECK(mock.call_count() == 3);
}

TEST_CASE("gateway failure degrades the loop to geometric-only") {
  auto lib = prompts();
  auto spec = clean_spec();
  spec.elements[1].bounds = {36, 108, 236, 188};
  spec.elements[1].text = std::string(100, 'a');
  MockTransport mock;
  mock.push_failure("simulated outage", false);
  LoopConfig config;
  config.use_visual_llm = true;
  LoopDeps deps;
  deps.prompts = &lib;
  deps.transport = &mock;
  auto result = run_loop(spec, config, deps);
  CHECK(result.reason == TerminationReason::no_findings);
  bool noted = false;
  for (const auto& note : result.notes)
    if (note.find("gateway error") != std::string::npos) noted = true;
  CHECK(noted);
  CHECK(geometric_review(result.spec, result.spec.geometry).findings.empty());
}

TEST_CASE("rasterization unavailable skips visual review with a note") {
  auto lib = prompts();
  auto spec = clean_spec();
  MockTransport mock;  // must never be called
  LoopConfig config;
  config.use_visual_llm = true;
  LoopDeps deps;
  deps.prompts = &lib;
  deps.transport = &mock;
  deps.render_options.raster_enabled = false;
  auto result = run_loop(spec, config, deps);
  CHECK(mock.call_count() == 0);
  REQUIRE_FALSE(result.notes.empty());
  CHECK(result.notes[0].find("rasterization unavailable") != std::string::npos);
}

TEST_CASE("run_loop is deterministic with scripted transports") {
  auto lib = prompts();
  auto spec = clean_spec();
  spec.elements[1].bounds = {36, 108, 236, 188};
  spec.elements[1].text = std::string(100, 'a');
  auto run = [&] {
    MockTransport mock({"[]", "[]"});
    LoopConfig config;
    config.use_visual_llm = true;
    LoopDeps deps;
    deps.prompts = &lib;
    deps.transport = &mock;
    auto result = run_loop(spec, config, deps);
    return trace_to_json(result).dump();
  };
  CHECK(run() == run());
}

TEST_CASE("seeded single defects are reported exactly and converge") {
  std::mt19937 rng(20250808);
  const testsupport::DefectKind kinds[3] = {testsupport::DefectKind::overlap,
                                            testsupport::DefectKind::out_of_bounds,
                                            testsupport::DefectKind::text_overflow};
  for (int round = 0; round < 30; ++round) {
    auto seeded = testsupport::inject_defect(rng, kinds[round % 3]);
    auto report = geometric_review(seeded.spec, seeded.spec.geometry);
    std::set<int> reported;
    for (const auto& f : report.findings)
      for (int id : f.element_ids) reported.insert(id);
    std::set<int> expected(seeded.expected_ids.begin(), seeded.expected_ids.end());
    INFO("defect kind " << static_cast<int>(seeded.kind) << " round " << round);
    CHECK(reported == expected);

    auto result = run_loop(seeded.spec, LoopConfig{});
    CHECK(result.reason == TerminationReason::no_findings);
    CHECK(result.trace.size() <= 3);
  }
}

TEST_CASE("trace serialization carries reports, hashes and termination") {
  auto spec = clean_spec();
  spec.elements[1].bounds = {36, 108, 236, 188};
  spec.elements[1].text = std::string(100, 'a');
  auto result = run_loop(spec, LoopConfig{});
  json trace = trace_to_json(result);
  CHECK(trace.at("termination") == "no_findings");
  REQUIRE(trace.at("iterations").size() == 2);
  CHECK(trace.at("iterations")[0].at("findings").size() == 1);
  CHECK(trace.at("iterations")[0].at("spec_hash") == spec_hash(spec));
  CHECK(trace.at("final_spec_hash") == spec_hash(result.spec));
  const auto& finding = trace.at("iterations")[0].at("findings")[0];
  CHECK(finding.at("kind") == "text_overflow");
  CHECK(finding.at("suggested_edit").at("action") == "scale_box");
}

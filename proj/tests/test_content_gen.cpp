#include "slidegen/content_gen.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "support/golden.hpp"

using namespace slidegen;

namespace {

Paper paper_with_figures() {
  Paper p;
  p.id = "paper-1";
  p.title = "Sparse Solvers at Scale";
  p.sections = {{"s-intro", 0, "Introduction", "We study sparse solvers. See Figure 1."},
                {"s-method", 1, "Method", "Our pipeline appears in Figure 2 and Table 1."},
                {"s-results", 2, "Results", "Figure 2 shows speedups. Figure 2 scales."}};
  p.figures = {{"fig-overview", FigureKind::figure, "Figure 1", "System overview.", {}, {}},
               {"fig-pipeline", FigureKind::figure, "Figure 2", "Pipeline stages.", {}, {}},
               {"tbl-ablation", FigureKind::table, "Table 1", "Ablation results.", {}, {}}};
  return p;
}

SlideTask task_with_neighbors(bool with_prev = true, bool with_next = true) {
  SlideTask task;
  task.paper = paper_with_figures();
  task.topic = "Experimental results";
  task.deck_geometry = {720, 540};
  if (with_prev) {
    SlideSpec prev;
    prev.geometry = {720, 540};
    Element t;
    t.id = 201;
    t.kind = ElementKind::title;
    t.bounds = {36, 36, 684, 90};
    t.font = FontSpec{"Helvetica", 28, true, {}};
    t.text = "Method";
    Element b;
    b.id = 202;
    b.kind = ElementKind::body;
    b.bounds = {36, 108, 684, 200};
    b.font = FontSpec{"Helvetica", 18, false, {}};
    b.text = "Three-stage pipeline";
    prev.elements = {t, b};
    task.prev_slide = prev;
  }
  if (with_next) {
    SlideSpec next;
    next.geometry = {720, 540};
    Element t;
    t.id = 211;
    t.kind = ElementKind::title;
    t.bounds = {36, 36, 684, 90};
    t.font = FontSpec{"Helvetica", 28, true, {}};
    t.text = "Conclusion";
    Element b;
    b.id = 212;
    b.kind = ElementKind::body;
    b.bounds = {36, 108, 684, 200};
    b.font = FontSpec{"Helvetica", 18, false, {}};
    b.text = "Sparse solvers scale";
    next.elements = {t, b};
    task.next_slide = next;
  }
  if (!with_prev && !with_next) task.allow_no_context = true;
  return task;
}

std::vector<RankedSection> ranked_results_first() {
  return {{"s-results", 0.91, 1}, {"s-method", 0.55, 2}};
}

const char* kPlanReply = R"({
  "slide_title": "Experimental Results",
  "bullets": ["Consistent speedups on all suites", "Scaling holds to 64 threads"],
  "selected_figures": ["fig-pipeline"],
  "speaker_context": "Walk through the speedup chart."
})";

const char* kLayoutReply = R"({
  "elements": [
    {"id": 301, "kind": "title", "bounds": [36, 36, 684, 90],
     "font": {"family": "Helvetica", "size_pt": 28, "bold": true}, "text": "Experimental Results"},
    {"id": 302, "kind": "body", "bounds": [36, 108, 348, 200],
     "font": {"family": "Helvetica", "size_pt": 18}, "text": "Consistent speedups on all suites"},
    {"id": 303, "kind": "body", "bounds": [36, 216, 348, 308],
     "font": {"family": "Helvetica", "size_pt": 18}, "text": "Scaling holds to 64 threads"},
    {"id": 304, "kind": "image", "bounds": [372, 330, 684, 520], "image_ref": "fig-pipeline"}
  ]
})";

const char* kPlanReplyNoFigures =
    R"({"slide_title": "Experimental Results", "bullets": ["Consistent speedups on all suites"], "selected_figures": []})";

ContentPlan plan_from_reply() {
  ContentPlan plan;
  plan.slide_title = "Experimental Results";
  plan.bullets = {"Consistent speedups on all suites", "Scaling holds to 64 threads"};
  plan.selected_figures = {"fig-pipeline"};
  plan.speaker_context = "Walk through the speedup chart.";
  return plan;
}

PromptLibrary prompts() { return PromptLibrary::load(testsupport::source_dir() / "assets"); }

}  // namespace

TEST_CASE("extract_figure_refs finds the exemplar patterns in order") {
  auto mentions = extract_figure_refs("As shown in Figure 2 and Table 1, gains persist.");
  REQUIRE(mentions.size() == 2);
  CHECK(mentions[0] == FigureMention{"Figure 2", 1});
  CHECK(mentions[1] == FigureMention{"Table 1", 1});
}

TEST_CASE("extract_figure_refs stays case-sensitive and ignores plural/range forms") {
  CHECK(extract_figure_refs("figures 3-5 are informative").empty());
  CHECK(extract_figure_refs("figure 3 and table 2").empty());
  CHECK(extract_figure_refs("Figures 3").empty());
  CHECK(extract_figure_refs("Figure 0").empty());  // labels are positive integers
}

TEST_CASE("duplicate references collapse with counts") {
  auto mentions = extract_figure_refs("Figure 1 starts it. Later, Figure 1 again.");
  REQUIRE(mentions.size() == 1);
  CHECK(mentions[0] == FigureMention{"Figure 1", 2});
}

TEST_CASE("label aliases are opt-in and normalize to canonical labels") {
  CHECK(extract_figure_refs("See Fig. 3 for details.").empty());
  auto mentions = extract_figure_refs("See Fig. 3 for details.", {{"Fig.", "Figure"}});
  REQUIRE(mentions.size() == 1);
  CHECK(mentions[0].label == "Figure 3");
}

TEST_CASE("scanning concatenated texts yields the multiset union of counts") {
  std::mt19937 rng(55);
  const std::vector<std::string> pool = {"Figure 1",  "Table 2", "plain prose", "Figure",
                                         "12 things", "Figure 12", "Table", "tables 3"};
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (int round = 0; round < 100; ++round) {
    auto make_text = [&](int words) {
      std::string t;
      for (int i = 0; i < words; ++i) {
        if (i) t += " and ";
        t += pool[pick(rng)];
      }
      return t;
    };
    const std::string a = make_text(1 + int(rng() % 5));
    const std::string b = make_text(1 + int(rng() % 5));
    std::map<std::string, int> expected;
    for (const auto& m : extract_figure_refs(a)) expected[m.label] += m.count;
    for (const auto& m : extract_figure_refs(b)) expected[m.label] += m.count;
    std::map<std::string, int> combined;
    for (const auto& m : extract_figure_refs(a + "\n\n" + b)) combined[m.label] += m.count;
    CHECK(combined == expected);
  }
}

TEST_CASE("match_figures resolves labels and reports the rest") {
  Paper paper = paper_with_figures();
  auto matched = match_figures({{"Figure 2", 3}, {"Table 9", 1}}, paper);
  REQUIRE(matched.candidates.size() == 1);
  CHECK(matched.candidates[0].asset_id == "fig-pipeline");
  CHECK(matched.candidates[0].caption == "Pipeline stages.");
  CHECK(matched.candidates[0].mention_count == 3);
  REQUIRE(matched.warnings.size() == 1);
  CHECK(matched.warnings[0] == "Table 9 unresolved");
}

TEST_CASE("generate_content passes a valid mock reply through as a validated plan") {
  auto lib = prompts();
  MockTransport mock({kPlanReply});
  auto task = task_with_neighbors();
  auto candidates =
      match_figures(extract_figure_refs("Figure 2 and Table 1"), task.paper).candidates;
  auto plan = generate_content(task, ranked_results_first(), candidates, lib, mock);
  CHECK(plan == plan_from_reply());
}

TEST_CASE("selecting a figure outside the candidates raises SchemaError naming it") {
  auto lib = prompts();
  const char* bad = R"({"slide_title": "T", "bullets": ["b"], "selected_figures": ["fig-unknown"]})";
  MockTransport mock({bad, bad});
  auto task = task_with_neighbors();
  try {
    generate_content(task, ranked_results_first(), {}, lib, mock);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(mock.call_count() == 2);  // one repair reprompt happened
    CHECK(mock.requests()[1].messages.back().text.find("fig-unknown") != std::string::npos);
  }
}

TEST_CASE("prompt snapshot: no-context task omits the neighbor block") {
  auto lib = prompts();
  MockTransport mock({kPlanReply});
  auto task = task_with_neighbors(false, false);
  auto candidates =
      match_figures(extract_figure_refs("Figure 2 and Table 1"), task.paper).candidates;
  std::vector<PromptSnapshot> snapshots;
  generate_content(task, ranked_results_first(), candidates, lib, mock, {}, &snapshots);
  REQUIRE(snapshots.size() == 1);
  CHECK(snapshots[0].text.find("Surrounding slides") == std::string::npos);
  std::string message;
  const bool ok =
      testsupport::matches_golden(snapshots[0].text, "tests/golden/content_plan_nocontext.txt",
                                  &message);
  INFO(message);
  CHECK(ok);
}

TEST_CASE("prompt includes neighbor content when present") {
  auto lib = prompts();
  MockTransport mock({kPlanReplyNoFigures});
  auto task = task_with_neighbors();
  std::vector<PromptSnapshot> snapshots;
  generate_content(task, ranked_results_first(), {}, lib, mock, {}, &snapshots);
  REQUIRE(snapshots.size() == 1);
  CHECK(snapshots[0].text.find("Previous slide content:") != std::string::npos);
  CHECK(snapshots[0].text.find("Three-stage pipeline") != std::string::npos);
  CHECK(snapshots[0].text.find("Next slide content:") != std::string::npos);
}

TEST_CASE("full-paper mode feeds every section without retrieval") {
  auto lib = prompts();
  MockTransport mock({kPlanReplyNoFigures});
  auto task = task_with_neighbors();
  ContentGenOptions options;
  options.full_paper_mode = true;
  std::vector<PromptSnapshot> snapshots;
  generate_content(task, {}, {}, lib, mock, options, &snapshots);
  REQUIRE(snapshots.size() == 1);
  CHECK(snapshots[0].text.find("Introduction") != std::string::npos);
  CHECK(snapshots[0].text.find("Method") != std::string::npos);
  CHECK(snapshots[0].text.find("Results") != std::string::npos);
}

TEST_CASE("without full-paper mode, empty sections are an error") {
  auto lib = prompts();
  MockTransport mock({kPlanReply});
  auto task = task_with_neighbors();
  CHECK_THROWS_AS(generate_content(task, {}, {}, lib, mock), ValidationError);
}

TEST_CASE("generate_initial_layout yields title+bodies+image in reading order") {
  auto lib = prompts();
  MockTransport mock({kLayoutReply});
  auto task = task_with_neighbors();
  auto spec = generate_initial_layout(plan_from_reply(), task, lib, mock);
  REQUIRE(spec.elements.size() == 4);
  CHECK(spec.elements[0].kind == ElementKind::title);
  CHECK(spec.elements[1].kind == ElementKind::body);
  CHECK(spec.elements[2].kind == ElementKind::body);
  CHECK(spec.elements[3].kind == ElementKind::image);
  for (int i = 0; i < 4; ++i) CHECK(spec.elements[i].id == 301 + i);
  CHECK(validate(spec).empty());
}

TEST_CASE("element ids are normalized to reading order regardless of reply ids") {
  auto lib = prompts();
  // Same layout but with shuffled, arbitrary ids and element order.
  const char* shuffled = R"({
    "elements": [
      {"id": 9, "kind": "image", "bounds": [372, 330, 684, 520], "image_ref": "fig-pipeline"},
      {"id": 7, "kind": "body", "bounds": [36, 216, 348, 308],
       "font": {"family": "Helvetica", "size_pt": 18}, "text": "Scaling holds to 64 threads"},
      {"id": 3, "kind": "title", "bounds": [36, 36, 684, 90],
       "font": {"family": "Helvetica", "size_pt": 28, "bold": true}, "text": "Experimental Results"},
      {"id": 5, "kind": "body", "bounds": [36, 108, 348, 200],
       "font": {"family": "Helvetica", "size_pt": 18}, "text": "Consistent speedups on all suites"}
    ]
  })";
  MockTransport mock({shuffled});
  auto task = task_with_neighbors();
  auto spec = generate_initial_layout(plan_from_reply(), task, lib, mock);
  REQUIRE(spec.elements.size() == 4);
  CHECK(spec.elements[0].id == 301);
  CHECK(spec.elements[0].kind == ElementKind::title);
  CHECK(spec.elements[1].bounds.top == 108);
  CHECK(spec.elements[3].kind == ElementKind::image);  // bottom-most in reading order
}

TEST_CASE("layout replies that drop a bullet fail as LayoutValidationError") {
  auto lib = prompts();
  const char* missing_bullet = R"({
    "elements": [
      {"id": 301, "kind": "title", "bounds": [36, 36, 684, 90],
       "font": {"family": "Helvetica", "size_pt": 28}, "text": "Experimental Results"},
      {"id": 302, "kind": "body", "bounds": [36, 108, 348, 200],
       "font": {"family": "Helvetica", "size_pt": 18}, "text": "Consistent speedups on all suites"},
      {"id": 304, "kind": "image", "bounds": [372, 108, 684, 324], "image_ref": "fig-pipeline"}
    ]
  })";
  MockTransport mock({missing_bullet, missing_bullet});
  auto task = task_with_neighbors();
  CHECK_THROWS_AS(generate_initial_layout(plan_from_reply(), task, lib, mock),
                  LayoutValidationError);
  CHECK(mock.call_count() == 2);
}

TEST_CASE("out-of-bounds layout handling follows the policy") {
  auto lib = prompts();
  const char* oob = R"({
    "elements": [
      {"id": 301, "kind": "title", "bounds": [60, 36, 760, 90],
       "font": {"family": "Helvetica", "size_pt": 28}, "text": "Experimental Results"},
      {"id": 302, "kind": "body", "bounds": [36, 108, 348, 200],
       "font": {"family": "Helvetica", "size_pt": 18}, "text": "Consistent speedups on all suites"},
      {"id": 303, "kind": "body", "bounds": [36, 216, 348, 308],
       "font": {"family": "Helvetica", "size_pt": 18}, "text": "Scaling holds to 64 threads"},
      {"id": 304, "kind": "image", "bounds": [372, 330, 684, 520], "image_ref": "fig-pipeline"}
    ]
  })";
  auto task = task_with_neighbors();

  SECTION("default: defects pass through to the verify loop") {
    MockTransport mock({oob});
    auto spec = generate_initial_layout(plan_from_reply(), task, lib, mock);
    CHECK(spec.elements[0].bounds.right == 760);
  }
  SECTION("clamp policy translates the element back inside") {
    MockTransport mock({oob});
    LayoutGenOptions options;
    options.oob = OutOfBoundsPolicy::clamp;
    auto spec = generate_initial_layout(plan_from_reply(), task, lib, mock, options);
    CHECK(spec.elements[0].bounds == Rect{20, 36, 720, 90});
  }
  SECTION("strict policy rejects after the repair reprompt") {
    MockTransport mock({oob, oob});
    LayoutGenOptions options;
    options.oob = OutOfBoundsPolicy::strict;
    CHECK_THROWS_AS(generate_initial_layout(plan_from_reply(), task, lib, mock, options),
                    LayoutValidationError);
  }
}

TEST_CASE("prompt snapshot: neighbor slides appear as layout demonstrations") {
  auto lib = prompts();
  MockTransport mock({kLayoutReply});
  auto task = task_with_neighbors();
  std::vector<PromptSnapshot> snapshots;
  generate_initial_layout(plan_from_reply(), task, lib, mock, {}, &snapshots);
  REQUIRE(snapshots.size() == 1);
  CHECK(snapshots[0].text.find("Demonstration slides") != std::string::npos);
  CHECK(snapshots[0].text.find("\"Method\"") != std::string::npos);
  std::string message;
  const bool ok = testsupport::matches_golden(
      snapshots[0].text, "tests/golden/initial_layout_with_demos.txt", &message);
  INFO(message);
  CHECK(ok);
}

TEST_CASE("mock-driven generation is deterministic end to end") {
  auto lib = prompts();
  auto task = task_with_neighbors();
  auto candidates =
      match_figures(extract_figure_refs("Figure 2 and Table 1"), task.paper).candidates;
  auto run = [&] {
    MockTransport mock({kPlanReply, kLayoutReply});
    auto plan = generate_content(task, ranked_results_first(), candidates, lib, mock);
    return generate_initial_layout(plan, task, lib, mock);
  };
  CHECK(run() == run());
}

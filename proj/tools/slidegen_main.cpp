// slidegen: generate a missing presentation slide from a paper and its
// surrounding slides, then verify and repair the layout.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "slidegen/pipeline.hpp"

namespace {

using namespace slidegen;
namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config_path;
  std::string assets_dir;
  std::string transport;
  std::string recording;
  std::string mock_script;
  std::string output_dir;
};

Config resolve_config(const GlobalOptions& global) {
  Config config;
  if (!global.config_path.empty()) config = load_config(global.config_path);
  if (!global.assets_dir.empty()) config.assets_dir = global.assets_dir;
  if (!global.transport.empty()) {
    if (global.transport == "mock")
      config.transport = TransportKind::mock;
    else if (global.transport == "replay")
      config.transport = TransportKind::replay;
    else if (global.transport == "http")
      config.transport = TransportKind::http;
    else
      throw ValidationError("--transport must be mock|replay|http");
  }
  if (!global.recording.empty()) config.recording_path = global.recording;
  if (!global.mock_script.empty()) config.mock_script = global.mock_script;
  if (!global.output_dir.empty()) config.output_dir = global.output_dir;
  return config;
}

void print_findings(const ReviewReport& report) {
  for (const auto& f : report.findings) {
    std::string ids;
    for (int id : f.element_ids) ids += (ids.empty() ? "" : ",") + std::to_string(id);
    std::printf("  [%s] %s (elements %s): %s\n", to_string(f.severity), to_string(f.kind),
                ids.c_str(), f.note.c_str());
  }
  for (const auto& rec : report.recommendations)
    std::printf("  -> element %d: %s\n", rec.element, rec.recommendation.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate, verify and evaluate presentation slides"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "Config file (JSON)");
  app.add_option("--assets", global.assets_dir, "Prompt/rubric assets directory");
  app.add_option("--transport", global.transport, "Transport: mock|replay|http");
  app.add_option("--recording", global.recording, "Recording file for replay transport");
  app.add_option("--mock-script", global.mock_script, "Scripted replies for mock transport");

  // generate
  auto* generate = app.add_subcommand("generate", "Generate the missing slide end to end");
  std::string paper_path, topic, prev_path, next_path, record_path, batch_path, out_dir = "out";
  bool no_context = false, no_retriever = false, no_neighbor_slides = false,
       no_visual_review = false;
  int k = 0, jobs = 0;
  generate->add_option("--paper", paper_path, "Paper document (JSON)");
  generate->add_option("--topic", topic, "Topic of the missing slide");
  generate->add_option("--prev", prev_path, "Preceding slide file");
  generate->add_option("--next", next_path, "Following slide file");
  generate->add_flag("--no-context", no_context, "Allow generation without neighbor slides");
  generate->add_option("--k", k, "Number of sections to retrieve");
  generate->add_flag("--no-retriever", no_retriever, "Feed the full paper instead of retrieving");
  generate->add_flag("--no-neighbor-slides", no_neighbor_slides,
                     "Drop surrounding-slide context");
  generate->add_flag("--no-visual-review", no_visual_review,
                     "Verification loop runs geometric checks only");
  generate->add_option("--record", record_path, "Record gateway traffic to this file");
  generate->add_option("--batch", batch_path, "Batch task file (JSON array)");
  generate->add_option("--jobs", jobs, "Parallel workers in batch mode");
  generate->add_option("-o,--out", out_dir, "Output directory");

  // check
  auto* check = app.add_subcommand("check", "Validate a slide file and report findings");
  std::string check_slide;
  check->add_option("slide", check_slide, "Slide file")->required();

  // refine
  auto* refine_cmd = app.add_subcommand("refine", "Apply the geometric reviewer's fixes");
  std::string refine_slide, refine_out, refine_trace;
  bool refine_loop = false;
  refine_cmd->add_option("slide", refine_slide, "Slide file")->required();
  refine_cmd->add_option("-o,--out", refine_out, "Refined slide output path");
  refine_cmd->add_flag("--loop", refine_loop, "Iterate to convergence instead of one pass");
  refine_cmd->add_option("--trace", refine_trace, "Write the review trace here");

  // render
  auto* render_cmd = app.add_subcommand("render", "Render annotated and final images");
  std::string render_slide, render_paper, render_stem;
  render_cmd->add_option("slide", render_slide, "Slide file")->required();
  render_cmd->add_option("--paper", render_paper, "Paper file for figure assets");
  render_cmd->add_option("-o,--out", render_stem, "Output stem (default: slide path)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score generated content against a reference");
  std::string eval_generated, eval_reference, eval_paper, eval_report;
  bool eval_judge = false;
  eval_cmd->add_option("--generated", eval_generated, "Generated slide")->required();
  eval_cmd->add_option("--reference", eval_reference, "Reference slide")->required();
  eval_cmd->add_flag("--judge", eval_judge, "Also run the layout judge (needs a transport)");
  eval_cmd->add_option("--paper", eval_paper, "Paper file for figure assets");
  eval_cmd->add_option("--report", eval_report, "Write the JSON report here");

  CLI11_PARSE(app, argc, argv);

  try {
    Config config = resolve_config(global);

    if (generate->parsed()) {
      if (k > 0) config.retrieval_k = k;
      if (no_retriever) config.full_paper_mode = true;
      if (no_neighbor_slides) config.use_neighbor_slides = false;
      if (no_visual_review) config.loop.use_visual_llm = false;
      if (jobs > 0) config.jobs = jobs;

      if (!batch_path.empty()) {
        const auto tasks = pipeline::load_batch(batch_path);
        const auto outcome = pipeline::run_batch(config, tasks, config.jobs);
        std::printf("batch: %zu/%zu tasks succeeded\n", outcome.succeeded, tasks.size());
        for (const auto& f : outcome.failures) std::fprintf(stderr, "failed %s\n", f.c_str());
        return outcome.failures.empty() ? 0 : 1;
      }

      if (paper_path.empty() || topic.empty())
        throw ValidationError("generate needs --paper and --topic (or --batch)");
      pipeline::GenerateArgs args;
      args.paper_path = paper_path;
      args.topic = topic;
      if (!prev_path.empty()) args.prev_path = fs::path(prev_path);
      if (!next_path.empty()) args.next_path = fs::path(next_path);
      args.allow_no_context = no_context;
      args.out_dir = out_dir;
      if (!record_path.empty()) args.record_path = fs::path(record_path);
      const auto result = pipeline::run_generate(config, args);
      std::printf("slide:     %s\n", result.slide_path.string().c_str());
      std::printf("annotated: %s\n", result.annotated_svg.string().c_str());
      std::printf("final:     %s\n", result.final_svg.string().c_str());
      std::printf("trace:     %s (termination: %s)\n", result.trace_path.string().c_str(),
                  to_string(result.reason));
      for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      return 0;
    }

    if (check->parsed()) {
      const auto result = pipeline::run_check(check_slide, config.loop.alignment);
      for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      if (!result.violations.empty()) {
        std::printf("hard violations:\n");
        for (const auto& v : result.violations) std::printf("  - %s\n", v.message.c_str());
      }
      if (!result.report.findings.empty()) {
        std::printf("findings:\n");
        print_findings(result.report);
      }
      const bool clean = result.violations.empty() && result.report.findings.empty();
      if (clean) std::printf("clean: no violations, no findings\n");
      return clean ? 0 : 1;
    }

    if (refine_cmd->parsed()) {
      pipeline::RefineArgs args;
      args.slide_path = refine_slide;
      args.out_path = refine_out.empty() ? fs::path(refine_slide) : fs::path(refine_out);
      args.full_loop = refine_loop;
      if (!refine_trace.empty()) args.trace_path = fs::path(refine_trace);
      const auto outcome = pipeline::run_refine(config, args);
      std::printf("refined %s -> %s (%d iteration%s, %s)\n", refine_slide.c_str(),
                  args.out_path.string().c_str(), outcome.iterations,
                  outcome.iterations == 1 ? "" : "s", to_string(outcome.reason));
      for (const auto& w : outcome.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      return 0;
    }

    if (render_cmd->parsed()) {
      pipeline::RenderArgs args;
      args.slide_path = render_slide;
      args.out_stem = render_stem.empty() ? fs::path(render_slide).replace_extension("")
                                          : fs::path(render_stem);
      if (!render_paper.empty()) args.paper_path = fs::path(render_paper);
      const auto written = pipeline::run_render(config, args);
      for (const auto& path : written) std::printf("wrote %s\n", path.string().c_str());
      return 0;
    }

    if (eval_cmd->parsed()) {
      pipeline::EvalArgs args;
      args.generated_path = eval_generated;
      args.reference_path = eval_reference;
      args.judge = eval_judge;
      if (!eval_paper.empty()) args.paper_path = fs::path(eval_paper);
      if (!eval_report.empty()) args.report_path = fs::path(eval_report);
      const auto report = pipeline::run_eval(config, args);
      std::fputs(format_content_table(report).c_str(), stdout);
      if (args.judge) {
        std::fputs("\n", stdout);
        std::fputs(format_layout_table(report).c_str(), stdout);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

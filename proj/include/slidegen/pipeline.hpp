#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "slidegen/config.hpp"
#include "slidegen/content_gen.hpp"
#include "slidegen/doc_model.hpp"
#include "slidegen/eval.hpp"
#include "slidegen/prompts.hpp"
#include "slidegen/retrieval.hpp"
#include "slidegen/verify_loop.hpp"
#include "slidegen/visualizer.hpp"

namespace slidegen::pipeline {

namespace fs = std::filesystem;

struct GenerateArgs {
  fs::path paper_path;
  std::string topic;
  std::optional<fs::path> prev_path;
  std::optional<fs::path> next_path;
  bool allow_no_context = false;
  fs::path out_dir;
  std::optional<fs::path> record_path;  // wrap the transport and record
};

struct GenerateResult {
  fs::path slide_path;
  fs::path annotated_svg;
  fs::path final_svg;
  fs::path trace_path;
  std::optional<fs::path> annotated_raster;
  std::optional<fs::path> final_raster;
  TerminationReason reason = TerminationReason::no_findings;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string slide_stem(const fs::path& out_dir) {
  return (out_dir / "slide").string();
}

inline void write_snapshots(const fs::path& out_dir,
                            const std::vector<PromptSnapshot>& snapshots) {
  int counter = 0;
  for (const auto& snap : snapshots) {
    std::ostringstream name;
    name << counter++ << "_" << snap.name << ".txt";
    write_text_file(out_dir / "prompts" / name.str(), snap.text);
  }
}

}  // namespace detail

/// The end-to-end command: ingest, retrieve, plan, draft, verify-refine,
/// render, and write every artifact (slide JSON, annotated/final renders,
/// loop trace, prompt snapshots) under out_dir.
inline GenerateResult run_generate(const Config& config, const GenerateArgs& args) {
  const PromptLibrary prompts = PromptLibrary::load(config.assets_dir);
  GenerateResult result;

  auto loaded_paper = load_paper(args.paper_path);
  for (auto& w : loaded_paper.warnings) result.warnings.push_back(w);

  SlideTask task;
  task.paper = std::move(loaded_paper.value);
  task.topic = args.topic;
  task.allow_no_context = args.allow_no_context;
  if (config.use_neighbor_slides) {
    if (args.prev_path) {
      auto prev = load_slide(*args.prev_path);
      for (auto& w : prev.warnings) result.warnings.push_back(w);
      task.prev_slide = std::move(prev.value);
    }
    if (args.next_path) {
      auto next = load_slide(*args.next_path);
      for (auto& w : next.warnings) result.warnings.push_back(w);
      task.next_slide = std::move(next.value);
    }
  } else {
    task.allow_no_context = true;  // the ablation drops neighbor context
  }
  if (task.prev_slide)
    task.deck_geometry = task.prev_slide->geometry;
  else if (task.next_slide)
    task.deck_geometry = task.next_slide->geometry;
  validate_task(task);

  std::unique_ptr<Transport> base_transport = make_transport(config);
  std::unique_ptr<RecordingTransport> recorder;
  Transport* transport = base_transport.get();
  if (args.record_path) {
    recorder = std::make_unique<RecordingTransport>(*base_transport, *args.record_path);
    transport = recorder.get();
  }

  // Section retrieval (skipped in full-paper mode).
  std::vector<RankedSection> ranked;
  std::string provenance = "none";
  if (!config.full_paper_mode) {
    std::unique_ptr<EmbeddingProvider> provider = make_embedding_provider(config);
    EmbeddingStack stack{provider.get(), config.lexical_fallback};
    EmbeddingProvenance used = EmbeddingProvenance::provider;
    ranked = retrieve_sections(task.paper, task.topic, config.retrieval_k, stack, &used);
    provenance = used == EmbeddingProvenance::provider ? "provider" : "lexical_fallback";
  }

  // Figure references come from the text the content step will see.
  std::string scanned_text;
  if (config.full_paper_mode) {
    for (const auto& s : task.paper.sections) scanned_text += s.text + "\n\n";
  } else {
    for (const auto& r : ranked) {
      const Section* s = task.paper.find_section(r.section_id);
      if (s) scanned_text += s->text + "\n\n";
    }
  }
  const auto mentions = extract_figure_refs(scanned_text, config.figure_ref_aliases);
  const auto matched = match_figures(mentions, task.paper);
  for (const auto& w : matched.warnings) result.warnings.push_back("figure reference " + w);

  std::vector<PromptSnapshot> snapshots;
  ContentGenOptions content_options;
  content_options.chat_model = config.chat.model;
  content_options.full_paper_mode = config.full_paper_mode;
  const ContentPlan plan = generate_content(task, ranked, matched.candidates, prompts, *transport,
                                            content_options, &snapshots);

  LayoutGenOptions layout_options;
  layout_options.chat_model = config.chat.model;
  layout_options.id_base = config.id_base;
  layout_options.oob = config.initial_layout_oob;
  const SlideSpec draft =
      generate_initial_layout(plan, task, prompts, *transport, layout_options, &snapshots);

  const FigureStore store(task.paper);
  LoopDeps deps;
  deps.prompts = &prompts;
  deps.transport = transport;
  deps.assets = &store;
  deps.render_options = config.render;
  deps.visual.vision_model = config.vision_model;
  deps.snapshots = &snapshots;
  const LoopResult loop = run_loop(draft, config.loop, deps);

  fs::create_directories(args.out_dir);
  result.slide_path = args.out_dir / "slide.json";
  save_slide(loop.spec, result.slide_path);

  RenderOptions annotated_opts = config.render;
  annotated_opts.annotate = true;
  RenderOptions final_opts = config.render;
  final_opts.annotate = false;
  const VectorDoc annotated = render(loop.spec, store, annotated_opts);
  const VectorDoc final_doc = render(loop.spec, store, final_opts);
  result.annotated_svg = args.out_dir / "slide.annotated.svg";
  result.final_svg = args.out_dir / "slide.final.svg";
  write_text_file(result.annotated_svg, annotated.svg);
  write_text_file(result.final_svg, final_doc.svg);
  if (config.render.raster_enabled) {
    result.annotated_raster = args.out_dir / "slide.annotated.ppm";
    result.final_raster = args.out_dir / "slide.final.ppm";
    write_text_file(*result.annotated_raster, rasterize(annotated, annotated_opts).to_ppm());
    write_text_file(*result.final_raster, rasterize(final_doc, final_opts).to_ppm());
  }

  json trace = trace_to_json(loop);
  trace["pipeline_warnings"] = result.warnings;
  trace["embedding_provenance"] = provenance;
  json ranked_json = json::array();
  for (const auto& r : ranked)
    ranked_json.push_back({{"section", r.section_id}, {"score", r.score}, {"rank", r.rank}});
  trace["retrieved_sections"] = ranked_json;
  result.trace_path = args.out_dir / "trace.json";
  write_json_file(result.trace_path, trace);

  detail::write_snapshots(args.out_dir, snapshots);
  result.reason = loop.reason;
  return result;
}

// ---------------------------------------------------------------------------
// Single-module commands

struct CheckResult {
  std::vector<Violation> violations;
  ReviewReport report;
  std::vector<std::string> warnings;
};

inline CheckResult run_check(const fs::path& slide_path, const AlignmentPolicy& policy = {}) {
  auto loaded = load_slide_lenient(slide_path);
  CheckResult result;
  result.warnings = loaded.warnings;
  result.violations = validate(loaded.value);
  result.report = geometric_review(loaded.value, loaded.value.geometry, policy);
  return result;
}

struct RefineArgs {
  fs::path slide_path;
  fs::path out_path;
  bool full_loop = false;  // review+refine once by default
  std::optional<fs::path> trace_path;
};

struct RefineOutcome {
  TerminationReason reason = TerminationReason::no_findings;
  int iterations = 0;
  std::vector<std::string> warnings;
};

inline RefineOutcome run_refine(const Config& config, const RefineArgs& args) {
  auto loaded = load_slide(args.slide_path);
  RefineOutcome outcome;
  outcome.warnings = loaded.warnings;
  if (args.full_loop) {
    LoopConfig loop_config = config.loop;
    loop_config.use_visual_llm = false;  // file-level refine stays deterministic
    const LoopResult loop = run_loop(loaded.value, loop_config);
    outcome.reason = loop.reason;
    outcome.iterations = static_cast<int>(loop.trace.size());
    save_slide(loop.spec, args.out_path);
    if (args.trace_path) write_json_file(*args.trace_path, trace_to_json(loop));
    return outcome;
  }
  const ReviewReport report =
      geometric_review(loaded.value, loaded.value.geometry, config.loop.alignment);
  RefineResult refined = refine(loaded.value, report);
  outcome.iterations = 1;
  outcome.warnings.insert(outcome.warnings.end(), refined.warnings.begin(),
                          refined.warnings.end());
  save_slide(refined.spec, args.out_path);
  if (args.trace_path) {
    LoopResult single;
    single.spec = refined.spec;
    single.trace.push_back({0, report, spec_hash(loaded.value)});
    single.reason = report_actionable(report) ? TerminationReason::max_iters
                                              : TerminationReason::no_findings;
    single.final_spec_hash = spec_hash(refined.spec);
    write_json_file(*args.trace_path, trace_to_json(single));
  }
  return outcome;
}

struct RenderArgs {
  fs::path slide_path;
  fs::path out_stem;  // writes <stem>.annotated.svg / <stem>.final.svg (+ .ppm)
  std::optional<fs::path> paper_path;
};

inline std::vector<fs::path> run_render(const Config& config, const RenderArgs& args) {
  auto loaded = load_slide(args.slide_path);
  FigureStore store;
  if (args.paper_path) store = FigureStore(load_paper(*args.paper_path).value);
  std::vector<fs::path> written;
  RenderOptions annotated_opts = config.render;
  annotated_opts.annotate = true;
  RenderOptions final_opts = config.render;
  final_opts.annotate = false;
  const VectorDoc annotated = render(loaded.value, store, annotated_opts);
  const VectorDoc final_doc = render(loaded.value, store, final_opts);
  const fs::path annotated_svg = args.out_stem.string() + ".annotated.svg";
  const fs::path final_svg = args.out_stem.string() + ".final.svg";
  write_text_file(annotated_svg, annotated.svg);
  write_text_file(final_svg, final_doc.svg);
  written = {annotated_svg, final_svg};
  if (config.render.raster_enabled) {
    const fs::path annotated_ppm = args.out_stem.string() + ".annotated.ppm";
    const fs::path final_ppm = args.out_stem.string() + ".final.ppm";
    write_text_file(annotated_ppm, rasterize(annotated, annotated_opts).to_ppm());
    write_text_file(final_ppm, rasterize(final_doc, final_opts).to_ppm());
    written.push_back(annotated_ppm);
    written.push_back(final_ppm);
  }
  return written;
}

struct EvalArgs {
  fs::path generated_path;
  fs::path reference_path;
  bool judge = false;
  std::optional<fs::path> paper_path;  // resolves figures for the judged render
  std::optional<fs::path> report_path;
};

inline EvalReport run_eval(const Config& config, const EvalArgs& args) {
  auto generated = load_slide(args.generated_path);
  auto reference = load_slide(args.reference_path);
  SlideEvalRecord record;
  record.slide_id = args.generated_path.stem().string();
  record.rouge =
      score_rouge(slide_content_text(generated.value), slide_content_text(reference.value));
  if (args.judge) {
    const PromptLibrary prompts = PromptLibrary::load(config.assets_dir);
    FigureStore store;
    if (args.paper_path) store = FigureStore(load_paper(*args.paper_path).value);
    RenderOptions final_opts = config.render;
    final_opts.annotate = false;
    const VectorDoc doc = render(generated.value, store, final_opts);
    const RasterImage raster = rasterize(doc, final_opts);
    const ImageAttachment image{"image/x-portable-pixmap", base64_encode(raster.to_ppm())};
    std::unique_ptr<Transport> transport = make_transport(config);
    JudgeOptions judge_options;
    judge_options.model = config.vision_model;
    record.judge =
        judge_layout(image, generated.value, prompts.rubrics(), *transport, judge_options);
  }
  EvalReport report = aggregate({record});
  if (args.report_path) write_json_file(*args.report_path, eval_report_to_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// Batch generation

struct BatchTask {
  GenerateArgs args;
  std::optional<fs::path> recording;  // per-task replay source
};

inline std::vector<BatchTask> load_batch(const fs::path& path) {
  const json doc = parse_json_file(path);
  if (!doc.is_array()) throw ParseError(path.string() + ": batch file must be a JSON array");
  std::vector<BatchTask> tasks;
  for (const auto& t : doc) {
    BatchTask task;
    task.args.paper_path = jio::require_string(t, "paper", path.string());
    task.args.topic = jio::require_string(t, "topic", path.string());
    if (t.contains("prev")) task.args.prev_path = fs::path(t.at("prev").get<std::string>());
    if (t.contains("next")) task.args.next_path = fs::path(t.at("next").get<std::string>());
    if (t.contains("no_context")) task.args.allow_no_context = t.at("no_context").get<bool>();
    task.args.out_dir = jio::require_string(t, "out_dir", path.string());
    if (t.contains("recording")) task.recording = fs::path(t.at("recording").get<std::string>());
    tasks.push_back(std::move(task));
  }
  return tasks;
}

struct BatchOutcome {
  std::size_t succeeded = 0;
  std::vector<std::string> failures;  // "<out_dir>: <error>"
};

/// Runs independent tasks across jobs worker threads; each task gets its own
/// transport so sessions never interleave.
inline BatchOutcome run_batch(const Config& config, const std::vector<BatchTask>& tasks,
                              int jobs) {
  BatchOutcome outcome;
  std::atomic<std::size_t> next{0};
  std::mutex mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t index = next.fetch_add(1);
      if (index >= tasks.size()) return;
      const BatchTask& task = tasks[index];
      Config task_config = config;
      if (task.recording) {
        task_config.transport = TransportKind::replay;
        task_config.recording_path = *task.recording;
      }
      try {
        run_generate(task_config, task.args);
        std::lock_guard<std::mutex> lock(mutex);
        ++outcome.succeeded;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mutex);
        outcome.failures.push_back(task.args.out_dir.string() + ": " + e.what());
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (int i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return outcome;
}

}  // namespace slidegen::pipeline

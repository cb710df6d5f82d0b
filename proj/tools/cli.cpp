#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "evedge/error.hpp"
#include "evedge/io.hpp"

namespace evedge::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

struct StreamOptions {
  std::string events;
  std::string scene;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

struct Context {
  Globals globals;
  std::ostream& out;

  fs::path out_path(const std::string& name) const { return fs::path(globals.out_dir) / name; }
  fs::path config_dir() const {
    return globals.config.empty() ? fs::path(".") : fs::path(globals.config).parent_path();
  }
  json config_doc() const {
    if (globals.config.empty()) return json::object();
    return io::read_json(globals.config);
  }
  void emit(const std::string& name, const std::string& text) const {
    io::write_text(out_path(name), text);
    out << "wrote " << out_path(name).string() << '\n';
  }
  void emit_json(const std::string& name, const json& doc) const { emit(name, io::dump(doc)); }
};

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

SyntheticSceneSpec load_scene(const json& node, const fs::path& base,
                              std::optional<std::uint64_t> seed) {
  SyntheticSceneSpec scene = node.is_string()
                                 ? io::scene_from_json(io::read_json(resolve(base, node.get<std::string>())))
                                 : io::scene_from_json(node);
  if (seed) scene.seed = *seed;
  return scene;
}

SensorDims config_dims(const json& doc) {
  if (!doc.contains("sensor")) return {};
  const json& s = doc.at("sensor");
  try {
    return {s.at("width").get<std::uint32_t>(), s.at("height").get<std::uint32_t>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("sensor: ") + e.what());
  }
}

// Event stream from --events, --scene or the config's "events" / "scene".
std::vector<Event> load_stream(const Context& ctx, const StreamOptions& opt, const json& doc,
                               SensorDims dims) {
  if (!opt.events.empty()) return load_aer(opt.events, dims);
  if (!opt.scene.empty()) {
    const auto scene = load_scene(json(opt.scene), fs::path("."), ctx.globals.seed);
    if (scene.dims != dims) throw ValidationError("scene and sensor dimensions differ");
    return generate_synthetic(scene);
  }
  if (doc.contains("events"))
    return load_aer(resolve(ctx.config_dir(), doc.at("events").get<std::string>()), dims);
  if (doc.contains("scene")) {
    const auto scene = load_scene(doc.at("scene"), ctx.config_dir(), ctx.globals.seed);
    if (scene.dims != dims) throw ValidationError("scene and sensor dimensions differ");
    return generate_synthetic(scene);
  }
  throw ValidationError("no event source: pass --events or --scene, or set events/scene in --config");
}

// Flags override the config's sensor; a scene supplies its own dims otherwise.
SensorDims pick_dims(const Context& ctx, const StreamOptions& opt, const json& doc) {
  SensorDims dims = config_dims(doc);
  if (dims.area() == 0 && opt.events.empty()) {
    if (!opt.scene.empty())
      dims = load_scene(json(opt.scene), fs::path("."), std::nullopt).dims;
    else if (doc.contains("scene") && !doc.contains("events"))
      dims = load_scene(doc.at("scene"), ctx.config_dir(), std::nullopt).dims;
  }
  if (opt.width) dims.width = opt.width;
  if (opt.height) dims.height = opt.height;
  if (dims.width == 0 || dims.height == 0)
    throw ValidationError("sensor dimensions required (--width/--height, sensor in --config, or a scene)");
  return dims;
}

void add_stream_options(CLI::App* cmd, StreamOptions& opt) {
  cmd->add_option("--events", opt.events, "AER text file");
  cmd->add_option("--scene", opt.scene, "synthetic scene JSON");
  cmd->add_option("--width", opt.width, "sensor width");
  cmd->add_option("--height", opt.height, "sensor height");
}

PipelineConfig pipeline_config(const Context& ctx, const json& doc) {
  if (ctx.globals.config.empty())
    throw ValidationError("this command requires --config <pipeline.json>");
  return io::pipeline_from_json(doc, ctx.config_dir());
}

// ---------------------------------------------------------------------------

void cmd_gen_events(const Context& ctx, const std::string& scene_path) {
  json doc = ctx.config_doc();
  SyntheticSceneSpec scene;
  if (!scene_path.empty())
    scene = load_scene(json(scene_path), fs::path("."), ctx.globals.seed);
  else if (doc.contains("scene"))
    scene = load_scene(doc.at("scene"), ctx.config_dir(), ctx.globals.seed);
  else
    throw ValidationError("gen-events needs --scene or a config with a scene");
  const auto events = generate_synthetic(scene);
  ctx.emit("events.txt", serialize_aer(events));
  ctx.out << events.size() << " events\n";
}

struct ConvertOptions {
  StreamOptions stream;
  std::uint32_t bins = 0;
  std::int64_t period_us = 0;
  bool csv = false;
};

void cmd_convert(const Context& ctx, const ConvertOptions& opt) {
  const json doc = ctx.config_doc();
  const SensorDims dims = pick_dims(ctx, opt.stream, doc);
  std::uint32_t bins = opt.bins ? opt.bins : doc.value("bins", 5u);
  std::int64_t period = opt.period_us ? opt.period_us : doc.value("frame_period_us", std::int64_t{50'000});
  const auto events = load_stream(ctx, opt.stream, doc, dims);
  const BinningSpec spec{bins, dims};

  std::vector<SparseFrame> frames;
  ConversionStats total;
  std::uint64_t binned = 0;
  for (const EventWindow& w : partition_windows(events, period)) {
    ConversionStats stats;
    auto part = convert(w, spec, &stats);
    total.events_touched += stats.events_touched;
    total.entries_emitted += stats.entries_emitted;
    binned += w.events.size();
    std::move(part.begin(), part.end(), std::back_inserter(frames));
  }
  ctx.emit_json("frames.json", io::frames_to_json(frames));
  ctx.emit_json("convert_stats.json", {{"events_in", events.size()},
                                       {"events_binned", binned},
                                       {"events_touched", total.events_touched},
                                       {"entries_emitted", total.entries_emitted},
                                       {"frames", frames.size()},
                                       {"bins", bins},
                                       {"frame_period_us", period}});
  if (opt.csv) {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      std::ostringstream name;
      name << "frames/frame_" << std::setw(5) << std::setfill('0') << i << ".csv";
      io::write_text(ctx.out_path(name.str()), io::frame_csv(frames[i]));
    }
    ctx.out << "wrote " << frames.size() << " csv frames\n";
  }
}

struct AggregateOptions {
  std::string frames;
  std::size_t tasks = 0;
};

void cmd_aggregate(const Context& ctx, const AggregateOptions& opt) {
  if (opt.frames.empty()) throw ValidationError("aggregate needs --frames");
  const json doc = ctx.config_doc();
  const DsfaConfig dsfa = doc.contains("dsfa") ? io::dsfa_from_json(doc.at("dsfa")) : DsfaConfig{};
  const std::size_t tasks = opt.tasks ? opt.tasks : doc.value("tasks", std::size_t{1});
  auto frames = io::frames_from_json(io::read_json(opt.frames));
  if (frames.empty()) throw ValidationError("frame file holds no frames");
  const SensorDims dims{frames.front().width(), frames.front().height()};

  Aggregator agg(dsfa, dims, tasks);
  std::int64_t now = 0;
  for (SparseFrame& f : frames) {
    now = std::max(now, f.t_ref());
    agg.push(std::move(f), now);
  }
  agg.flush(now);

  json queues = json::array();
  for (std::size_t t = 0; t < agg.task_count(); ++t) {
    json items = json::array();
    for (const DispatchedPtr& d : agg.queue(t))
      items.push_back({{"sequence", d->sequence},
                       {"dispatch_time_us", d->dispatch_time},
                       {"source_frames", d->source_frames},
                       {"source_mass", d->source_mass.str()},
                       {"source_t_refs", d->source_t_refs},
                       {"frame", io::to_json(d->frame)}});
    queues.push_back({{"task", t}, {"queue", items}});
  }
  ctx.emit_json("dispatched.json", {{"tasks", queues}});
  ctx.emit_json("dsfa_metrics.json", io::dsfa_metrics_json(agg));
}

void cmd_simulate(const Context& ctx, const StreamOptions& opt) {
  const json doc = ctx.config_doc();
  const PipelineConfig cfg = pipeline_config(ctx, doc);
  const auto events = load_stream(ctx, opt, doc, cfg.dims);
  const RunReport r = run_pipeline(cfg, events);
  ctx.emit_json("report.json", io::to_json(r));
  ctx.emit("invocations.csv", io::invocations_csv(r));
}

json ratio(double num, double den) { return den != 0.0 ? json(num / den) : json(nullptr); }

void cmd_baseline(const Context& ctx, const StreamOptions& opt, const std::string& mode) {
  const json doc = ctx.config_doc();
  PipelineConfig cfg = pipeline_config(ctx, doc);
  if (mode == "count")
    cfg.static_mode = StaticMode::count;
  else if (mode == "interval")
    cfg.static_mode = StaticMode::interval;
  else if (!mode.empty())
    throw ValidationError("--static-mode must be count or interval");
  const auto events = load_stream(ctx, opt, doc, cfg.dims);
  const RunReport base = baseline_static(cfg, events);
  const RunReport dsfa = run_pipeline(cfg, events);
  ctx.emit_json("baseline_report.json", io::to_json(base));
  ctx.emit("baseline_invocations.csv", io::invocations_csv(base));
  ctx.emit_json("report.json", io::to_json(dsfa));
  ctx.emit("invocations.csv", io::invocations_csv(dsfa));
  const auto span = [](const RunReport& r) {
    return static_cast<double>(r.makespan_us - r.first_arrival_us);
  };
  ctx.emit_json("comparison.json",
                {{"static_mode", base.mode},
                 {"dsfa_makespan_us", dsfa.makespan_us},
                 {"static_makespan_us", base.makespan_us},
                 {"makespan_ratio", ratio(span(base), span(dsfa))},
                 {"dsfa_p95_frame_age_us", dsfa.p95_age_us},
                 {"static_p95_frame_age_us", base.p95_age_us},
                 {"p95_age_ratio", ratio(static_cast<double>(base.p95_age_us),
                                         static_cast<double>(dsfa.p95_age_us))},
                 {"dsfa_invocations", dsfa.invocations},
                 {"static_invocations", base.invocations},
                 {"dsfa_frames_discarded", dsfa.frames_discarded}});
}

// ---------------------------------------------------------------------------

struct ModelOptions {
  std::string graph;
  std::string profiles;
};

struct Model {
  MultiTaskGraph graph;
  PlatformProfile profile;
  std::unique_ptr<CostModel> cost;
};

std::string config_path(const Context& ctx, const json& doc, const std::string& flag,
                        const char* key) {
  if (!flag.empty()) return flag;
  if (doc.contains(key)) return resolve(ctx.config_dir(), doc.at(key).get<std::string>()).string();
  return {};
}

Model load_model(const Context& ctx, const json& doc, const ModelOptions& opt) {
  const std::string g = config_path(ctx, doc, opt.graph, "graph");
  const std::string p = config_path(ctx, doc, opt.profiles, "profiles");
  if (g.empty() || p.empty()) throw ValidationError("--graph and --profiles are required");
  Model m{io::load_graph(g), io::load_platform(p), nullptr};
  m.cost = std::make_unique<CostModel>(m.profile, m.graph);
  return m;
}

MappingCandidate policy_candidate(const std::string& policy, const Model& m) {
  if (policy == "rr-network") return rr_network(m.graph, *m.cost);
  if (policy == "rr-layer") return rr_layer(m.graph, *m.cost);
  throw ValidationError("--policy must be rr-network or rr-layer");
}

struct ScheduleOptions {
  ModelOptions model;
  std::string candidate;
  std::string policy = "rr-network";
};

void cmd_schedule(const Context& ctx, const ScheduleOptions& opt) {
  const json doc = ctx.config_doc();
  const Model m = load_model(ctx, doc, opt.model);
  const std::string cpath = config_path(ctx, doc, opt.candidate, "candidate");
  const MappingCandidate cand = cpath.empty()
                                    ? policy_candidate(opt.policy, m)
                                    : io::candidate_from_json(io::read_json(cpath), m.graph, *m.cost);
  const ExecutionGraph exec = lower(m.graph, cand, *m.cost);
  const Schedule sched = schedule(exec);
  const EnergyReport energy = estimate_energy(sched, exec, m.cost->powers());
  ctx.emit("timeline.csv", io::timeline_csv(sched, exec, m.graph, *m.cost));
  json report = io::schedule_json(sched, exec, m.graph, *m.cost, energy);
  report["candidate"] = io::candidate_to_json(cand, m.graph, *m.cost);
  ctx.emit_json("schedule.json", report);
  ctx.out << "makespan_us " << sched.latency.makespan << '\n';
}

struct MapOptions {
  ModelOptions model;
  std::string accuracy;
  double delta_a = 0.0;
  std::size_t population = 32;
  std::size_t generations = 50;
  std::optional<std::size_t> mutations;
  bool fp_only = false;
  std::string objective = "latency";
  std::vector<std::string> baselines;
  std::size_t threads = 1;
};

void cmd_map(const Context& ctx, const MapOptions& opt) {
  const json doc = ctx.config_doc();
  const Model m = load_model(ctx, doc, opt.model);
  const std::string apath = config_path(ctx, doc, opt.accuracy, "accuracy_model");
  std::unique_ptr<AccuracyModel> accuracy =
      apath.empty() ? std::make_unique<AdditiveAccuracyModel>(m.graph, *m.cost)
                    : io::accuracy_from_json(io::read_json(apath), m.graph, *m.cost);

  SearchConfig sc;
  sc.population = opt.population;
  sc.generations = opt.generations;
  sc.mutations = opt.mutations;
  sc.delta_a = opt.delta_a;
  sc.seed = ctx.globals.seed.value_or(0);
  sc.fp_only = opt.fp_only;
  sc.threads = opt.threads;
  if (opt.objective == "latency")
    sc.objective = Objective::latency;
  else if (opt.objective == "energy")
    sc.objective = Objective::energy;
  else
    throw ValidationError("--objective must be latency or energy");

  const SearchResult best = search(m.graph, *m.cost, *accuracy, sc);
  json cand = io::candidate_to_json(best.best, m.graph, *m.cost);
  cand["fitness"] = io::to_json(best.best_fitness);
  cand["search"] = {{"population", sc.population},
                    {"generations", sc.generations},
                    {"mutations", sc.mutation_count(m.graph.node_count())},
                    {"delta_a", sc.delta_a},
                    {"seed", sc.seed},
                    {"fp_only", sc.fp_only},
                    {"objective", opt.objective},
                    {"evaluations", best.evaluations},
                    {"unique_candidates", best.unique_candidates}};
  ctx.emit_json("best_candidate.json", cand);
  ctx.emit("history.csv", io::history_csv(best.history));

  const Evaluator eval(m.graph, *m.cost, *accuracy, sc.delta_a, sc.objective);
  std::ostringstream cmp;
  cmp.precision(17);
  cmp << "method,max_latency_us,feasible,energy_mj,objective\n";
  const auto row = [&](const std::string& name, const FitnessRecord& r) {
    cmp << name << ',' << r.max_latency_us << ',' << (r.feasible ? 1 : 0) << ','
        << r.energy_mj << ',' << r.objective << '\n';
  };
  row(opt.fp_only ? "nmp-fp" : "nmp", best.best_fitness);
  std::vector<std::string> baselines = opt.baselines;
  if (baselines.empty()) baselines = {"rr-network", "rr-layer"};
  for (const std::string& b : baselines) {
    if (b == "rr-network" || b == "rr-layer") {
      row(b, eval.evaluate(policy_candidate(b, m)));
    } else if (b == "random") {
      row(b, random_search(m.graph, *m.cost, *accuracy, sc).best_fitness);
    } else if (b == "exhaustive") {
      row(b, exhaustive_search(m.graph, *m.cost, *accuracy, sc).best_fitness);
    } else {
      throw ValidationError("unknown baseline '" + b + "'");
    }
  }
  ctx.emit("comparison.csv", cmp.str());
  ctx.out << "best max_latency_us " << best.best_fitness.max_latency_us
          << (best.best_fitness.feasible ? "" : " (infeasible)") << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Event-camera sparse-frame pipeline and heterogeneous network mapper", "evedge-cli"};
  app.require_subcommand(1);

  Globals globals;
  app.add_option("--config", globals.config, "JSON configuration file");
  app.add_option("--seed", globals.seed, "seed for all randomness");
  app.add_option("--out-dir", globals.out_dir, "output directory");

  std::string scene_path;
  auto* gen = app.add_subcommand("gen-events", "generate a synthetic event stream");
  gen->add_option("--scene", scene_path, "synthetic scene JSON");

  ConvertOptions conv;
  auto* convert_cmd = app.add_subcommand("convert", "events to sparse frames");
  add_stream_options(convert_cmd, conv.stream);
  convert_cmd->add_option("--bins", conv.bins, "bins per window");
  convert_cmd->add_option("--period-us", conv.period_us, "window length in us");
  convert_cmd->add_flag("--csv", conv.csv, "also write one CSV per frame");

  AggregateOptions agg;
  auto* agg_cmd = app.add_subcommand("aggregate", "merge sparse frames with DSFA");
  agg_cmd->add_option("--frames", agg.frames, "frames.json from convert");
  agg_cmd->add_option("--tasks", agg.tasks, "number of inference queues");

  StreamOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate", "end-to-end pipeline run");
  add_stream_options(sim_cmd, sim);

  StreamOptions base;
  std::string static_mode;
  auto* base_cmd = app.add_subcommand("baseline", "static framing baseline vs DSFA");
  add_stream_options(base_cmd, base);
  base_cmd->add_option("--static-mode", static_mode, "count or interval")
      ->check(CLI::IsMember({"count", "interval"}));

  ScheduleOptions sched;
  auto* sched_cmd = app.add_subcommand("schedule", "schedule a mapped multi-task graph");
  sched_cmd->add_option("--graph", sched.model.graph, "task graph JSON");
  sched_cmd->add_option("--profiles", sched.model.profiles, "platform profile JSON");
  sched_cmd->add_option("--candidate", sched.candidate, "mapping candidate JSON");
  sched_cmd->add_option("--policy", sched.policy, "rr-network or rr-layer when no candidate");

  MapOptions map;
  auto* map_cmd = app.add_subcommand("map", "evolutionary layer-to-device mapping");
  map_cmd->add_option("--graph", map.model.graph, "task graph JSON");
  map_cmd->add_option("--profiles", map.model.profiles, "platform profile JSON");
  map_cmd->add_option("--accuracy-model", map.accuracy, "accuracy model JSON");
  map_cmd->add_option("--delta-a", map.delta_a, "per-task accuracy degradation bound");
  map_cmd->add_option("--population", map.population, "population size");
  map_cmd->add_option("--generations", map.generations, "generations");
  map_cmd->add_option("--mutations", map.mutations, "genes re-rolled per mutation");
  map_cmd->add_flag("--fp-only", map.fp_only, "full precision only");
  map_cmd->add_option("--objective", map.objective, "latency or energy")
      ->check(CLI::IsMember({"latency", "energy"}));
  map_cmd->add_option("--baseline", map.baselines,
                      "rr-network, rr-layer, random, exhaustive (repeatable)")
      ->check(CLI::IsMember({"rr-network", "rr-layer", "random", "exhaustive"}));
  map_cmd->add_option("--threads", map.threads, "evaluation threads");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const Context ctx{globals, out};
  try {
    if (*gen) cmd_gen_events(ctx, scene_path);
    else if (*convert_cmd) cmd_convert(ctx, conv);
    else if (*agg_cmd) cmd_aggregate(ctx, agg);
    else if (*sim_cmd) cmd_simulate(ctx, sim);
    else if (*base_cmd) cmd_baseline(ctx, base, static_mode);
    else if (*sched_cmd) cmd_schedule(ctx, sched);
    else if (*map_cmd) cmd_map(ctx, map);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return e.is_validation() ? 1 : 2;
  } catch (const json::exception& e) {
    err << "error (validation): " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace evedge::cli

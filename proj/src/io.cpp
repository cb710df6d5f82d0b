#include "evedge/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "evedge/error.hpp"

namespace evedge::io {

namespace {

std::string context_message(const char* what, const std::exception& e) {
  return std::string(what) + ": " + e.what();
}

// Run a JSON decoding step, turning library type errors into ValidationError.
template <typename F>
auto decode(const char* what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const json::exception& e) {
    throw ValidationError(context_message(what, e));
  }
}

std::int64_t ceil_us(const json& v) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError("non-finite time value");
  return static_cast<std::int64_t>(std::ceil(d));
}

std::uint64_t integral_u64(const json& v, const char* what) {
  if (v.is_number_unsigned() || v.is_number_integer()) {
    const auto i = v.get<std::int64_t>();
    if (i < 0) throw ValidationError(std::string(what) + " must be non-negative");
    return static_cast<std::uint64_t>(i);
  }
  const double d = v.get<double>();
  if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19)
    throw ValidationError(std::string(what) + " must be a non-negative integer");
  return static_cast<std::uint64_t>(d);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

json rational_entry(const FrameEntry& e) {
  json row = json::array({e.row, e.col, e.value.num()});
  if (e.value.den() != 1) row.push_back(e.value.den());
  return row;
}

}  // namespace

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(context_message(path.string().c_str(), e));
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  write_text(path, dump(doc));
}

// ---------------------------------------------------------------------------

SyntheticSceneSpec scene_from_json(const json& doc) {
  return decode("scene", [&] {
    SyntheticSceneSpec s;
    s.dims.width = doc.at("width").get<std::uint32_t>();
    s.dims.height = doc.at("height").get<std::uint32_t>();
    s.duration_us = doc.at("duration_us").get<std::int64_t>();
    s.theta = doc.value("theta", 0.2);
    s.seed = doc.value("seed", std::uint64_t{0});
    for (const json& j : doc.at("segments")) {
      SceneSegment seg;
      seg.start_us = j.at("start_us").get<std::int64_t>();
      seg.end_us = j.at("end_us").get<std::int64_t>();
      seg.rate_eps = j.at("rate_eps").get<double>();
      if (j.contains("region")) {
        const json& r = j.at("region");
        seg.region = Rect{r.at("x").get<std::uint32_t>(), r.at("y").get<std::uint32_t>(),
                          r.at("width").get<std::uint32_t>(),
                          r.at("height").get<std::uint32_t>()};
      } else {
        seg.region = Rect{0, 0, s.dims.width, s.dims.height};
      }
      s.segments.push_back(seg);
    }
    s.validate();
    return s;
  });
}

json to_json(const SyntheticSceneSpec& s) {
  json segs = json::array();
  for (const SceneSegment& seg : s.segments)
    segs.push_back({{"start_us", seg.start_us},
                    {"end_us", seg.end_us},
                    {"rate_eps", seg.rate_eps},
                    {"region",
                     {{"x", seg.region.x},
                      {"y", seg.region.y},
                      {"width", seg.region.width},
                      {"height", seg.region.height}}}});
  return {{"width", s.dims.width}, {"height", s.dims.height},
          {"duration_us", s.duration_us}, {"theta", s.theta},
          {"seed", s.seed}, {"segments", segs}};
}

// ---------------------------------------------------------------------------

json to_json(const SparseFrame& f) {
  json pos = json::array();
  json neg = json::array();
  for (const FrameEntry& e : f.pos()) pos.push_back(rational_entry(e));
  for (const FrameEntry& e : f.neg()) neg.push_back(rational_entry(e));
  return {{"width", f.width()}, {"height", f.height()}, {"t_ref", f.t_ref()},
          {"pos", pos}, {"neg", neg}};
}

SparseFrame frame_from_json(const json& doc) {
  return decode("sparse frame", [&] {
    const SensorDims dims{doc.at("width").get<std::uint32_t>(),
                          doc.at("height").get<std::uint32_t>()};
    std::vector<RawEntry> entries;
    for (const auto& [name, channel] :
         {std::pair{"pos", Channel::pos}, std::pair{"neg", Channel::neg}}) {
      for (const json& e : doc.at(name)) {
        if (!e.is_array() || e.size() < 3 || e.size() > 4)
          throw ValidationError("frame entry must be [row, col, num(, den)]");
        const std::int64_t den = e.size() == 4 ? e[3].get<std::int64_t>() : 1;
        entries.push_back({e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>(), channel,
                           Rational(e[2].get<std::int64_t>(), den)});
      }
    }
    return SparseFrame::from_entries(entries, dims, doc.at("t_ref").get<std::int64_t>());
  });
}

json frames_to_json(std::span<const SparseFrame> frames) {
  json arr = json::array();
  for (const SparseFrame& f : frames) arr.push_back(to_json(f));
  return {{"frames", arr}};
}

std::vector<SparseFrame> frames_from_json(const json& doc) {
  return decode("frame list", [&] {
    std::vector<SparseFrame> out;
    for (const json& f : doc.at("frames")) out.push_back(frame_from_json(f));
    return out;
  });
}

std::string frame_csv(const SparseFrame& f) {
  std::ostringstream out;
  out << "channel,row,col,value\n";
  out.precision(17);
  for (const auto& [name, channel] :
       {std::pair{"pos", Channel::pos}, std::pair{"neg", Channel::neg}})
    for (const FrameEntry& e : f.channel(channel)) {
      out << name << ',' << e.row << ',' << e.col << ',';
      if (e.value.den() == 1)
        out << e.value.num();
      else
        out << e.value.to_double();
      out << '\n';
    }
  return out.str();
}

// ---------------------------------------------------------------------------

DsfaConfig dsfa_from_json(const json& doc) {
  return decode("dsfa config", [&] {
    DsfaConfig c;
    c.e_buf_size = doc.value("e_buf_size", c.e_buf_size);
    c.mb_size = doc.value("mb_size", c.mb_size);
    if (doc.contains("c_mode")) c.c_mode = parse_merge_mode(doc.at("c_mode").get<std::string>());
    c.mt_th_us = doc.value("mt_th_us", c.mt_th_us);
    c.md_th = doc.value("md_th", c.md_th);
    if (doc.contains("iq_depth")) {
      const json& d = doc.at("iq_depth");
      if (d.is_string() && (d == "inf" || d == "unbounded"))
        c.iq_depth = std::numeric_limits<std::size_t>::max();
      else
        c.iq_depth = d.get<std::size_t>();
    }
    c.validate();
    return c;
  });
}

json to_json(const DsfaConfig& c) {
  json depth = c.iq_depth == std::numeric_limits<std::size_t>::max() ? json("inf")
                                                                      : json(c.iq_depth);
  return {{"e_buf_size", c.e_buf_size}, {"mb_size", c.mb_size},
          {"c_mode", std::string(to_string(c.c_mode))}, {"mt_th_us", c.mt_th_us},
          {"md_th", c.md_th}, {"iq_depth", depth}};
}

namespace {

json age_stats(const std::vector<std::int64_t>& ages) {
  double mean = 0.0;
  for (std::int64_t a : ages) mean += static_cast<double>(a);
  if (!ages.empty()) mean /= static_cast<double>(ages.size());
  return {{"count", ages.size()},
          {"mean_us", mean},
          {"p50_us", percentile(ages, 0.50)},
          {"p95_us", percentile(ages, 0.95)},
          {"max_us", percentile(ages, 1.0)}};
}

json counters_json(const DsfaCounters& c) {
  return {{"ingested_frames", c.ingested_frames},
          {"ingested_mass", c.ingested_mass.str()},
          {"dispatched", c.dispatched},
          {"discarded", c.discarded},
          {"flushes", c.flushes},
          {"early_dispatches", c.early_dispatches}};
}

}  // namespace

json dsfa_metrics_json(const Aggregator& agg) {
  json tasks = json::array();
  for (std::size_t t = 0; t < agg.task_count(); ++t) {
    const TaskCounters& tc = agg.task_counters(t);
    tasks.push_back({{"task", t},
                     {"dispatched", tc.dispatched_frames},
                     {"consumed", tc.consumed_frames},
                     {"discarded", tc.discarded_frames},
                     {"discarded_source_frames", tc.discarded_source_frames},
                     {"queued", agg.queue(t).size()}});
  }
  return {{"config", to_json(agg.config())},
          {"counters", counters_json(agg.counters())},
          {"buffered_frames", agg.total_frames()},
          {"occupancy_histogram", agg.occupancy_histogram()},
          {"frame_age_at_dispatch", age_stats(agg.dispatch_ages())},
          {"tasks", tasks}};
}

// ---------------------------------------------------------------------------

PlatformProfile platform_from_json(const json& doc) {
  return decode("platform profile", [&] {
    PlatformProfile p;
    p.full_precision = doc.value("full_precision", p.full_precision);
    for (const json& d : doc.at("devices")) {
      DeviceProfile dev;
      dev.id = d.at("id").get<std::string>();
      dev.precisions = d.at("precisions").get<std::vector<std::string>>();
      dev.power_mw_active = d.value("power_mw_active", 0.0);
      dev.power_mw_idle = d.value("power_mw_idle", 0.0);
      if (d.contains("exec_us"))
        for (const auto& [layer, times] : d.at("exec_us").items())
          for (const auto& [prec, us] : times.items()) dev.exec_us[layer][prec] = ceil_us(us);
      p.devices.push_back(std::move(dev));
    }
    if (doc.contains("links"))
      for (const json& l : doc.at("links"))
        p.links.push_back(LinkProfile{l.at("src").get<std::string>(),
                                      l.at("dst").get<std::string>(),
                                      integral_u64(l.at("bandwidth_bps"), "bandwidth_bps"),
                                      l.contains("latency_us") ? ceil_us(l.at("latency_us"))
                                                               : 0});
    p.validate();
    return p;
  });
}

json to_json(const PlatformProfile& p) {
  json devices = json::array();
  for (const DeviceProfile& d : p.devices) {
    json exec = json::object();
    for (const auto& [layer, times] : d.exec_us)
      for (const auto& [prec, us] : times) exec[layer][prec] = us;
    devices.push_back({{"id", d.id},
                       {"precisions", d.precisions},
                       {"power_mw_active", d.power_mw_active},
                       {"power_mw_idle", d.power_mw_idle},
                       {"exec_us", exec}});
  }
  json links = json::array();
  for (const LinkProfile& l : p.links)
    links.push_back({{"src", l.src}, {"dst", l.dst}, {"bandwidth_bps", l.bandwidth_bps},
                     {"latency_us", l.latency_us}});
  return {{"full_precision", p.full_precision}, {"devices", devices}, {"links", links}};
}

PlatformProfile load_platform(const std::filesystem::path& path) {
  return platform_from_json(read_json(path));
}

MultiTaskGraph graph_from_json(const json& doc) {
  return decode("task graph", [&] {
    std::vector<TaskSpec> tasks;
    for (const json& t : doc.at("tasks")) {
      TaskSpec spec{t.at("id").get<std::string>(), {}};
      for (const json& l : t.at("layers"))
        spec.layers.emplace_back(l.at("id").get<std::string>(),
                                 integral_u64(l.value("out_bytes", json(0)), "out_bytes"));
      tasks.push_back(std::move(spec));
    }
    std::vector<std::pair<std::string, std::string>> edges;
    if (doc.contains("edges"))
      for (const json& e : doc.at("edges"))
        edges.emplace_back(e.at("from").get<std::string>(), e.at("to").get<std::string>());
    return MultiTaskGraph::build(std::move(tasks), edges);
  });
}

json to_json(const MultiTaskGraph& g) {
  json tasks = json::array();
  for (const TaskSpec& t : g.task_specs()) {
    json layers = json::array();
    for (const auto& [id, bytes] : t.layers) layers.push_back({{"id", id}, {"out_bytes", bytes}});
    tasks.push_back({{"id", t.id}, {"layers", layers}});
  }
  json edges = json::array();
  for (const auto& [a, b] : g.edge_ids()) edges.push_back({{"from", a}, {"to", b}});
  return {{"tasks", tasks}, {"edges", edges}};
}

MultiTaskGraph load_graph(const std::filesystem::path& path) {
  return graph_from_json(read_json(path));
}

MappingCandidate candidate_from_json(const json& doc, const MultiTaskGraph& graph,
                                     const CostModel& cost) {
  return decode("mapping candidate", [&] {
    MappingCandidate c;
    c.genes.resize(graph.node_count());
    std::vector<char> seen(graph.node_count(), 0);
    for (const json& a : doc.at("assignments")) {
      const std::string layer = a.at("layer").get<std::string>();
      const auto node = graph.find(layer);
      if (!node) throw CandidateInvalidError("candidate names unknown layer '" + layer + "'");
      const auto dev = cost.device_index(a.at("device").get<std::string>());
      const auto prec = cost.precision_index(a.at("precision").get<std::string>());
      if (!dev || !prec)
        throw CandidateInvalidError("candidate uses unknown device or precision for '" +
                                    layer + "'");
      if (seen[*node]) throw CandidateInvalidError("layer '" + layer + "' assigned twice");
      seen[*node] = 1;
      c.genes[*node] = Gene{*dev, *prec};
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i])
        throw CandidateInvalidError("layer '" + graph.node(i).id + "' is not assigned");
    cost.validate(c);
    return c;
  });
}

json candidate_to_json(const MappingCandidate& c, const MultiTaskGraph& graph,
                       const CostModel& cost) {
  json arr = json::array();
  for (std::size_t i = 0; i < c.genes.size(); ++i) {
    const LayerNode& n = graph.node(i);
    arr.push_back({{"layer", n.id},
                   {"task", graph.task_ids()[n.task]},
                   {"device", cost.device_ids()[c.genes[i].device]},
                   {"precision", cost.precision_names()[c.genes[i].precision]}});
  }
  return {{"assignments", arr}};
}

std::unique_ptr<AccuracyModel> accuracy_from_json(const json& doc, const MultiTaskGraph& graph,
                                                  const CostModel& cost) {
  return decode("accuracy model", [&]() -> std::unique_ptr<AccuracyModel> {
    if (doc.contains("lookup")) {
      auto model = std::make_unique<LookupAccuracyModel>(graph.task_count(), cost);
      for (const json& e : doc.at("lookup"))
        model->add(candidate_from_json(e, graph, cost),
                   e.at("delta_a").get<std::vector<double>>());
      return model;
    }
    const std::string agg = doc.value("aggregation", std::string("sum"));
    if (agg != "sum" && agg != "max")
      throw ValidationError("aggregation must be 'sum' or 'max'");
    auto model = std::make_unique<AdditiveAccuracyModel>(
        graph, cost,
        agg == "sum" ? AdditiveAccuracyModel::Aggregation::sum
                     : AdditiveAccuracyModel::Aggregation::max);
    if (doc.contains("degradation"))
      for (const auto& [layer, per_prec] : doc.at("degradation").items()) {
        const auto node = graph.find(layer);
        if (!node) throw ValidationError("accuracy model names unknown layer '" + layer + "'");
        for (const auto& [prec, value] : per_prec.items()) {
          const auto p = cost.precision_index(prec);
          if (!p) throw ValidationError("accuracy model names unknown precision '" + prec + "'");
          model->set(*node, *p, value.get<double>());
        }
      }
    return model;
  });
}

// ---------------------------------------------------------------------------

PipelineConfig pipeline_from_json(const json& doc, const std::filesystem::path& base_dir) {
  return decode("pipeline config", [&] {
    PipelineConfig c;
    const json& sensor = doc.at("sensor");
    c.dims = {sensor.at("width").get<std::uint32_t>(), sensor.at("height").get<std::uint32_t>()};
    c.frame_period_us = doc.value("frame_period_us", c.frame_period_us);
    c.bins = doc.value("bins", c.bins);
    c.tasks = doc.value("tasks", c.tasks);
    c.idle_dispatch = doc.value("idle_dispatch", c.idle_dispatch);
    if (doc.contains("dsfa")) c.dsfa = dsfa_from_json(doc.at("dsfa"));
    c.count_per_frame = doc.value("count_per_frame", c.count_per_frame);
    const std::string mode = doc.value("static_mode", std::string("interval"));
    if (mode == "interval")
      c.static_mode = StaticMode::interval;
    else if (mode == "count")
      c.static_mode = StaticMode::count;
    else
      throw ValidationError("static_mode must be 'interval' or 'count'");

    const json& s = doc.at("service");
    const std::string type = s.at("type").get<std::string>();
    if (type == "fixed") {
      c.service = {s.at("us").get<std::int64_t>(), 0};
    } else if (type == "affine") {
      c.service = {s.at("base_us").get<std::int64_t>(), s.at("per_frame_us").get<std::int64_t>()};
    } else if (type == "schedule") {
      const MultiTaskGraph graph = load_graph(resolve(base_dir, s.at("graph").get<std::string>()));
      const PlatformProfile profile =
          load_platform(resolve(base_dir, s.at("profiles").get<std::string>()));
      const CostModel cost(profile, graph);
      MappingCandidate cand;
      if (s.contains("candidate")) {
        cand = candidate_from_json(read_json(resolve(base_dir, s.at("candidate").get<std::string>())),
                                   graph, cost);
      } else {
        const std::string policy = s.value("policy", std::string("rr-network"));
        if (policy == "rr-network")
          cand = rr_network(graph, cost);
        else if (policy == "rr-layer")
          cand = rr_layer(graph, cost);
        else
          throw ValidationError("schedule service policy must be rr-network or rr-layer");
      }
      const Schedule sched = schedule(lower(graph, cand, cost));
      c.service = {sched.latency.makespan, s.value("per_frame_us", std::int64_t{0})};
    } else {
      throw ValidationError("service type must be fixed, affine or schedule");
    }
    c.validate();
    return c;
  });
}

json to_json(const RunReport& r) {
  return {{"mode", r.mode},
          {"events_in", r.events_in},
          {"events_binned", r.events_binned},
          {"frames_in", r.frames_in},
          {"frames_processed", r.frames_processed},
          {"frames_discarded", r.frames_discarded},
          {"invocations", r.invocations},
          {"first_arrival_us", r.first_arrival_us},
          {"makespan_us", r.makespan_us},
          {"mean_frame_age_us", r.mean_age_us},
          {"p95_frame_age_us", r.p95_age_us},
          {"max_backlog", r.max_backlog},
          {"processed_mass", r.processed_mass.str()},
          {"discarded_mass", r.discarded_mass.str()},
          {"dsfa", counters_json(r.dsfa)},
          {"occupancy_histogram", r.occupancy_histogram},
          {"throughput",
           {{"events_per_s", r.events_per_s},
            {"frames_per_s", r.frames_per_s},
            {"inferred_frames_per_s", r.inferred_frames_per_s}}}};
}

std::string invocations_csv(const RunReport& r) {
  std::ostringstream out;
  out << "task,start_us,end_us,frames,source_frames\n";
  for (const Invocation& i : r.timeline)
    out << i.task << ',' << i.start_us << ',' << i.end_us << ',' << i.frames << ','
        << i.source_frames << '\n';
  return out.str();
}

namespace {

std::string queue_name(std::size_t q, const ExecutionGraph& exec, const CostModel& cost) {
  return q == exec.memory_queue ? std::string("memory") : cost.device_ids().at(q);
}

std::string node_name(std::size_t n, const ExecutionGraph& exec, const MultiTaskGraph& graph) {
  const ExecNode& node = exec.nodes[n];
  if (node.kind == ExecKind::compute) return graph.node(node.layer).id;
  return "xfer:" + graph.node(node.layer).id + "->" + graph.node(node.consumer).id;
}

}  // namespace

std::string timeline_csv(const Schedule& sched, const ExecutionGraph& exec,
                         const MultiTaskGraph& graph, const CostModel& cost) {
  std::ostringstream out;
  out << "queue,node,start_us,end_us\n";
  for (std::size_t q = 0; q < sched.queues.size(); ++q)
    for (std::size_t n : sched.queues[q])
      out << queue_name(q, exec, cost) << ',' << node_name(n, exec, graph) << ','
          << sched.start(exec, n) << ',' << sched.end[n] << '\n';
  return out.str();
}

json schedule_json(const Schedule& sched, const ExecutionGraph& exec,
                   const MultiTaskGraph& graph, const CostModel& cost,
                   const EnergyReport& energy) {
  json tasks = json::object();
  for (std::size_t t = 0; t < graph.task_count(); ++t)
    tasks[graph.task_ids()[t]] = sched.latency.task_latency[t];
  json dev = json::object();
  for (std::size_t d = 0; d < cost.device_count(); ++d)
    dev[cost.device_ids()[d]] = {{"active_mj", energy.active_mj[d]},
                                 {"idle_mj", energy.idle_mj[d]}};
  std::size_t transfers = exec.size() - exec.compute_count;
  return {{"task_latency_us", tasks},
          {"makespan_us", sched.latency.makespan},
          {"transfer_nodes", transfers},
          {"energy",
           {{"devices", dev},
            {"active_mj", energy.total_active_mj},
            {"idle_mj", energy.total_idle_mj},
            {"total_mj", energy.total_mj}}}};
}

json to_json(const FitnessRecord& r) {
  return {{"max_latency_us", r.max_latency_us}, {"task_latency_us", r.task_latency_us},
          {"delta_a", r.delta_a},               {"feasible", r.feasible},
          {"violation", r.violation},           {"energy_mj", r.energy_mj},
          {"objective", r.objective}};
}

std::string history_csv(std::span<const HistoryEntry> history) {
  std::ostringstream out;
  out << "generation,best_latency_us,best_feasible,best_violation\n";
  for (const HistoryEntry& h : history)
    out << h.generation << ',' << h.best_latency_us << ',' << (h.best_feasible ? 1 : 0) << ','
        << h.best_violation << '\n';
  return out.str();
}

}  // namespace evedge::io

namespace evedge {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::parse: return "parse";
    case ErrorKind::bounds: return "bounds";
    case ErrorKind::ordering: return "ordering";
    case ErrorKind::spec: return "spec";
    case ErrorKind::shape: return "shape";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::domain: return "domain";
    case ErrorKind::validation: return "validation";
    case ErrorKind::profile_incomplete: return "profile_incomplete";
    case ErrorKind::cycle: return "cycle";
    case ErrorKind::candidate_invalid: return "candidate_invalid";
    case ErrorKind::link: return "link";
    case ErrorKind::infeasible_instance: return "infeasible_instance";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace evedge

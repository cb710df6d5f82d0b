#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "evedge/aer.hpp"
#include "evedge/dsfa.hpp"
#include "evedge/nmp.hpp"
#include "evedge/pipeline.hpp"
#include "evedge/platform.hpp"
#include "evedge/scheduler.hpp"
#include "evedge/sparse_frame.hpp"

namespace evedge::io {

using json = nlohmann::json;

/// Malformed or mistyped documents raise ValidationError.
json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& doc);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string dump(const json& doc);

SyntheticSceneSpec scene_from_json(const json& doc);
json to_json(const SyntheticSceneSpec& spec);

json to_json(const SparseFrame& frame);
SparseFrame frame_from_json(const json& doc);
json frames_to_json(std::span<const SparseFrame> frames);
std::vector<SparseFrame> frames_from_json(const json& doc);
/// "channel,row,col,value" rows, pos channel first.
std::string frame_csv(const SparseFrame& frame);

DsfaConfig dsfa_from_json(const json& doc);
json to_json(const DsfaConfig& config);
json dsfa_metrics_json(const Aggregator& agg);

PlatformProfile platform_from_json(const json& doc);
json to_json(const PlatformProfile& profile);
PlatformProfile load_platform(const std::filesystem::path& path);

MultiTaskGraph graph_from_json(const json& doc);
json to_json(const MultiTaskGraph& graph);
MultiTaskGraph load_graph(const std::filesystem::path& path);

MappingCandidate candidate_from_json(const json& doc, const MultiTaskGraph& graph,
                                     const CostModel& cost);
json candidate_to_json(const MappingCandidate& candidate, const MultiTaskGraph& graph,
                       const CostModel& cost);

std::unique_ptr<AccuracyModel> accuracy_from_json(const json& doc, const MultiTaskGraph& graph,
                                                  const CostModel& cost);

/// Relative paths inside the document resolve against base_dir.
PipelineConfig pipeline_from_json(const json& doc, const std::filesystem::path& base_dir);
json to_json(const RunReport& report);
std::string invocations_csv(const RunReport& report);

/// "queue,node,start_us,end_us" rows in queue order.
std::string timeline_csv(const Schedule& sched, const ExecutionGraph& exec,
                         const MultiTaskGraph& graph, const CostModel& cost);
json schedule_json(const Schedule& sched, const ExecutionGraph& exec,
                   const MultiTaskGraph& graph, const CostModel& cost,
                   const EnergyReport& energy);

json to_json(const FitnessRecord& record);
/// "generation,best_latency_us,best_feasible,best_violation" rows.
std::string history_csv(std::span<const HistoryEntry> history);

}  // namespace evedge::io

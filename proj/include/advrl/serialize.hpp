#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "advrl/attack.hpp"
#include "advrl/impostor.hpp"
#include "advrl/metrics.hpp"
#include "advrl/model.hpp"
#include "advrl/robustness.hpp"

// JSON encodings shared by checkpoints, reports and configuration files.
namespace advrl {

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainingMetadata& meta);
TrainingMetadata metadata_from_json(const nlohmann::json& j);

nlohmann::json to_json(const AttackConfig& config);
/// Fields absent from `j` keep the values already in `config`.
void update_from_json(AttackConfig& config, const nlohmann::json& j);

nlohmann::json to_json(const DistortionReport& report);
nlohmann::json to_json(const std::vector<ClassProbability>& report);

/// Every AttackResult field except the image tensors and the trace, which
/// are written separately as PGM and CSV.
nlohmann::json to_json(const AttackResult& result);

/// iteration,loss,target_prob,distortion
std::string trace_csv(const std::vector<TracePoint>& trace);

nlohmann::json to_json(const PairSweepReport& report);
/// K x K success-rate matrix; diagonal cells hold "degenerate".
std::string sweep_matrix_csv(const PairSweepReport& report);
nlohmann::json to_json(const TransformReport& report);
nlohmann::json to_json(const TransferReport& report);
nlohmann::json to_json(const StepControlReport& report);
nlohmann::json to_json(const SynthesisReport& report);
nlohmann::json to_json(const ConfidenceSummary& summary);
nlohmann::json to_json(const ImpostorReport& report);
nlohmann::json to_json(const ImpostorConfig& config);

/// Pretty-printed with a trailing newline.
void write_json(const nlohmann::json& j, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace advrl

#ifndef HMMFDP_IO_HPP
#define HMMFDP_IO_HPP

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmmfdp/experiments.hpp"

namespace hmmfdp {

inline constexpr int kSchemaVersion = 1;

// Shortest-exact decimal rendering used in CSV output (JSON output relies on
// the serializer's round-trip formatting).
std::string format_double(double v);

// ---- CSV --------------------------------------------------------------------

// One column with header "x"; throws DataError with the line number on
// malformed content.
std::vector<double> read_observations_csv(const std::filesystem::path& path);
void write_observations_csv(const std::filesystem::path& path,
                            std::span<const double> x);
void write_theta_csv(const std::filesystem::path& path,
                     std::span<const int> theta);
std::vector<int> read_theta_csv(const std::filesystem::path& path);

// 1-based indices, one per line.
Selection read_selection_file(const std::filesystem::path& path,
                              std::size_t m);

// ---- JSON -------------------------------------------------------------------

nlohmann::json density_to_json(const EmissionDensity& density);
EmissionDensity density_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});

nlohmann::json model_to_json(const ModelParams& params,
                             const EmTrace* trace = nullptr);
ModelParams model_from_json(const nlohmann::json& j,
                            const std::filesystem::path& base_dir = {});
ModelParams read_model_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path,
                      const ModelParams& params,
                      const EmTrace* trace = nullptr);

EmConfig em_config_from_json(const nlohmann::json& j);

SelectionPolicy policy_from_json(const nlohmann::json& j, bool allow_unsafe,
                                 const std::filesystem::path& base_dir,
                                 std::size_t m);

nlohmann::json load_json_file(const std::filesystem::path& path);

ExperimentGrid grid_from_json(const nlohmann::json& j, bool allow_unsafe,
                              const std::filesystem::path& base_dir);

void write_records_csv(const std::filesystem::path& path,
                       const ExperimentGrid& grid, const GridResult& result);
nlohmann::json summary_to_json(const ExperimentGrid& grid,
                               const GridResult& result);

}  // namespace hmmfdp

#endif

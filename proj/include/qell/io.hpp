#pragma once

#include "qell/characterization.hpp"
#include "qell/detection.hpp"
#include "qell/estimation.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace qell {

using nlohmann::json;

inline constexpr int report_schema_version = 1;

/// Shortest round-trip decimal form of a double (%.17g trimmed).
std::string format_double(double v);

/// FNV-1a 64-bit over a string, as a fixed-width hex digest.
std::string fnv1a_hex(const std::string& text);

// Sweep datasets: a CSV with the exact header `angle_rad,counts,integration_s`
// plus a JSON sidecar carrying everything needed to rebuild the dataset
// bit-exactly (seed, model, fixed settings, ground truth, provenance).
void write_sweep_csv(const std::filesystem::path& path, const SweepDataset& ds);
json sweep_meta_json(const SweepDataset& ds, const std::string& csv_name,
                     const std::string& config_hash);
void write_sweep_meta(const std::filesystem::path& path, const SweepDataset& ds,
                      const std::string& csv_name, const std::string& config_hash);
SweepDataset read_sweep(const std::filesystem::path& csv_path,
                        const std::filesystem::path& meta_path);
SweepDataset read_sweep_csv_only(const std::filesystem::path& csv_path);

json detection_to_json(const DetectionModel& m);
DetectionModel detection_from_json(const json& j);

json fit_result_to_json(const FitResult& r);
json sensitivity_to_json(const SensitivityReport& r);

// Tomography count table: CSV with columns basis_signal,basis_idler,counts.
void write_tomography_csv(const std::filesystem::path& path, const TomographyCounts& counts);
TomographyCounts read_tomography_csv(const std::filesystem::path& path);

// Density matrix: 16 complex entries, row-major, [re, im] pairs.
json rho_to_json(const Mat4& rho);
Mat4 rho_from_json(const json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace qell

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "proxmsm/dataset.hpp"
#include "proxmsm/dgm.hpp"
#include "proxmsm/estimators.hpp"
#include "proxmsm/oracle.hpp"

namespace proxmsm {

// RFC-4180 CSV with a header row; numbers parsed as doubles.
struct CsvData {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;  // column-major, aligned with header
};
CsvData read_csv(const std::filesystem::path& path);

// Canonical simulator output: columns y,a0,a1,z0,z1,w0,w1,x0,x1 (multi-column roles
// get _1.._m suffixes), values with 17 significant digits. Optional latent columns
// u0,u1 are appended for debugging and never referenced by the role map.
void write_dataset_csv(const PanelDataset& data, const std::filesystem::path& path,
                       const Eigen::VectorXd* u0 = nullptr,
                       const Eigen::VectorXd* u1 = nullptr);

// Role-map sidecar: {"roles": {...}, "support": "all"|"monotone"|[[a0,a1],...]}.
// Unknown keys anywhere are errors.
struct RoleMapFile {
    RoleMap roles;
    TreatmentSupport support = TreatmentSupport::all();
};
RoleMapFile read_role_map(const std::filesystem::path& path);
void write_role_map(const RoleMapFile& rm, const std::filesystem::path& path);
RoleMapFile canonical_role_map(const PanelDataset& data);

PanelDataset load_dataset(const std::filesystem::path& csv_path,
                          const std::filesystem::path& rolemap_path);

// DgmParams as JSON; omitted fields keep their defaults, unknown keys are errors.
DgmParams dgm_params_from_json_file(const std::filesystem::path& path);
std::string dgm_params_to_json(const DgmParams& params);

std::string estimate_report_to_json(const EstimateReport& report, const std::string& msmm_kind);

DiscreteWorld world_from_json_file(const std::filesystem::path& path);
std::string world_to_json(const DiscreteWorld& world);

// Writes via a temp file in the same directory plus rename.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);  // 17 significant digits, round-trip exact

}  // namespace proxmsm

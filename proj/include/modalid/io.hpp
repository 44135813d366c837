#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "modalid/additive_model.hpp"
#include "modalid/frf.hpp"
#include "modalid/ipem.hpp"
#include "modalid/modal_model.hpp"
#include "modalid/realization.hpp"
#include "modalid/riv.hpp"

namespace modalid::io {

using nlohmann::json;

json load_json(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const json& doc);

/// Version tags of the artifact documents.
inline constexpr const char* kAdditiveVersion = "additive-v1";
inline constexpr const char* kModalVersion = "modal-v1";
inline constexpr const char* kStateSpaceVersion = "ss-v1";
inline constexpr const char* kCovarianceVersion = "covariance-v1";

json to_json(const AdditiveParameters& params);
AdditiveParameters additive_from_json(const json& doc);

json to_json(const ModalParameters& rho);
ModalParameters modal_from_json(const json& doc);

json to_json(const StateSpace& ss);
StateSpace state_space_from_json(const json& doc);

/// Dense matrix as {"rows", "cols", "data"} with row-major data.
json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const json& doc, const std::string& what);

/// `row,col,value` CSV (0-based indices) plus a JSON sidecar naming each index.
void save_covariance(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path,
                     const CovarianceEstimate& cov);
/// Reads back the matrix and structure; the information matrix is left empty.
CovarianceEstimate load_covariance(const std::filesystem::path& csv_path, const std::filesystem::path& sidecar_path);

struct RivTraceRow {
    int iter;
    double cost;
    double rel_change;
};

std::vector<RivTraceRow> riv_trace_rows(const RivResult& result);
void save_riv_trace(const std::filesystem::path& path, const std::vector<RivTraceRow>& rows);
void save_ipem_trace(const std::filesystem::path& path, const std::vector<IpemTraceRow>& rows);

/// `freq_hz,sv1,...` with squared singular values.
void save_cmif(const std::filesystem::path& path, const CmifCurves& curves);

}  // namespace modalid::io

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "modalid/frf.hpp"
#include "modalid/ipem.hpp"
#include "modalid/modal_model.hpp"
#include "modalid/realization.hpp"
#include "modalid/riv.hpp"
#include "modalid/synth.hpp"

namespace modalid {

struct FlexibleInit {
    /// Explicit initial natural frequencies [Hz]; ignored when use_cmif is set.
    std::vector<double> frequencies_hz;
    bool use_cmif = false;
    double prominence_factor = 10.0;
    std::optional<std::size_t> max_modes;
};

struct FitConfig {
    std::filesystem::path frf_path;
    double min_freq_hz = 0.0;
    WeightingScheme weighting;
    DampingModel damping = DampingModel::general;
    std::size_t n_rbm = 0;
    FlexibleInit flexible;
    double initial_zeta = 0.01;
    bool include_dc = false;
    RivOptions riv;
    IpemOptions ipem;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;

    /// Checks option ranges; file existence is checked when loading.
    void validate() const;
};

/// Relative paths inside the document resolve against `base_dir`.
FitConfig parse_fit_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
FitConfig load_fit_config(const std::filesystem::path& path);

/// Everything the fit produces; members fill in stage by stage.
struct FitState {
    FrfDataset data;
    HermitianSequence weights;
    std::vector<double> initial_frequencies_hz;
    std::optional<AdditiveParameters> initial;
    std::optional<RivResult> riv;
    std::optional<CovarianceEstimate> covariance;
    std::optional<SvdInitResult> init;
    std::optional<IpemResult> ipem;
    /// Weighted additive-model cost of every Gauss-Newton iterate.
    std::vector<double> modal_cost_trace;
    std::optional<StateSpace> ss;
    std::vector<std::string> warnings;
};

/// Notified after every completed stage with its name.
using StageCallback = std::function<void(const std::string&, const FitState&)>;

/// Runs weighting, order selection, Stage 1, covariance, Stage 2 and the
/// realization on an already loaded dataset. Errors carry the stage name.
FitState run_fit(const FrfDataset& data, const FitConfig& config, const StageCallback& on_stage = {});

/// Fit report document with stage costs, traces, residue diagnostics and
/// per-frequency weighted residual norms.
nlohmann::json fit_report(const FitState& state, const FitConfig& config);

/// Loads the FRF, runs the fit, and writes every artifact into config.output_dir.
/// A failing stage leaves the earlier artifacts plus a report naming the last
/// completed stage, then rethrows.
FitState cmd_fit(const FitConfig& config);

SynthSpec parse_synth_spec(const nlohmann::json& doc);

/// Frequency grid from {"frequencies_hz": [...]} or {"f_lo_hz", "f_hi_hz", "n", "spacing"}.
FrequencyGrid parse_grid_spec(const nlohmann::json& doc);

}  // namespace modalid

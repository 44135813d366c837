#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "modalid/hermitian_sequence.hpp"
#include "modalid/types.hpp"

namespace modalid {

/// Strictly increasing, positive angular frequencies [rad/s].
class FrequencyGrid {
public:
    FrequencyGrid() = default;
    explicit FrequencyGrid(std::vector<double> omegas);

    static FrequencyGrid from_hz(const std::vector<double>& freqs_hz);
    /// n points log-spaced between f_lo and f_hi [Hz], endpoints included.
    static FrequencyGrid log_spaced_hz(double f_lo, double f_hi, std::size_t n);
    static FrequencyGrid linear_spaced_hz(double f_lo, double f_hi, std::size_t n);

    std::size_t size() const { return omegas_.size(); }
    double operator[](std::size_t k) const { return omegas_[k]; }
    /// Frequency in Hz; exact input value when the grid was built from Hz.
    double hz(std::size_t k) const { return hz_[k]; }
    const std::vector<double>& omegas() const { return omegas_; }

private:
    std::vector<double> omegas_;
    std::vector<double> hz_;
};

/// Nonparametric FRF data G(w_k) with optional covariance of vec(G(w_k)).
class FrfDataset {
public:
    FrfDataset() = default;
    FrfDataset(FrequencyGrid grid, std::vector<MatrixXcd> frf,
               std::optional<HermitianSequence> covariance = std::nullopt);

    const FrequencyGrid& grid() const { return grid_; }
    std::size_t size() const { return grid_.size(); }
    Index n_outputs() const { return n_outputs_; }
    Index n_inputs() const { return n_inputs_; }
    Index vec_size() const { return n_outputs_ * n_inputs_; }

    const MatrixXcd& frf(std::size_t k) const { return frf_[k]; }
    const std::vector<MatrixXcd>& frf() const { return frf_; }
    const std::optional<HermitianSequence>& covariance() const { return covariance_; }

    /// Same data multiplied by c; covariance scales by c^2.
    FrfDataset scaled(double c) const;
    /// Keeps lines with frequency >= min_hz.
    FrfDataset truncated_below(double min_hz) const;

private:
    FrequencyGrid grid_;
    Index n_outputs_ = 0;
    Index n_inputs_ = 0;
    std::vector<MatrixXcd> frf_;
    std::optional<HermitianSequence> covariance_;
};

enum class WeightingKind { identity, inverse_magnitude, inverse_magnitude_squared, inverse_variance };

struct WeightingScheme {
    WeightingKind kind = WeightingKind::inverse_magnitude;
    /// Floor on |G| entries; defaults to 1e-12 times the largest entry magnitude.
    std::optional<double> magnitude_floor;
};

WeightingKind parse_weighting_kind(const std::string& name);
std::string to_string(WeightingKind kind);

/// Per-frequency weighting W(w_k) of size (ny*nu)^2.
HermitianSequence build_weighting(const FrfDataset& data, const WeightingScheme& scheme);

struct CmifCurves {
    FrequencyGrid grid;
    /// Squared singular values per frequency, descending.
    std::vector<VectorXd> values;

    Index n_curves() const { return values.empty() ? 0 : values.front().size(); }
    VectorXd curve(Index i) const;
};

CmifCurves cmif(const FrfDataset& data);

struct CmifPeak {
    std::size_t index;  ///< grid index
    double omega;       ///< rad/s
    double height;      ///< first squared singular value at the peak
    int multiplicity;
};

/// Local maxima of the first CMIF curve above prominence_factor times its median.
std::vector<CmifPeak> pick_modes(const CmifCurves& curves, double prominence_factor = 10.0,
                                 std::optional<std::size_t> max_modes = std::nullopt);

/// Reads the FRF CSV format (`freq_hz,out_idx,in_idx,re,im[,var]`), plus an
/// optional `<stem>.cov.csv` companion with full covariance blocks.
FrfDataset load_frf(const std::filesystem::path& path, double min_freq_hz = 0.0);

/// Writes the FRF CSV. Diagonal covariances go into the `var` column; full
/// covariances into the companion file.
void save_frf(const std::filesystem::path& path, const FrfDataset& data);

std::filesystem::path covariance_companion_path(const std::filesystem::path& frf_path);

}  // namespace modalid

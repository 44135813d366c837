#include "modalid/frf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "text.hpp"

namespace modalid {

FrequencyGrid::FrequencyGrid(std::vector<double> omegas) : omegas_(std::move(omegas)) {
    hz_.resize(omegas_.size());
    for (std::size_t k = 0; k < omegas_.size(); ++k) hz_[k] = omegas_[k] / (2.0 * kPi);
    for (std::size_t k = 0; k < omegas_.size(); ++k) {
        if (!std::isfinite(omegas_[k]) || omegas_[k] <= 0.0)
            throw ConfigError("frequency grid entries must be finite and positive (index " +
                              std::to_string(k) + ")");
        if (k > 0 && !(omegas_[k] > omegas_[k - 1]))
            throw ConfigError("frequency grid must be strictly increasing (index " + std::to_string(k) +
                              ")");
    }
}

FrequencyGrid FrequencyGrid::from_hz(const std::vector<double>& freqs_hz) {
    std::vector<double> w(freqs_hz.size());
    std::transform(freqs_hz.begin(), freqs_hz.end(), w.begin(), [](double f) { return 2.0 * kPi * f; });
    FrequencyGrid grid(std::move(w));
    grid.hz_ = freqs_hz;
    return grid;
}

FrequencyGrid FrequencyGrid::log_spaced_hz(double f_lo, double f_hi, std::size_t n) {
    if (!(f_lo > 0.0) || !(f_hi > f_lo) || n < 2) {
        if (n == 1 && f_lo > 0.0) return from_hz({f_lo});
        throw ConfigError("log-spaced grid needs 0 < f_lo < f_hi and at least two points");
    }
    std::vector<double> f(n);
    const double a = std::log(f_lo), b = std::log(f_hi);
    for (std::size_t k = 0; k < n; ++k) f[k] = std::exp(a + (b - a) * double(k) / double(n - 1));
    f.front() = f_lo;
    f.back() = f_hi;
    return from_hz(f);
}

FrequencyGrid FrequencyGrid::linear_spaced_hz(double f_lo, double f_hi, std::size_t n) {
    if (!(f_lo > 0.0) || !(f_hi > f_lo) || n < 2) {
        if (n == 1 && f_lo > 0.0) return from_hz({f_lo});
        throw ConfigError("linear grid needs 0 < f_lo < f_hi and at least two points");
    }
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = f_lo + (f_hi - f_lo) * double(k) / double(n - 1);
    return from_hz(f);
}

FrfDataset::FrfDataset(FrequencyGrid grid, std::vector<MatrixXcd> frf,
                       std::optional<HermitianSequence> covariance)
    : grid_(std::move(grid)), frf_(std::move(frf)), covariance_(std::move(covariance)) {
    if (frf_.size() != grid_.size())
        throw ConfigError("FRF count does not match the frequency grid");
    if (frf_.empty()) throw ConfigError("FRF dataset is empty");
    n_outputs_ = frf_.front().rows();
    n_inputs_ = frf_.front().cols();
    if (n_outputs_ == 0 || n_inputs_ == 0) throw ConfigError("FRF matrices must be non-empty");
    for (std::size_t k = 0; k < frf_.size(); ++k) {
        if (frf_[k].rows() != n_outputs_ || frf_[k].cols() != n_inputs_)
            throw ConfigError("FRF matrix at index " + std::to_string(k) + " has inconsistent shape");
        if (!frf_[k].allFinite())
            throw ConfigError("FRF matrix at index " + std::to_string(k) + " has non-finite entries");
    }
    if (covariance_) {
        if (covariance_->size() != frf_.size() || covariance_->dim() != vec_size())
            throw ConfigError("FRF covariance does not match the dataset dimensions");
        for (std::size_t k = 0; k < frf_.size(); ++k) {
            if (covariance_->is_diagonal()) {
                if ((covariance_->diagonal(k).array() < 0.0).any() || !covariance_->diagonal(k).allFinite())
                    throw ConfigError("FRF variances must be finite and non-negative (index " +
                                      std::to_string(k) + ")");
                continue;
            }
            const MatrixXcd c = covariance_->matrix(k);
            const double scale = std::max(c.norm(), std::numeric_limits<double>::min());
            if ((c - c.adjoint()).norm() > 1e-12 * scale)
                throw ConfigError("FRF covariance is not Hermitian at index " + std::to_string(k));
            if (covariance_->min_eigenvalue(k) < -1e-10 * scale)
                throw ConfigError("FRF covariance is not positive semi-definite at index " +
                                  std::to_string(k));
        }
    }
}

FrfDataset FrfDataset::scaled(double c) const {
    std::vector<MatrixXcd> g = frf_;
    for (auto& m : g) m *= c;
    std::optional<HermitianSequence> cov;
    if (covariance_) cov = covariance_->scaled(c * c);
    return FrfDataset(grid_, std::move(g), std::move(cov));
}

FrfDataset FrfDataset::truncated_below(double min_hz) const {
    std::vector<double> w, hz;
    std::vector<MatrixXcd> g;
    std::vector<VectorXd> diag;
    std::vector<MatrixXcd> full;
    for (std::size_t k = 0; k < size(); ++k) {
        if (grid_.hz(k) < min_hz) continue;
        w.push_back(grid_[k]);
        hz.push_back(grid_.hz(k));
        g.push_back(frf_[k]);
        if (covariance_) {
            if (covariance_->is_diagonal())
                diag.push_back(covariance_->diagonal(k));
            else
                full.push_back(covariance_->matrix(k));
        }
    }
    if (w.empty()) throw ConfigError("no frequencies remain after truncation");
    std::optional<HermitianSequence> cov;
    if (covariance_)
        cov = covariance_->is_diagonal() ? HermitianSequence::from_diagonals(std::move(diag))
                                         : HermitianSequence::from_matrices(std::move(full));
    return FrfDataset(FrequencyGrid::from_hz(hz), std::move(g), std::move(cov));
}

WeightingKind parse_weighting_kind(const std::string& name) {
    if (name == "identity") return WeightingKind::identity;
    if (name == "inverse-magnitude") return WeightingKind::inverse_magnitude;
    if (name == "inverse-magnitude-squared") return WeightingKind::inverse_magnitude_squared;
    if (name == "inverse-variance") return WeightingKind::inverse_variance;
    throw ConfigError("unknown weighting scheme '" + name + "'");
}

std::string to_string(WeightingKind kind) {
    switch (kind) {
        case WeightingKind::identity: return "identity";
        case WeightingKind::inverse_magnitude: return "inverse-magnitude";
        case WeightingKind::inverse_magnitude_squared: return "inverse-magnitude-squared";
        case WeightingKind::inverse_variance: return "inverse-variance";
    }
    return "unknown";
}

HermitianSequence build_weighting(const FrfDataset& data, const WeightingScheme& scheme) {
    const std::size_t n = data.size();
    const Index q = data.vec_size();
    switch (scheme.kind) {
        case WeightingKind::identity: return HermitianSequence::identity(n, q);
        case WeightingKind::inverse_magnitude:
        case WeightingKind::inverse_magnitude_squared: {
            double floor;
            if (scheme.magnitude_floor) {
                floor = *scheme.magnitude_floor;
                if (!(floor > 0.0)) throw ConfigError("magnitude_floor must be positive");
            } else {
                double max_mag = 0.0;
                for (const auto& g : data.frf()) max_mag = std::max(max_mag, g.cwiseAbs().maxCoeff());
                floor = std::max(1e-12 * max_mag, std::numeric_limits<double>::min());
            }
            const bool squared = scheme.kind == WeightingKind::inverse_magnitude_squared;
            std::vector<VectorXd> diag(n);
            for (std::size_t k = 0; k < n; ++k) {
                VectorXd mag = vec(data.frf(k)).cwiseAbs().cwiseMax(floor);
                diag[k] = squared ? VectorXd(mag.array().square().inverse()) : VectorXd(mag.cwiseInverse());
            }
            return HermitianSequence::from_diagonals(std::move(diag));
        }
        case WeightingKind::inverse_variance: {
            if (!data.covariance())
                throw ConfigError("inverse-variance weighting requires an FRF covariance");
            const auto& cov = *data.covariance();
            if (cov.is_diagonal()) {
                std::vector<VectorXd> diag(n);
                for (std::size_t k = 0; k < n; ++k) {
                    const VectorXd& v = cov.diagonal(k);
                    if ((v.array() <= 0.0).any())
                        throw NumericalError("singular FRF covariance at frequency index " + std::to_string(k));
                    diag[k] = v.cwiseInverse();
                }
                return HermitianSequence::from_diagonals(std::move(diag));
            }
            std::vector<MatrixXcd> full(n);
            for (std::size_t k = 0; k < n; ++k) {
                const MatrixXcd c = cov.matrix(k);
                Eigen::LLT<MatrixXcd> llt(c);
                if (llt.info() != Eigen::Success)
                    throw NumericalError("singular FRF covariance at frequency index " + std::to_string(k));
                MatrixXcd inv = llt.solve(MatrixXcd::Identity(q, q));
                full[k] = 0.5 * (inv + inv.adjoint());
            }
            return HermitianSequence::from_matrices(std::move(full));
        }
    }
    throw ConfigError("unknown weighting scheme");
}

VectorXd CmifCurves::curve(Index i) const {
    VectorXd c(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) c[Index(k)] = values[k][i];
    return c;
}

CmifCurves cmif(const FrfDataset& data) {
    CmifCurves out{data.grid(), {}};
    out.values.reserve(data.size());
    for (const auto& g : data.frf()) {
        Eigen::JacobiSVD<MatrixXcd> svd(g);
        out.values.push_back(svd.singularValues().array().square().matrix());
    }
    return out;
}

namespace {

bool is_local_max(const VectorXd& c, Index k) {
    return k > 0 && k + 1 < c.size() && c[k] > c[k - 1] && c[k] >= c[k + 1];
}

double median(VectorXd v) {
    std::sort(v.data(), v.data() + v.size());
    const Index n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<CmifPeak> pick_modes(const CmifCurves& curves, double prominence_factor,
                                 std::optional<std::size_t> max_modes) {
    if (curves.values.size() < 3) throw ConfigError("peak picking needs at least 3 grid points");
    if (!(prominence_factor > 1.0)) throw ConfigError("prominence_factor must exceed 1");
    const VectorXd first = curves.curve(0);
    const double threshold = prominence_factor * median(first);
    std::vector<VectorXd> others;
    for (Index i = 1; i < curves.n_curves(); ++i) others.push_back(curves.curve(i));

    std::vector<CmifPeak> peaks;
    for (Index k = 1; k + 1 < first.size(); ++k) {
        if (!is_local_max(first, k) || !(first[k] > threshold)) continue;
        int multiplicity = 1;
        for (const auto& c : others) {
            bool found = false;
            for (Index j = std::max<Index>(k - 1, 0); j <= std::min<Index>(k + 1, c.size() - 1); ++j)
                found = found || is_local_max(c, j);
            multiplicity += found ? 1 : 0;
        }
        peaks.push_back({std::size_t(k), curves.grid[std::size_t(k)], first[k], multiplicity});
    }
    if (max_modes && peaks.size() > *max_modes) {
        std::stable_sort(peaks.begin(), peaks.end(),
                         [](const CmifPeak& a, const CmifPeak& b) { return a.height > b.height; });
        peaks.resize(*max_modes);
        std::sort(peaks.begin(), peaks.end(),
                  [](const CmifPeak& a, const CmifPeak& b) { return a.index < b.index; });
    }
    return peaks;
}

std::filesystem::path covariance_companion_path(const std::filesystem::path& frf_path) {
    auto p = frf_path;
    p.replace_extension(".cov.csv");
    return p;
}

namespace {

struct Entry {
    Complex value;
    double var = 0.0;
};

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

std::vector<MatrixXcd> read_covariance_companion(const std::filesystem::path& path,
                                                 const std::vector<double>& freqs_hz, Index q) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open covariance file '" + path.string() + "'");
    std::map<double, std::size_t> index;
    for (std::size_t k = 0; k < freqs_hz.size(); ++k) index[freqs_hz[k]] = k;
    std::vector<MatrixXcd> out(freqs_hz.size(), MatrixXcd::Zero(q, q));
    std::vector<std::vector<bool>> seen(freqs_hz.size(), std::vector<bool>(std::size_t(q * q), false));
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line) || text::trim(line) != "freq_hz,row,col,re,im")
        parse_fail(path, lineno, "expected header 'freq_hz,row,col,re,im'");
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto f = text::split(line);
        double fr, re, im;
        long long r, c;
        if (f.size() != 5 || !text::parse_double(f[0], fr) || !text::parse_int(f[1], r) ||
            !text::parse_int(f[2], c) || !text::parse_double(f[3], re) || !text::parse_double(f[4], im))
            parse_fail(path, lineno, "malformed row");
        if (r < 1 || c < 1 || r > q || c > q) parse_fail(path, lineno, "covariance index out of range");
        auto it = index.find(fr);
        if (it == index.end()) continue;  // line dropped by truncation or unknown
        auto slot = std::size_t((r - 1) * q + (c - 1));
        if (seen[it->second][slot]) parse_fail(path, lineno, "duplicate covariance entry");
        seen[it->second][slot] = true;
        out[it->second](r - 1, c - 1) = Complex(re, im);
    }
    return out;
}

}  // namespace

FrfDataset load_frf(const std::filesystem::path& path, double min_freq_hz) {
    if (!(min_freq_hz >= 0.0)) throw ConfigError("min_freq_hz must be non-negative");
    std::ifstream is(path);
    if (!is) throw IoError("cannot open FRF file '" + path.string() + "'");

    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(is, line)) parse_fail(path, lineno, "empty file");
    const auto header = text::trim(line);
    bool has_var;
    if (header == "freq_hz,out_idx,in_idx,re,im")
        has_var = false;
    else if (header == "freq_hz,out_idx,in_idx,re,im,var")
        has_var = true;
    else
        parse_fail(path, lineno, "expected header 'freq_hz,out_idx,in_idx,re,im[,var]'");

    std::map<double, std::map<std::pair<long long, long long>, Entry>> rows;
    long long ny = 0, nu = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        auto f = text::split(line);
        if (f.size() != (has_var ? 6u : 5u)) parse_fail(path, lineno, "wrong number of fields");
        double fr, re, im, var = 0.0;
        long long o, i;
        if (!text::parse_double(f[0], fr) || !text::parse_int(f[1], o) || !text::parse_int(f[2], i) ||
            !text::parse_double(f[3], re) || !text::parse_double(f[4], im) ||
            (has_var && !text::parse_double(f[5], var)))
            parse_fail(path, lineno, "malformed row");
        if (!std::isfinite(fr) || !std::isfinite(re) || !std::isfinite(im) || !std::isfinite(var))
            parse_fail(path, lineno, "non-finite value");
        if (o < 1 || i < 1) parse_fail(path, lineno, "indices are 1-based");
        if (has_var && var < 0.0) parse_fail(path, lineno, "negative variance");
        auto [it, inserted] = rows[fr].emplace(std::make_pair(o, i), Entry{Complex(re, im), var});
        if (!inserted)
            parse_fail(path, lineno, "duplicate entry (freq " + std::string(f[0]) + ", out " +
                                         std::to_string(o) + ", in " + std::to_string(i) + ")");
        ny = std::max(ny, o);
        nu = std::max(nu, i);
    }
    if (rows.empty()) throw IoError(path.string() + ": no data rows");

    std::vector<double> freqs;
    std::vector<MatrixXcd> frf;
    std::vector<VectorXd> vars;
    for (const auto& [fr, entries] : rows) {
        MatrixXcd g(ny, nu);
        VectorXd v(ny * nu);
        for (long long o = 1; o <= ny; ++o)
            for (long long i = 1; i <= nu; ++i) {
                auto it = entries.find({o, i});
                if (it == entries.end())
                    throw IoError(path.string() + ": missing entry (out " + std::to_string(o) + ", in " +
                                  std::to_string(i) + ") at " + text::format_double(fr) + " Hz");
                g(o - 1, i - 1) = it->second.value;
                v[(i - 1) * ny + (o - 1)] = it->second.var;
            }
        if (fr < min_freq_hz) continue;
        freqs.push_back(fr);
        frf.push_back(std::move(g));
        vars.push_back(std::move(v));
    }
    if (freqs.empty()) throw ConfigError("no frequencies remain after truncation");

    std::optional<HermitianSequence> cov;
    const auto companion = covariance_companion_path(path);
    if (std::filesystem::exists(companion)) {
        if (has_var) throw IoError(path.string() + ": both a var column and a covariance companion file");
        cov = HermitianSequence::from_matrices(read_covariance_companion(companion, freqs, ny * nu));
    } else if (has_var) {
        cov = HermitianSequence::from_diagonals(std::move(vars));
    }
    try {
        return FrfDataset(FrequencyGrid::from_hz(freqs), std::move(frf), std::move(cov));
    } catch (const ConfigError& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void save_frf(const std::filesystem::path& path, const FrfDataset& data) {
    const auto& cov = data.covariance();
    const bool var_column = cov && cov->is_diagonal();
    auto os = text::open_output(path.string());
    os << (var_column ? "freq_hz,out_idx,in_idx,re,im,var\n" : "freq_hz,out_idx,in_idx,re,im\n");
    const Index ny = data.n_outputs(), nu = data.n_inputs();
    for (std::size_t k = 0; k < data.size(); ++k) {
        const std::string f = text::format_double(data.grid().hz(k));
        for (Index i = 0; i < nu; ++i)
            for (Index o = 0; o < ny; ++o) {
                const Complex g = data.frf(k)(o, i);
                os << f << ',' << (o + 1) << ',' << (i + 1) << ',' << text::format_double(g.real()) << ','
                   << text::format_double(g.imag());
                if (var_column) os << ',' << text::format_double(cov->diagonal(k)[i * ny + o]);
                os << '\n';
            }
    }
    if (!os) throw IoError("failed writing '" + path.string() + "'");

    const auto companion = covariance_companion_path(path);
    if (cov && !cov->is_diagonal()) {
        auto cs = text::open_output(companion.string());
        cs << "freq_hz,row,col,re,im\n";
        const Index q = data.vec_size();
        for (std::size_t k = 0; k < data.size(); ++k) {
            const std::string f = text::format_double(data.grid().hz(k));
            const MatrixXcd c = cov->matrix(k);
            for (Index r = 0; r < q; ++r)
                for (Index col = 0; col < q; ++col) {
                    if (c(r, col) == Complex(0.0, 0.0)) continue;
                    cs << f << ',' << (r + 1) << ',' << (col + 1) << ',' << text::format_double(c(r, col).real())
                       << ',' << text::format_double(c(r, col).imag()) << '\n';
                }
        }
    } else if (std::filesystem::exists(companion)) {
        std::filesystem::remove(companion);
    }
}

}  // namespace modalid

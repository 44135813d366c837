#include "modalid/pipeline.hpp"

#include <cmath>
#include <set>

#include "modalid/io.hpp"

namespace modalid {

namespace fs = std::filesystem;
using nlohmann::json;

void FitConfig::validate() const {
    if (!(min_freq_hz >= 0.0)) throw ConfigError("min_freq_hz must be non-negative");
    if (weighting.magnitude_floor && !(*weighting.magnitude_floor > 0.0))
        throw ConfigError("magnitude_floor must be positive");
    if (!(initial_zeta > 0.0 && initial_zeta < 1.0)) throw ConfigError("initial_zeta must lie in (0, 1)");
    if (flexible.use_cmif) {
        if (!(flexible.prominence_factor > 1.0)) throw ConfigError("prominence_factor must exceed 1");
    } else {
        for (double f : flexible.frequencies_hz)
            if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("initial frequencies must be positive");
    }
    riv.validate();
    ipem.validate();
}

namespace {

void check_keys(const json& doc, const std::set<std::string>& allowed, const std::string& what) {
    if (!doc.is_object()) throw ConfigError(what + " must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!allowed.count(key)) throw ConfigError(what + ": unknown field '" + key + "'");
}

template <class T>
T get(const json& doc, const char* key, const std::string& what) {
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(what + ": field '" + std::string(key) + "' is missing or has the wrong type");
    }
}

template <class T>
T get_or(const json& doc, const char* key, T fallback, const std::string& what) {
    if (!doc.contains(key)) return fallback;
    return get<T>(doc, key, what);
}

std::size_t get_count(const json& doc, const char* key, std::size_t fallback, const std::string& what) {
    if (!doc.contains(key)) return fallback;
    const json& v = doc.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(what + ": field '" + std::string(key) + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

}  // namespace

FitConfig parse_fit_config(const json& doc, const fs::path& base_dir) {
    const std::string what = "fit config";
    check_keys(doc,
               {"frf", "min_freq_hz", "weighting", "magnitude_floor", "damping_model", "n_rbm", "flexible_init",
                "initial_zeta", "include_dc", "riv", "ipem", "output_dir", "seed"},
               what);
    FitConfig cfg;
    const fs::path frf = get<std::string>(doc, "frf", what);
    cfg.frf_path = frf.is_absolute() ? frf : base_dir / frf;
    cfg.min_freq_hz = get_or<double>(doc, "min_freq_hz", 0.0, what);
    cfg.weighting.kind = parse_weighting_kind(get_or<std::string>(doc, "weighting", "inverse-magnitude", what));
    if (doc.contains("magnitude_floor")) cfg.weighting.magnitude_floor = get<double>(doc, "magnitude_floor", what);
    cfg.damping = parse_damping_model(get_or<std::string>(doc, "damping_model", "general", what));
    cfg.n_rbm = get_count(doc, "n_rbm", 0, what);
    cfg.initial_zeta = get_or<double>(doc, "initial_zeta", 0.01, what);
    cfg.include_dc = get_or<bool>(doc, "include_dc", false, what);
    cfg.seed = get_or<std::uint64_t>(doc, "seed", 0, what);
    if (doc.contains("output_dir")) {
        const fs::path out = get<std::string>(doc, "output_dir", what);
        cfg.output_dir = out.is_absolute() ? out : base_dir / out;
    } else {
        cfg.output_dir = base_dir / "out";
    }

    if (!doc.contains("flexible_init")) throw ConfigError(what + ": field 'flexible_init' is required");
    const json& fi = doc.at("flexible_init");
    const std::string fwhat = "flexible_init";
    check_keys(fi, {"method", "frequencies_hz", "prominence_factor", "max_modes"}, fwhat);
    const std::string method = get_or<std::string>(fi, "method", fi.contains("frequencies_hz") ? "explicit" : "cmif", fwhat);
    if (method == "cmif") {
        cfg.flexible.use_cmif = true;
        cfg.flexible.prominence_factor = get_or<double>(fi, "prominence_factor", 10.0, fwhat);
        if (fi.contains("max_modes")) cfg.flexible.max_modes = get_count(fi, "max_modes", 0, fwhat);
    } else if (method == "explicit") {
        cfg.flexible.frequencies_hz = get<std::vector<double>>(fi, "frequencies_hz", fwhat);
    } else {
        throw ConfigError(fwhat + ": unknown method '" + method + "'");
    }

    if (doc.contains("riv")) {
        const json& r = doc.at("riv");
        check_keys(r, {"max_iterations", "relative_tolerance", "stabilization"}, "riv");
        cfg.riv.max_iterations = get_or<int>(r, "max_iterations", cfg.riv.max_iterations, "riv");
        cfg.riv.relative_tolerance = get_or<double>(r, "relative_tolerance", cfg.riv.relative_tolerance, "riv");
        cfg.riv.stabilization = parse_stabilization(get_or<std::string>(r, "stabilization", "reflect", "riv"));
    }
    if (doc.contains("ipem")) {
        const json& p = doc.at("ipem");
        check_keys(p, {"max_iterations", "relative_tolerance", "min_step", "rank_threshold"}, "ipem");
        cfg.ipem.max_iterations = get_or<int>(p, "max_iterations", cfg.ipem.max_iterations, "ipem");
        cfg.ipem.relative_tolerance = get_or<double>(p, "relative_tolerance", cfg.ipem.relative_tolerance, "ipem");
        cfg.ipem.min_step = get_or<double>(p, "min_step", cfg.ipem.min_step, "ipem");
        cfg.ipem.rank_threshold = get_or<double>(p, "rank_threshold", cfg.ipem.rank_threshold, "ipem");
    }
    cfg.validate();
    return cfg;
}

FitConfig load_fit_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
    json doc;
    try {
        doc = io::load_json(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_fit_config(doc, path.parent_path());
}

namespace {

template <class F>
auto run_stage(const std::string& name, F&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        const std::string msg = "stage " + name + ": " + e.what();
        switch (e.kind()) {
            case ErrorKind::config: throw ConfigError(msg);
            case ErrorKind::numerical: throw NumericalError(msg);
            case ErrorKind::io: throw IoError(msg);
        }
        throw;
    }
}

AdditiveStructure fit_structure(const FitConfig& cfg, const FrfDataset& data, std::size_t n_flex) {
    const ModalLayout lay{cfg.damping, data.n_outputs(), data.n_inputs(), cfg.n_rbm, n_flex, cfg.include_dc};
    if (cfg.n_rbm == 0 && n_flex == 0 && !cfg.include_dc) throw ConfigError("model has no submodels");
    return modal_structure(lay);
}

}  // namespace

FitState run_fit(const FrfDataset& data, const FitConfig& cfg, const StageCallback& on_stage) {
    cfg.validate();
    FitState st;
    auto done = [&](const std::string& name) {
        if (on_stage) on_stage(name, st);
    };
    st.data = data;
    if (cfg.n_rbm > std::size_t(std::min(data.n_outputs(), data.n_inputs())))
        throw ConfigError("n_rbm exceeds min(n_outputs, n_inputs)");

    st.weights = run_stage("weighting", [&] { return build_weighting(data, cfg.weighting); });
    done("weighting");

    st.initial_frequencies_hz = run_stage("order_selection", [&] {
        if (!cfg.flexible.use_cmif) return cfg.flexible.frequencies_hz;
        std::vector<double> f;
        for (const auto& p : pick_modes(cmif(data), cfg.flexible.prominence_factor, cfg.flexible.max_modes))
            f.push_back(p.omega / (2.0 * kPi));
        return f;
    });
    done("order_selection");

    st.initial = run_stage("init_numerators", [&] {
        const AdditiveStructure s = fit_structure(cfg, data, st.initial_frequencies_hz.size());
        std::vector<VectorXd> den;
        if (cfg.n_rbm > 0) den.emplace_back(0);
        for (double f : st.initial_frequencies_hz) {
            const double w = 2.0 * kPi * f;
            // Unit constant term: 1 + (2 zeta / w) s + s^2 / w^2.
            den.push_back(Eigen::Vector2d(2.0 * cfg.initial_zeta / w, 1.0 / (w * w)));
        }
        if (cfg.include_dc) den.emplace_back(0);
        return init_numerators(data, s, den, st.weights);
    });
    done("init_numerators");

    st.riv = run_stage("riv", [&] { return riv_iterate(data, *st.initial, st.weights, cfg.riv); });
    done("riv");

    st.covariance = run_stage("covariance", [&] { return covariance(data, st.riv->params, data.covariance()); });
    if (st.covariance->relative_only)
        st.warnings.push_back("no usable FRF covariance: parameter covariance is relative only");
    done("covariance");

    st.init = run_stage("svd_init", [&] { return svd_init(st.riv->params, cfg.damping, cfg.n_rbm); });
    for (const auto& w : st.init->warnings) st.warnings.push_back(w);
    done("svd_init");

    st.ipem = run_stage("gauss_newton", [&] {
        return gauss_newton(st.riv->params.to_vector(), *st.covariance, st.init->rho, cfg.ipem,
                            [&](int, const ModalParameters& rho) {
                                st.modal_cost_trace.push_back(cost(data, map_f(rho), st.weights));
                            });
    });
    if (st.ipem->status == IpemStatus::stalled) st.warnings.push_back("Gauss-Newton line search stalled");
    done("gauss_newton");

    st.ss = run_stage("realize", [&] { return realize(st.ipem->rho); });
    done("realize");
    return st;
}

namespace {

json per_frequency_residuals(const FitState& st) {
    json rows = json::array();
    std::optional<AdditiveParameters> modal;
    if (st.ipem) modal = map_f(st.ipem->rho);
    for (std::size_t k = 0; k < st.data.size(); ++k) {
        json row{{"freq_hz", st.data.grid().hz(k)}};
        if (st.riv)
            row["stage1"] = std::sqrt(st.weights.quadratic_form(k, vec(residual_matrix(st.data, st.riv->params, k))));
        if (modal) row["stage2"] = std::sqrt(st.weights.quadratic_form(k, vec(residual_matrix(st.data, *modal, k))));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

json fit_report(const FitState& st, const FitConfig& cfg) {
    json doc{{"version", "fit-report-v1"},
             {"status", "ok"},
             {"n_outputs", st.data.n_outputs()},
             {"n_inputs", st.data.n_inputs()},
             {"n_frequencies", st.data.size()},
             {"damping_model", to_string(cfg.damping)},
             {"weighting", to_string(cfg.weighting.kind)},
             {"n_rbm", cfg.n_rbm},
             {"n_flex", st.initial_frequencies_hz.size()},
             {"include_dc", cfg.include_dc},
             {"initial_frequencies_hz", st.initial_frequencies_hz},
             {"warnings", st.warnings}};
    if (st.riv) {
        doc["stage1"] = {{"cost_trace", st.riv->cost_trace},
                         {"final_cost", st.riv->cost_trace.back()},
                         {"iterations", st.riv->relative_changes.size()},
                         {"converged", st.riv->converged}};
    }
    if (st.covariance) doc["covariance"] = {{"relative_only", st.covariance->relative_only}};
    if (st.init) {
        json diag = json::array();
        for (const auto& d : st.init->diagnostics)
            diag.push_back({{"label", d.label},
                            {"singular_values", std::vector<double>(d.singular_values.data(),
                                                                    d.singular_values.data() + d.singular_values.size())},
                            {"discarded_fraction", d.discarded_fraction}});
        doc["residue_diagnostics"] = diag;
    }
    if (st.ipem) {
        std::vector<double> obj;
        for (const auto& r : st.ipem->trace) obj.push_back(r.objective);
        doc["stage2"] = {{"status", to_string(st.ipem->status)},
                         {"objective_trace", obj},
                         {"final_objective", obj.back()},
                         {"modal_cost_trace", st.modal_cost_trace},
                         {"final_modal_cost", st.modal_cost_trace.back()},
                         {"weighting_relative_only", st.ipem->relative_only}};
    }
    if (st.riv) doc["per_frequency_weighted_residual"] = per_frequency_residuals(st);
    return doc;
}

FitState cmd_fit(const FitConfig& cfg) {
    cfg.validate();
    if (!fs::exists(cfg.frf_path)) throw ConfigError("FRF file '" + cfg.frf_path.string() + "' does not exist");
    const FrfDataset data = run_stage("load", [&] { return load_frf(cfg.frf_path, cfg.min_freq_hz); });

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.output_dir.string() + "'");
    const fs::path out = cfg.output_dir;

    std::string last = "load";
    FitState partial;
    auto on_stage = [&](const std::string& name, const FitState& st) {
        last = name;
        if (name == "riv") {
            io::save_json(out / "additive.json", io::to_json(st.riv->params));
            io::save_riv_trace(out / "riv_trace.csv", io::riv_trace_rows(*st.riv));
        } else if (name == "covariance") {
            io::save_covariance(out / "covariance.csv", out / "covariance.json", *st.covariance);
        } else if (name == "gauss_newton") {
            io::save_json(out / "modal.json", io::to_json(st.ipem->rho));
            io::save_ipem_trace(out / "ipem_trace.csv", st.ipem->trace);
        } else if (name == "realize") {
            io::save_json(out / "ss.json", io::to_json(*st.ss));
        }
        partial = st;
    };
    try {
        FitState st = run_fit(data, cfg, on_stage);
        io::save_json(out / "report.json", fit_report(st, cfg));
        return st;
    } catch (const Error& e) {
        json doc = partial.riv || partial.initial ? fit_report(partial, cfg) : json::object();
        doc["version"] = "fit-report-v1";
        doc["status"] = "failed";
        doc["failed_after"] = last;
        doc["error"] = e.what();
        io::save_json(out / "report.json", doc);
        throw;
    }
}

SynthSpec parse_synth_spec(const json& doc) {
    const std::string what = "synth spec";
    check_keys(doc,
               {"n_outputs", "n_inputs", "n_rbm", "n_flex", "f_lo_hz", "f_hi_hz", "zeta_lo", "zeta_hi", "damping_model",
                "gamma", "seed", "peak_height", "grid"},
               what);
    SynthSpec s;
    s.n_outputs = Index(get_count(doc, "n_outputs", 1, what));
    s.n_inputs = Index(get_count(doc, "n_inputs", 1, what));
    s.n_rbm = get_count(doc, "n_rbm", 0, what);
    s.n_flex = get_count(doc, "n_flex", 1, what);
    s.f_lo_hz = get_or<double>(doc, "f_lo_hz", s.f_lo_hz, what);
    s.f_hi_hz = get_or<double>(doc, "f_hi_hz", s.f_hi_hz, what);
    s.zeta_lo = get_or<double>(doc, "zeta_lo", s.zeta_lo, what);
    s.zeta_hi = get_or<double>(doc, "zeta_hi", s.zeta_hi, what);
    s.damping = parse_damping_model(get_or<std::string>(doc, "damping_model", "general", what));
    s.gamma = get_or<double>(doc, "gamma", 0.0, what);
    s.seed = get_or<std::uint64_t>(doc, "seed", 0, what);
    if (doc.contains("peak_height")) s.peak_height = get<double>(doc, "peak_height", what);
    s.validate();
    return s;
}

FrequencyGrid parse_grid_spec(const json& doc) {
    const std::string what = "grid spec";
    check_keys(doc, {"frequencies_hz", "f_lo_hz", "f_hi_hz", "n", "spacing"}, what);
    if (doc.contains("frequencies_hz")) return FrequencyGrid::from_hz(get<std::vector<double>>(doc, "frequencies_hz", what));
    const double lo = get<double>(doc, "f_lo_hz", what), hi = get<double>(doc, "f_hi_hz", what);
    const std::size_t n = get_count(doc, "n", 0, what);
    const std::string spacing = get_or<std::string>(doc, "spacing", "log", what);
    if (spacing == "log") return FrequencyGrid::log_spaced_hz(lo, hi, n);
    if (spacing == "linear") return FrequencyGrid::linear_spaced_hz(lo, hi, n);
    throw ConfigError(what + ": unknown spacing '" + spacing + "'");
}

}  // namespace modalid

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "modalid/io.hpp"
#include "modalid/pipeline.hpp"

namespace fs = std::filesystem;
using namespace modalid;

namespace {

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::numerical: return 3;
        case ErrorKind::io: return 4;
    }
    return 3;
}

io::json load_config_json(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("file '" + path.string() + "' does not exist");
    try {
        return io::load_json(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
}

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
    auto* opt = cmd->add_option("--config", c.config, "JSON configuration file");
    if (config_required) opt->required();
    cmd->add_option("--out", c.out, "output directory");
    cmd->add_option("--seed", c.seed, "random seed override");
}

int run_fit_cmd(const Common& c) {
    FitConfig cfg = load_fit_config(c.config);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seed) cfg.seed = *c.seed;
    const FitState st = cmd_fit(cfg);
    std::cout << "stage 1 cost " << st.riv->cost_trace.back() << ", stage 2 objective "
              << st.ipem->trace.back().objective << " (" << to_string(st.ipem->status) << ")\n";
    for (const auto& w : st.warnings) std::cerr << "warning: " << w << '\n';
    return 0;
}

int run_synth_cmd(const Common& c) {
    const io::json doc = load_config_json(c.config);
    io::json spec_doc = doc;
    spec_doc.erase("grid");
    SynthSpec spec = parse_synth_spec(spec_doc);
    if (c.seed) spec.seed = *c.seed;
    if (!doc.contains("grid")) throw ConfigError("synth spec: field 'grid' is required");
    const FrequencyGrid grid = parse_grid_spec(doc.at("grid"));
    const ModalParameters truth = random_modal_system(spec);
    // Noise stream decorrelated from the system draw.
    const FrfDataset data = simulate_frf(truth, grid, spec.gamma, spec.seed ^ 0x9e3779b97f4a7c15ULL);
    const fs::path out = c.out.empty() ? fs::path("out") : fs::path(c.out);
    ensure_dir(out);
    save_frf(out / "frf.csv", data);
    io::save_json(out / "truth.json", io::to_json(truth));
    return 0;
}

int run_cmif_cmd(const Common& c, const std::string& frf_arg, double prominence) {
    fs::path frf = frf_arg;
    double min_hz = 0.0;
    if (frf.empty()) {
        if (c.config.empty()) throw ConfigError("cmif needs --frf or --config");
        const io::json doc = load_config_json(c.config);
        if (!doc.contains("frf") || !doc.at("frf").is_string()) throw ConfigError("cmif config needs a string field 'frf'");
        frf = fs::path(c.config).parent_path() / doc.at("frf").get<std::string>();
        if (doc.contains("min_freq_hz")) min_hz = doc.at("min_freq_hz").get<double>();
    }
    if (!fs::exists(frf)) throw ConfigError("FRF file '" + frf.string() + "' does not exist");
    const FrfDataset data = load_frf(frf, min_hz);
    const CmifCurves curves = cmif(data);
    const fs::path out = c.out.empty() ? fs::path("out") : fs::path(c.out);
    ensure_dir(out);
    io::save_cmif(out / "cmif.csv", curves);
    for (const auto& p : pick_modes(curves, prominence))
        std::cout << "peak " << p.omega / (2.0 * kPi) << " Hz, multiplicity " << p.multiplicity << '\n';
    return 0;
}

int run_eval_cmd(const Common& c, const std::string& model_path, const std::string& grid_path) {
    const io::json model = load_config_json(model_path);
    const FrequencyGrid grid = parse_grid_spec(load_config_json(grid_path.empty() ? c.config : grid_path));
    const std::string version = model.value("version", "");
    std::vector<MatrixXcd> frf;
    if (version == io::kModalVersion) {
        const ModalParameters rho = io::modal_from_json(model);
        for (double w : grid.omegas()) frf.push_back(eval_modal(rho, Complex(0.0, w)));
    } else if (version == io::kAdditiveVersion) {
        const AdditiveParameters p = io::additive_from_json(model);
        for (double w : grid.omegas()) frf.push_back(eval_additive(p, Complex(0.0, w)));
    } else if (version == io::kStateSpaceVersion) {
        const StateSpace ss = io::state_space_from_json(model);
        for (double w : grid.omegas()) frf.push_back(eval_ss(ss, Complex(0.0, w)));
    } else {
        throw IoError("'" + model_path + "' is not a modal-v1, additive-v1 or ss-v1 document");
    }
    const fs::path out = c.out.empty() ? fs::path("out") : fs::path(c.out);
    ensure_dir(out);
    save_frf(out / "model_frf.csv", FrfDataset(grid, std::move(frf)));
    return 0;
}

int run_realize_cmd(const Common& c, const std::string& model_path) {
    const ModalParameters rho = io::modal_from_json(load_config_json(model_path.empty() ? c.config : model_path));
    const fs::path out = c.out.empty() ? fs::path("out") : fs::path(c.out);
    ensure_dir(out);
    io::save_json(out / "ss.json", io::to_json(realize(rho)));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage modal identification from FRF data"};
    app.require_subcommand(1);

    Common fit_c, synth_c, cmif_c, eval_c, realize_c;
    auto* fit = app.add_subcommand("fit", "estimate a modal model from an FRF dataset");
    add_common(fit, fit_c, true);
    auto* synth = app.add_subcommand("synth", "generate a random modal system and its noisy FRF");
    add_common(synth, synth_c, true);
    auto* cm = app.add_subcommand("cmif", "complex mode indicator function of an FRF dataset");
    add_common(cm, cmif_c, false);
    std::string cmif_frf;
    double prominence = 10.0;
    cm->add_option("--frf", cmif_frf, "FRF CSV file");
    cm->add_option("--prominence", prominence, "peak threshold as a multiple of the curve median");
    auto* ev = app.add_subcommand("eval", "evaluate a model document on a frequency grid");
    add_common(ev, eval_c, false);
    std::string eval_model, eval_grid;
    ev->add_option("--model", eval_model, "modal-v1, additive-v1 or ss-v1 document")->required();
    ev->add_option("--grid", eval_grid, "grid spec JSON (defaults to --config)");
    auto* re = app.add_subcommand("realize", "real state-space realization of a modal model");
    add_common(re, realize_c, false);
    std::string realize_model;
    re->add_option("--model", realize_model, "modal-v1 document (defaults to --config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*fit) return run_fit_cmd(fit_c);
        if (*synth) return run_synth_cmd(synth_c);
        if (*cm) return run_cmif_cmd(cmif_c, cmif_frf, prominence);
        if (*ev) return run_eval_cmd(eval_c, eval_model, eval_grid);
        if (*re) return run_realize_cmd(realize_c, realize_model);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}

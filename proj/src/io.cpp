#include "modalid/io.hpp"

#include <fstream>
#include <sstream>

#include "text.hpp"

namespace modalid::io {

namespace fs = std::filesystem;

json load_json(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

void save_json(const fs::path& path, const json& doc) {
    auto os = text::open_output(path.string());
    os << doc.dump(2) << '\n';
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

const json& field(const json& doc, const char* key, const std::string& what) {
    if (!doc.is_object() || !doc.contains(key)) throw IoError(what + ": missing field '" + key + "'");
    return doc.at(key);
}

double number(const json& doc, const char* key, const std::string& what) {
    const json& v = field(doc, key, what);
    if (!v.is_number()) throw IoError(what + ": field '" + std::string(key) + "' must be a number");
    return v.get<double>();
}

long long integer(const json& doc, const char* key, const std::string& what) {
    const json& v = field(doc, key, what);
    if (!v.is_number_integer()) throw IoError(what + ": field '" + std::string(key) + "' must be an integer");
    return v.get<long long>();
}

void check_version(const json& doc, const char* version) {
    const json& v = field(doc, "version", "document");
    if (!v.is_string() || v.get<std::string>() != version)
        throw IoError(std::string("expected a '") + version + "' document");
}

VectorXd real_array(const json& v, const std::string& what) {
    if (!v.is_array()) throw IoError(what + " must be an array");
    VectorXd out(Index(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw IoError(what + " must hold numbers");
        out[Index(i)] = v[i].get<double>();
    }
    return out;
}

json real_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json complex_json(const VectorXcd& v) {
    return {{"re", real_json(v.real())}, {"im", real_json(v.imag())}};
}

VectorXcd complex_array(const json& v, const std::string& what) {
    const VectorXd re = real_array(field(v, "re", what), what + ".re");
    const VectorXd im = real_array(field(v, "im", what), what + ".im");
    if (re.size() != im.size()) throw IoError(what + ": re and im lengths differ");
    return re.cast<Complex>() + Complex(0, 1) * im.cast<Complex>();
}

json structure_json(const AdditiveStructure& st) {
    json subs = json::array();
    for (const auto& s : st.submodels()) subs.push_back({{"n", s.n}, {"m", s.m}, {"l", s.l}});
    return {{"n_outputs", st.n_outputs()}, {"n_inputs", st.n_inputs()}, {"K", st.size()}, {"submodels", subs}};
}

AdditiveStructure structure_from_json(const json& doc) {
    const std::string what = "additive structure";
    const Index ny = Index(integer(doc, "n_outputs", what)), nu = Index(integer(doc, "n_inputs", what));
    const json& subs = field(doc, "submodels", what);
    if (!subs.is_array()) throw IoError(what + ": submodels must be an array");
    std::vector<SubmodelOrder> orders;
    for (const auto& s : subs)
        orders.push_back({int(integer(s, "n", what)), int(integer(s, "m", what)), int(integer(s, "l", what))});
    if (doc.contains("K") && integer(doc, "K", what) != (long long)orders.size())
        throw IoError(what + ": K does not match the submodel list");
    try {
        return AdditiveStructure(ny, nu, std::move(orders));
    } catch (const ConfigError& e) {
        throw IoError(what + ": " + e.what());
    }
}

}  // namespace

json matrix_to_json(const MatrixXd& m) {
    std::vector<double> data;
    for (Index r = 0; r < m.rows(); ++r)
        for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from_json(const json& doc, const std::string& what) {
    const Index rows = Index(integer(doc, "rows", what)), cols = Index(integer(doc, "cols", what));
    const VectorXd data = real_array(field(doc, "data", what), what + ".data");
    if (rows < 0 || cols < 0 || data.size() != rows * cols) throw IoError(what + ": data length does not match rows x cols");
    MatrixXd m(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
    return m;
}

json to_json(const AdditiveParameters& params) {
    json doc = structure_json(params.structure);
    doc["version"] = kAdditiveVersion;
    doc["beta"] = real_json(params.to_vector());
    return doc;
}

AdditiveParameters additive_from_json(const json& doc) {
    check_version(doc, kAdditiveVersion);
    const AdditiveStructure st = structure_from_json(doc);
    const VectorXd beta = real_array(field(doc, "beta", "additive model"), "beta");
    if (beta.size() != st.parameter_count()) throw IoError("additive model: beta length does not match the structure");
    return AdditiveParameters::from_vector(st, beta);
}

json to_json(const ModalParameters& rho) {
    json rigid = json::array(), flex = json::array();
    for (const auto& m : rho.rigid) rigid.push_back({{"left", real_json(m.left)}, {"right", real_json(m.right)}});
    for (const auto& m : rho.general)
        flex.push_back({{"lambda", {{"re", m.lambda.real()}, {"im", m.lambda.imag()}}},
                        {"left", complex_json(m.left)},
                        {"right", complex_json(m.right)}});
    for (const auto& m : rho.proportional)
        flex.push_back({{"omega", m.omega}, {"zeta", m.zeta}, {"left", real_json(m.left)}, {"right", real_json(m.right)}});
    return {{"version", kModalVersion},
            {"damping_model", to_string(rho.damping)},
            {"n_outputs", rho.n_outputs},
            {"n_inputs", rho.n_inputs},
            {"n_rbm", rho.rigid.size()},
            {"n_flex", rho.n_flex()},
            {"rigid_modes", rigid},
            {"flexible_modes", flex},
            {"dc_gain", rho.dc_gain ? matrix_to_json(*rho.dc_gain) : json(nullptr)}};
}

ModalParameters modal_from_json(const json& doc) {
    check_version(doc, kModalVersion);
    const std::string what = "modal model";
    ModalParameters rho;
    const json& dm = field(doc, "damping_model", what);
    if (!dm.is_string()) throw IoError(what + ": damping_model must be a string");
    try {
        rho.damping = parse_damping_model(dm.get<std::string>());
    } catch (const ConfigError& e) {
        throw IoError(what + ": " + e.what());
    }
    rho.n_outputs = Index(integer(doc, "n_outputs", what));
    rho.n_inputs = Index(integer(doc, "n_inputs", what));
    const json& rigid = field(doc, "rigid_modes", what);
    const json& flex = field(doc, "flexible_modes", what);
    if (!rigid.is_array() || !flex.is_array()) throw IoError(what + ": mode lists must be arrays");
    for (const auto& m : rigid)
        rho.rigid.push_back({real_array(field(m, "left", what), "left"), real_array(field(m, "right", what), "right")});
    for (const auto& m : flex) {
        if (rho.damping == DampingModel::general) {
            const json& l = field(m, "lambda", what);
            rho.general.push_back({Complex(number(l, "re", what), number(l, "im", what)),
                                   complex_array(field(m, "left", what), "left"),
                                   complex_array(field(m, "right", what), "right")});
        } else {
            rho.proportional.push_back({number(m, "omega", what), number(m, "zeta", what),
                                        real_array(field(m, "left", what), "left"),
                                        real_array(field(m, "right", what), "right")});
        }
    }
    if (integer(doc, "n_rbm", what) != (long long)rho.rigid.size() || integer(doc, "n_flex", what) != (long long)rho.n_flex())
        throw IoError(what + ": mode counts do not match the mode lists");
    const json& dc = field(doc, "dc_gain", what);
    if (!dc.is_null()) rho.dc_gain = matrix_from_json(dc, "dc_gain");
    try {
        rho.validate();
    } catch (const ConfigError& e) {
        throw IoError(what + ": " + e.what());
    }
    return rho;
}

json to_json(const StateSpace& ss) {
    return {{"version", kStateSpaceVersion},
            {"n_states", ss.a.rows()},
            {"n_inputs", ss.b.cols()},
            {"n_outputs", ss.c.rows()},
            {"A", matrix_to_json(ss.a)},
            {"B", matrix_to_json(ss.b)},
            {"C", matrix_to_json(ss.c)},
            {"D", matrix_to_json(ss.d)}};
}

StateSpace state_space_from_json(const json& doc) {
    check_version(doc, kStateSpaceVersion);
    const std::string what = "state-space model";
    StateSpace ss{matrix_from_json(field(doc, "A", what), "A"), matrix_from_json(field(doc, "B", what), "B"),
                  matrix_from_json(field(doc, "C", what), "C"), matrix_from_json(field(doc, "D", what), "D")};
    try {
        ss.validate();
    } catch (const ConfigError& e) {
        throw IoError(what + ": " + e.what());
    }
    if (integer(doc, "n_states", what) != ss.a.rows() || integer(doc, "n_inputs", what) != ss.b.cols() ||
        integer(doc, "n_outputs", what) != ss.c.rows())
        throw IoError(what + ": declared dimensions do not match the matrices");
    return ss;
}

void save_covariance(const fs::path& csv_path, const fs::path& sidecar_path, const CovarianceEstimate& cov) {
    auto os = text::open_output(csv_path.string());
    os << "row,col,value\n";
    for (Index r = 0; r < cov.matrix.rows(); ++r)
        for (Index c = 0; c < cov.matrix.cols(); ++c)
            os << r << ',' << c << ',' << text::format_double(cov.matrix(r, c)) << '\n';
    if (!os) throw IoError("failed writing '" + csv_path.string() + "'");
    json params = json::array();
    const auto names = cov.parameter_names();
    for (std::size_t i = 0; i < names.size(); ++i) params.push_back({{"index", i}, {"name", names[i]}});
    save_json(sidecar_path, {{"version", kCovarianceVersion},
                             {"dimension", cov.matrix.rows()},
                             {"relative_only", cov.relative_only},
                             {"structure", structure_json(cov.structure)},
                             {"parameters", params}});
}

CovarianceEstimate load_covariance(const fs::path& csv_path, const fs::path& sidecar_path) {
    const json side = load_json(sidecar_path);
    check_version(side, kCovarianceVersion);
    CovarianceEstimate cov;
    cov.structure = structure_from_json(field(side, "structure", "covariance sidecar"));
    const Index dim = Index(integer(side, "dimension", "covariance sidecar"));
    if (dim != cov.structure.parameter_count()) throw IoError("covariance sidecar: dimension does not match the structure");
    const json& ro = field(side, "relative_only", "covariance sidecar");
    if (!ro.is_boolean()) throw IoError("covariance sidecar: relative_only must be a boolean");
    cov.relative_only = ro.get<bool>();

    std::ifstream is(csv_path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + csv_path.string() + "'");
    std::string line;
    if (!std::getline(is, line) || text::trim(line) != "row,col,value")
        throw IoError("'" + csv_path.string() + "': expected header row,col,value");
    cov.matrix = MatrixXd::Constant(dim, dim, std::numeric_limits<double>::quiet_NaN());
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        const auto parts = text::split(line);
        long long r = 0, c = 0;
        double v = 0.0;
        if (parts.size() != 3 || !text::parse_int(parts[0], r) || !text::parse_int(parts[1], c) ||
            !text::parse_double(parts[2], v) || r < 0 || c < 0 || r >= dim || c >= dim)
            throw IoError("'" + csv_path.string() + "' line " + std::to_string(line_no) + ": malformed entry");
        cov.matrix(Index(r), Index(c)) = v;
    }
    if (!cov.matrix.allFinite()) throw IoError("'" + csv_path.string() + "': missing or non-finite entries");
    return cov;
}

std::vector<RivTraceRow> riv_trace_rows(const RivResult& result) {
    std::vector<RivTraceRow> rows;
    for (std::size_t i = 0; i < result.cost_trace.size(); ++i)
        rows.push_back({int(i), result.cost_trace[i], i == 0 ? 0.0 : result.relative_changes[i - 1]});
    return rows;
}

void save_riv_trace(const fs::path& path, const std::vector<RivTraceRow>& rows) {
    auto os = text::open_output(path.string());
    os << "iter,cost,rel_change\n";
    for (const auto& r : rows) os << r.iter << ',' << text::format_double(r.cost) << ',' << text::format_double(r.rel_change) << '\n';
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

void save_ipem_trace(const fs::path& path, const std::vector<IpemTraceRow>& rows) {
    auto os = text::open_output(path.string());
    os << "iter,objective,step_alpha,param_rel_change\n";
    for (const auto& r : rows)
        os << r.iter << ',' << text::format_double(r.objective) << ',' << text::format_double(r.step_alpha) << ','
           << text::format_double(r.param_rel_change) << '\n';
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

void save_cmif(const fs::path& path, const CmifCurves& curves) {
    auto os = text::open_output(path.string());
    os << "freq_hz";
    for (Index i = 0; i < curves.n_curves(); ++i) os << ",sv" << (i + 1);
    os << '\n';
    for (std::size_t k = 0; k < curves.grid.size(); ++k) {
        os << text::format_double(curves.grid.hz(k));
        for (Index i = 0; i < curves.n_curves(); ++i) os << ',' << text::format_double(curves.values[k][i]);
        os << '\n';
    }
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace modalid::io

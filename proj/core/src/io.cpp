#include "proxmsm/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "proxmsm/errors.hpp"

namespace proxmsm {

using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot open for writing: " + tmp.string());
        os << content;
        if (!os) throw ValidationError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open file: " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

json parse_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

}  // namespace

CsvData read_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    CsvData data;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty CSV file: " + path.string());
    data.header = split_csv_line(line);
    data.columns.resize(data.header.size());

    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != data.header.size()) {
            std::ostringstream os;
            os << path.string() << ": row " << row << " has " << cells.size()
               << " fields, header has " << data.header.size();
            throw ValidationError(os.str());
        }
        for (std::size_t j = 0; j < cells.size(); ++j) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(cells[j], &pos);
                if (pos != cells[j].size()) throw std::invalid_argument("trailing characters");
                data.columns[j].push_back(v);
            } catch (const std::exception&) {
                std::ostringstream os;
                os << path.string() << ": row " << row << ", column '" << data.header[j]
                   << "': not a number: '" << cells[j] << "'";
                throw ValidationError(os.str());
            }
        }
    }
    return data;
}

namespace {

void append_block_names(std::vector<std::string>& names, const std::string& base,
                        Eigen::Index width) {
    if (width == 1) {
        names.push_back(base);
    } else {
        for (Eigen::Index k = 1; k <= width; ++k) names.push_back(base + "_" + std::to_string(k));
    }
}

}  // namespace

RoleMapFile canonical_role_map(const PanelDataset& data) {
    RoleMapFile rm;
    auto block = [&](const std::string& base, Eigen::Index width) {
        std::vector<std::string> names;
        append_block_names(names, base, width);
        return names;
    };
    rm.roles.y = "y";
    rm.roles.a0 = "a0";
    rm.roles.a1 = "a1";
    rm.roles.z0 = block("z0", data.z0().cols());
    rm.roles.z1 = block("z1", data.z1().cols());
    rm.roles.w0 = block("w0", data.w0().cols());
    rm.roles.w1 = block("w1", data.w1().cols());
    rm.roles.x0 = block("x0", data.x0().cols());
    rm.roles.x1 = block("x1", data.x1().cols());
    if (data.v().cols() > 0) rm.roles.v = block("v", data.v().cols());
    rm.support = data.support();
    return rm;
}

void write_dataset_csv(const PanelDataset& data, const std::filesystem::path& path,
                       const Eigen::VectorXd* u0, const Eigen::VectorXd* u1) {
    std::ostringstream os;
    std::vector<std::string> header = {"y", "a0", "a1"};
    append_block_names(header, "z0", data.z0().cols());
    append_block_names(header, "z1", data.z1().cols());
    append_block_names(header, "w0", data.w0().cols());
    append_block_names(header, "w1", data.w1().cols());
    append_block_names(header, "x0", data.x0().cols());
    append_block_names(header, "x1", data.x1().cols());
    append_block_names(header, "v", data.v().cols());
    if (u0) header.push_back("u0");
    if (u1) header.push_back("u1");
    for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
    os << '\n';

    auto put_row = [&](std::ostringstream& line, const Eigen::MatrixXd& m, Eigen::Index i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) line << ',' << format_double(m(i, j));
    };
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        std::ostringstream line;
        line << format_double(data.y()[i]) << ',' << data.a0()[i] << ',' << data.a1()[i];
        put_row(line, data.z0(), i);
        put_row(line, data.z1(), i);
        put_row(line, data.w0(), i);
        put_row(line, data.w1(), i);
        put_row(line, data.x0(), i);
        put_row(line, data.x1(), i);
        put_row(line, data.v(), i);
        if (u0) line << ',' << format_double((*u0)[i]);
        if (u1) line << ',' << format_double((*u1)[i]);
        os << line.str() << '\n';
    }
    atomic_write_file(path, os.str());
}

namespace {

std::vector<std::string> parse_name_list(const json& j, const std::string& role) {
    std::vector<std::string> out;
    if (j.is_string()) {
        out.push_back(j.get<std::string>());
    } else if (j.is_array()) {
        for (const auto& e : j) {
            if (!e.is_string())
                throw ValidationError("role " + role + " must list column names as strings");
            out.push_back(e.get<std::string>());
        }
    } else {
        throw ValidationError("role " + role + " must be a column name or a list of names");
    }
    return out;
}

TreatmentSupport parse_support(const json& j) {
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "all") return TreatmentSupport::all();
        if (s == "monotone") return TreatmentSupport::monotone();
        throw ValidationError("unknown support preset '" + s + "' (use \"all\" or \"monotone\")");
    }
    if (j.is_array()) {
        std::vector<TreatmentRegime> regimes;
        for (const auto& e : j) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
                !e[1].is_number_integer())
                throw ValidationError("support entries must be [a0, a1] integer pairs");
            regimes.push_back({e[0].get<int>(), e[1].get<int>()});
        }
        return TreatmentSupport(regimes);
    }
    throw ValidationError("support must be a preset name or a list of regimes");
}

json support_to_json(const TreatmentSupport& s) {
    if (s == TreatmentSupport::all()) return "all";
    if (s == TreatmentSupport::monotone()) return "monotone";
    json arr = json::array();
    for (const auto& r : s.regimes()) arr.push_back(json::array({r.a0, r.a1}));
    return arr;
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

}  // namespace

RoleMapFile read_role_map(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    if (!j.is_object()) throw ValidationError("role map must be a JSON object");
    reject_unknown_keys(j, {"roles", "support"}, "role map");
    if (!j.contains("roles")) throw ValidationError("role map missing 'roles'");

    const json& roles = j.at("roles");
    reject_unknown_keys(roles, {"y", "a0", "a1", "z0", "z1", "w0", "w1", "x0", "x1", "v"},
                        "role map roles");
    RoleMapFile rm;
    auto need = [&](const char* key) -> const json& {
        if (!roles.contains(key))
            throw ValidationError(std::string("role map missing role '") + key + "'");
        return roles.at(key);
    };
    auto scalar = [&](const char* key) {
        const json& v = need(key);
        if (!v.is_string()) throw ValidationError(std::string("role ") + key + " must be a string");
        return v.get<std::string>();
    };
    rm.roles.y = scalar("y");
    rm.roles.a0 = scalar("a0");
    rm.roles.a1 = scalar("a1");
    rm.roles.z0 = parse_name_list(need("z0"), "z0");
    rm.roles.z1 = parse_name_list(need("z1"), "z1");
    rm.roles.w0 = parse_name_list(need("w0"), "w0");
    rm.roles.w1 = parse_name_list(need("w1"), "w1");
    rm.roles.x0 = parse_name_list(need("x0"), "x0");
    rm.roles.x1 = parse_name_list(need("x1"), "x1");
    if (roles.contains("v")) rm.roles.v = parse_name_list(roles.at("v"), "v");
    if (j.contains("support")) rm.support = parse_support(j.at("support"));
    return rm;
}

void write_role_map(const RoleMapFile& rm, const std::filesystem::path& path) {
    json roles;
    roles["y"] = rm.roles.y;
    roles["a0"] = rm.roles.a0;
    roles["a1"] = rm.roles.a1;
    roles["z0"] = rm.roles.z0;
    roles["z1"] = rm.roles.z1;
    roles["w0"] = rm.roles.w0;
    roles["w1"] = rm.roles.w1;
    roles["x0"] = rm.roles.x0;
    roles["x1"] = rm.roles.x1;
    roles["v"] = rm.roles.v;
    json j;
    j["roles"] = roles;
    j["support"] = support_to_json(rm.support);
    atomic_write_file(path, j.dump(2) + "\n");
}

PanelDataset load_dataset(const std::filesystem::path& csv_path,
                          const std::filesystem::path& rolemap_path) {
    const CsvData csv = read_csv(csv_path);
    const RoleMapFile rm = read_role_map(rolemap_path);
    std::map<std::string, std::vector<double>> columns;
    for (std::size_t j = 0; j < csv.header.size(); ++j) columns[csv.header[j]] = csv.columns[j];
    return dataset_from_columns(columns, rm.roles, rm.support);
}

namespace {

struct ParamField {
    const char* name;
    double DgmParams::* member;
};

const std::vector<ParamField>& param_fields() {
    static const std::vector<ParamField> fields = {
        {"x0_mean", &DgmParams::x0_mean}, {"x0_sd", &DgmParams::x0_sd},
        {"u0_mean", &DgmParams::u0_mean}, {"u0_sd", &DgmParams::u0_sd},
        {"a0_c", &DgmParams::a0_c},       {"a0_x0", &DgmParams::a0_x0},
        {"a0_u0", &DgmParams::a0_u0},     {"z0_c", &DgmParams::z0_c},
        {"z0_a0", &DgmParams::z0_a0},     {"z0_x0", &DgmParams::z0_x0},
        {"z0_u0", &DgmParams::z0_u0},     {"z0_sd", &DgmParams::z0_sd},
        {"w0_c", &DgmParams::w0_c},       {"w0_x0", &DgmParams::w0_x0},
        {"w0_u0", &DgmParams::w0_u0},     {"w0_sd", &DgmParams::w0_sd},
        {"x1_c", &DgmParams::x1_c},       {"x1_a0", &DgmParams::x1_a0},
        {"x1_x0", &DgmParams::x1_x0},     {"x1_sd", &DgmParams::x1_sd},
        {"u1_c", &DgmParams::u1_c},       {"u1_a0", &DgmParams::u1_a0},
        {"u1_u0", &DgmParams::u1_u0},     {"u1_sd", &DgmParams::u1_sd},
        {"a1_c", &DgmParams::a1_c},       {"a1_a0", &DgmParams::a1_a0},
        {"a1_x", &DgmParams::a1_x},       {"a1_u", &DgmParams::a1_u},
        {"z1_c", &DgmParams::z1_c},       {"z1_a", &DgmParams::z1_a},
        {"z1_x", &DgmParams::z1_x},       {"z1_u", &DgmParams::z1_u},
        {"z1_sd", &DgmParams::z1_sd},     {"w1_c", &DgmParams::w1_c},
        {"w1_x", &DgmParams::w1_x},       {"w1_u", &DgmParams::w1_u},
        {"w1_sd", &DgmParams::w1_sd},     {"y_c", &DgmParams::y_c},
        {"y_a1", &DgmParams::y_a1},       {"y_a0", &DgmParams::y_a0},
        {"y_x1", &DgmParams::y_x1},       {"y_u1", &DgmParams::y_u1},
        {"y_x0", &DgmParams::y_x0},       {"y_u0", &DgmParams::y_u0},
        {"y_sd", &DgmParams::y_sd},
    };
    return fields;
}

}  // namespace

DgmParams dgm_params_from_json_file(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    if (!j.is_object()) throw ValidationError("params file must be a JSON object");
    std::vector<std::string> known;
    for (const auto& f : param_fields()) known.push_back(f.name);
    reject_unknown_keys(j, known, "params");

    DgmParams p;
    for (const auto& f : param_fields()) {
        if (!j.contains(f.name)) continue;
        const json& v = j.at(f.name);
        if (!v.is_number()) throw ValidationError(std::string("param ") + f.name + " must be a number");
        p.*(f.member) = v.get<double>();
    }
    p.validate();
    return p;
}

std::string dgm_params_to_json(const DgmParams& params) {
    json j;
    for (const auto& f : param_fields()) j[f.name] = params.*(f.member);
    return j.dump(2) + "\n";
}

std::string estimate_report_to_json(const EstimateReport& report, const std::string& msmm_kind) {
    json j;
    j["estimator"] = estimator_name(report.estimator);
    j["msmm"] = msmm_kind;
    j["n"] = static_cast<long long>(report.n);
    j["beta_hat"] = std::vector<double>(report.beta_hat.data(),
                                        report.beta_hat.data() + report.beta_hat.size());
    j["se"] = std::vector<double>(report.se.data(), report.se.data() + report.se.size());
    json cov = json::array();
    for (Eigen::Index i = 0; i < report.cov.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < report.cov.cols(); ++k) row.push_back(report.cov(i, k));
        cov.push_back(row);
    }
    j["cov"] = cov;
    json ci = json::array();
    for (Eigen::Index i = 0; i < report.ci95.rows(); ++i)
        ci.push_back(json::array({report.ci95(i, 0), report.ci95(i, 1)}));
    j["ci95"] = ci;
    json diag;
    diag["h_converged"] = report.diag.h_converged;
    diag["q_converged"] = report.diag.q_converged;
    diag["h_resid"] = report.diag.h_resid;
    diag["q_norm"] = report.diag.q_norm;
    diag["q0_iterations"] = report.diag.q0_iterations;
    diag["q1_iterations"] = report.diag.q1_iterations;
    diag["truncated_weights"] = report.diag.truncated_weights;
    diag["flags"] = report.diag.flags;
    j["diagnostics"] = diag;
    return j.dump(2) + "\n";
}

namespace {

DTable table_from_json(const json& j, std::vector<int> dims, const std::string& name) {
    DTable t(dims);
    if (!j.is_array() || j.size() != t.raw().size()) {
        std::ostringstream os;
        os << "table " << name << " must be a flat array of length " << t.raw().size();
        throw ValidationError(os.str());
    }
    for (std::size_t i = 0; i < t.raw().size(); ++i) {
        if (!j[i].is_number()) throw ValidationError("table " + name + " must contain numbers");
        t.raw()[i] = j[i].get<double>();
    }
    return t;
}

}  // namespace

DiscreteWorld world_from_json_file(const std::filesystem::path& path) {
    const json j = parse_json_file(path);
    if (!j.is_object()) throw ValidationError("world file must be a JSON object");
    reject_unknown_keys(j, {"dims", "tables", "ymean", "y_z_shift"}, "world");
    if (!j.contains("dims") || !j.contains("tables") || !j.contains("ymean"))
        throw ValidationError("world file must contain dims, tables and ymean");

    const json& dj = j.at("dims");
    reject_unknown_keys(dj, {"x0", "u0", "z0", "w0", "x1", "u1", "z1", "w1"}, "world dims");
    WorldDims d;
    auto dim = [&](const char* key) {
        if (!dj.contains(key) || !dj.at(key).is_number_integer())
            throw ValidationError(std::string("world dims missing integer '") + key + "'");
        return dj.at(key).get<int>();
    };
    d.x0 = dim("x0");
    d.u0 = dim("u0");
    d.z0 = dim("z0");
    d.w0 = dim("w0");
    d.x1 = dim("x1");
    d.u1 = dim("u1");
    d.z1 = dim("z1");
    d.w1 = dim("w1");

    const json& tj = j.at("tables");
    reject_unknown_keys(tj, {"px0", "pu0", "pa0", "pz0", "pw0", "px1", "pu1", "pa1", "pz1", "pw1"},
                        "world tables");
    auto table = [&](const char* key, std::vector<int> dims) {
        if (!tj.contains(key))
            throw ValidationError(std::string("world tables missing '") + key + "'");
        return table_from_json(tj.at(key), std::move(dims), key);
    };

    DiscreteWorld w;
    w.dims = d;
    w.px0 = table("px0", {d.x0});
    w.pu0 = table("pu0", {d.x0, d.u0});
    w.pa0 = table("pa0", {d.x0, d.u0});
    w.pz0 = table("pz0", {2, d.x0, d.u0, d.z0});
    w.pw0 = table("pw0", {d.x0, d.u0, d.w0});
    w.px1 = table("px1", {2, d.x0, d.u0, d.x1});
    w.pu1 = table("pu1", {2, d.x0, d.u0, d.u1});
    w.pa1 = table("pa1", {2, d.x0, d.x1, d.u0, d.u1});
    w.pz1 = table("pz1", {2, 2, d.x0, d.x1, d.u0, d.u1, d.z1});
    w.pw1 = table("pw1", {2, d.x0, d.x1, d.u0, d.u1, d.w1});
    w.ymean = table_from_json(j.at("ymean"), {2, 2, d.x0, d.x1, d.u0, d.u1}, "ymean");
    if (j.contains("y_z_shift")) {
        if (!j.at("y_z_shift").is_number())
            throw ValidationError("y_z_shift must be a number");
        w.y_z_shift = j.at("y_z_shift").get<double>();
    }
    w.validate();
    return w;
}

std::string world_to_json(const DiscreteWorld& w) {
    json j;
    j["dims"] = {{"x0", w.dims.x0}, {"u0", w.dims.u0}, {"z0", w.dims.z0}, {"w0", w.dims.w0},
                 {"x1", w.dims.x1}, {"u1", w.dims.u1}, {"z1", w.dims.z1}, {"w1", w.dims.w1}};
    json tables;
    tables["px0"] = w.px0.raw();
    tables["pu0"] = w.pu0.raw();
    tables["pa0"] = w.pa0.raw();
    tables["pz0"] = w.pz0.raw();
    tables["pw0"] = w.pw0.raw();
    tables["px1"] = w.px1.raw();
    tables["pu1"] = w.pu1.raw();
    tables["pa1"] = w.pa1.raw();
    tables["pz1"] = w.pz1.raw();
    tables["pw1"] = w.pw1.raw();
    j["tables"] = tables;
    j["ymean"] = w.ymean.raw();
    j["y_z_shift"] = w.y_z_shift;
    return j.dump(2) + "\n";
}

}  // namespace proxmsm

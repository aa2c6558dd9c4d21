#pragma once

#include <pathcv/cv.hpp>
#include <pathcv/error.hpp>
#include <pathcv/format.hpp>
#include <pathcv/glm.hpp>
#include <pathcv/path.hpp>
#include <pathcv/sim.hpp>

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace pathcv {

using Json = nlohmann::ordered_json;

inline constexpr const char* schema_version = "1";

namespace detail {

inline std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

/// Splits one CSV line; double quotes group fields and "" is a literal quote.
inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool parse_number(const std::string& s, double& v)
{
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    const auto res = std::from_chars(b, e, v);
    return res.ec == std::errc{} && res.ptr == e && std::isfinite(v);
}

} // namespace detail

/**
 * Reads a header-row CSV into a Dataset; every column except the response
 * becomes a design column. Errors cite the 1-based data row and the column
 * name.
 */
inline Dataset load_csv(const std::string& path, const std::string& response_column, FamilyKind family)
{
    std::ifstream in(path);
    if (!in) detail::fail(ErrorCode::io_error, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) detail::fail(ErrorCode::parse_error, "'" + path + "' is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = detail::split_csv_line(line);
    int resp = -1;
    for (std::size_t j = 0; j < header.size(); ++j)
        if (header[j] == response_column) resp = static_cast<int>(j);
    if (resp < 0) detail::fail(ErrorCode::parse_error, "response column '" + response_column + "' not found in header");

    std::vector<std::vector<double>> rows;
    int row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size()) {
            detail::fail(ErrorCode::parse_error, "row " + std::to_string(row) + ": expected " +
                                                     std::to_string(header.size()) + " fields, found " +
                                                     std::to_string(cells.size()));
        }
        std::vector<double> vals(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            if (!detail::parse_number(cells[j], vals[j])) {
                detail::fail(ErrorCode::parse_error, "row " + std::to_string(row) + ", column '" + header[j] +
                                                         "': non-numeric value '" + cells[j] + "'");
            }
        }
        if (family == FamilyKind::binomial && vals[static_cast<std::size_t>(resp)] != 0.0 &&
            vals[static_cast<std::size_t>(resp)] != 1.0) {
            detail::fail(ErrorCode::parse_error, "row " + std::to_string(row) + ": binomial response '" +
                                                     cells[static_cast<std::size_t>(resp)] + "' is not 0 or 1");
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) detail::fail(ErrorCode::parse_error, "'" + path + "' has no data rows");

    Dataset d;
    d.family = family == FamilyKind::gaussian ? GlmFamily::gaussian() : GlmFamily::binomial();
    const int n = static_cast<int>(rows.size());
    const int p = static_cast<int>(header.size()) - 1;
    d.X.resize(n, p);
    d.y.resize(n);
    for (std::size_t j = 0; j < header.size(); ++j)
        if (static_cast<int>(j) != resp) d.column_names.push_back(header[j]);
    for (int i = 0; i < n; ++i) {
        int c = 0;
        for (std::size_t j = 0; j < header.size(); ++j) {
            const double v = rows[static_cast<std::size_t>(i)][j];
            if (static_cast<int>(j) == resp)
                d.y(i) = v;
            else
                d.X(i, c++) = v;
        }
    }
    return d;
}

/// Design columns then the response, 17 significant digits; default names x1..xp.
inline std::string dataset_csv(const Dataset& d, const std::string& response_name = "y")
{
    std::ostringstream os;
    for (int j = 0; j < d.p(); ++j) {
        os << csv_field(d.column_names.empty() ? "x" + std::to_string(j + 1) : d.column_names[static_cast<std::size_t>(j)])
           << ',';
    }
    os << csv_field(response_name) << '\n';
    for (int i = 0; i < d.n(); ++i) {
        for (int j = 0; j < d.p(); ++j) os << format_double(d.X(i, j)) << ',';
        os << format_double(d.y(i)) << '\n';
    }
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) detail::fail(ErrorCode::io_error, "cannot write '" + path + "'");
    out << text;
    if (!out) detail::fail(ErrorCode::io_error, "write to '" + path + "' failed");
}

inline void write_csv(const std::string& path, const Dataset& d, const std::string& response_name = "y")
{
    write_text(path, dataset_csv(d, response_name));
}

inline std::string read_text(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) detail::fail(ErrorCode::io_error, "cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ---- JSON payloads --------------------------------------------------------

/// Sparse (index, value) pairs.
inline Json sparse_json(const Vector& v)
{
    Json out = Json::array();
    for (int j = 0; j < v.size(); ++j)
        if (v(j) != 0.0) out.push_back(Json::array({j, v(j)}));
    return out;
}

/// Finite doubles as numbers, the rest as the strings "inf", "-inf", "nan".
inline Json number_json(double v)
{
    if (std::isfinite(v)) return v;
    return format_double(v);
}

inline Json active_json(const ActiveSet& a, const std::vector<std::string>& names)
{
    Json j = Json::object();
    j["indices"] = a.indices();
    if (!names.empty()) {
        Json nm = Json::array();
        for (int i : a.indices()) nm.push_back(names[static_cast<std::size_t>(i)]);
        j["names"] = nm;
    }
    return j;
}

inline Json path_json(const SolutionPath& path)
{
    Json j;
    j["schema_version"] = schema_version;
    j["family"] = family_name(path.family);
    j["penalty"] = penalty_name(path.penalty.kind);
    j["gamma"] = number_json(path.penalty.gamma);
    j["lambda_max"] = path.grid.lambda_max;
    j["min_ratio"] = path.grid.min_ratio;
    j["p"] = path.p;
    j["saturated"] = path.saturated;
    Json pts = Json::array();
    for (int k = 0; k < path.size(); ++k) {
        Json pt;
        pt["position"] = k;
        pt["lambda"] = path.grid[k];
        pt["nonzero"] = path.active_set(k).size();
        pt["converged"] = static_cast<bool>(path.converged[static_cast<std::size_t>(k)]);
        pt["sweeps"] = path.n_iter[static_cast<std::size_t>(k)];
        pt["intercept"] = path.intercept(k);
        pt["coef"] = sparse_json(path.dense(k));
        pts.push_back(pt);
    }
    j["path"] = pts;
    return j;
}

/// Sparse triplets: position, lambda, index, value (index -1 carries the intercept when fitted).
inline std::string path_csv(const SolutionPath& path)
{
    std::ostringstream os;
    os << "position,lambda,index,value\n";
    for (int k = 0; k < path.size(); ++k) {
        const auto& b = path.betas[static_cast<std::size_t>(k)];
        if (path.options.intercept) os << k << ',' << format_double(path.grid[k]) << ",-1," << format_double(b.intercept) << '\n';
        for (int t = 0; t < b.support.size(); ++t) {
            os << k << ',' << format_double(path.grid[k]) << ',' << b.support[t] << ','
               << format_double(b.values[static_cast<std::size_t>(t)]) << '\n';
        }
    }
    return os.str();
}

inline Json curve_json(const CvCurve& c)
{
    Json j;
    j["axis"] = c.axis == CurveAxis::lambda_index ? "lambda_index" : "active_set_index";
    j["positions"] = c.positions;
    Json m = Json::array(), s = Json::array();
    for (std::size_t k = 0; k < c.mean_loss.size(); ++k) {
        m.push_back(number_json(c.mean_loss[k]));
        s.push_back(number_json(c.se_loss[k]));
    }
    j["mean_loss"] = m;
    j["se_loss"] = s;
    j["n_valid_splits"] = c.n_valid_splits;
    return j;
}

inline std::string curve_csv(const CvCurve& c)
{
    std::ostringstream os;
    os << "position,path_position,mean_loss,se_loss,n_valid_splits\n";
    for (int k = 0; k < c.size(); ++k) {
        const auto ks = static_cast<std::size_t>(k);
        os << k << ',' << c.positions[ks] << ',' << format_double(c.mean_loss[ks]) << ','
           << format_double(c.se_loss[ks]) << ',' << c.n_valid_splits[ks] << '\n';
    }
    return os.str();
}

inline Json report_json(const SelectionReport& rep, const std::vector<std::string>& names = {})
{
    Json j;
    j["schema_version"] = schema_version;
    j["method"] = method_name(rep.method);
    j["selected_position"] = rep.selected_position;
    j["selected_path_position"] = rep.selected_path_position;
    j["selected_lambda"] = rep.selected_lambda ? Json(*rep.selected_lambda) : Json(nullptr);
    j["selected_active"] = active_json(rep.selected_active, names);
    Json refit;
    refit["coef"] = sparse_json(rep.refit.full_coef);
    refit["intercept"] = rep.refit.intercept;
    refit["neg_log_lik"] = number_json(rep.refit.neg_log_lik);
    refit["converged"] = rep.refit.converged;
    refit["grad_norm"] = number_json(rep.refit.grad_norm);
    j["refit"] = refit;
    if (rep.penalized) {
        Json pen;
        pen["coef"] = sparse_json(rep.penalized->dense());
        pen["intercept"] = rep.penalized->intercept;
        j["penalized"] = pen;
    }
    if (rep.method == Method::ccv) {
        j["size_cap"] = rep.size_cap;
        j["truncated_at"] = rep.truncated_at ? Json(*rep.truncated_at) : Json(nullptr);
    }
    j["curve"] = curve_json(rep.curve);
    Json log = Json::array();
    for (const auto& e : rep.split_log) log.push_back(Json{{"split", e.split}, {"position", e.position}, {"what", e.what}});
    j["split_log"] = log;
    return j;
}

inline Json error_json(ErrorCode code, const std::string& message)
{
    Json j;
    j["schema_version"] = schema_version;
    j["error"] = Json{{"code", std::string(error_code_name(code))},
                      {"status", static_cast<int>(code)},
                      {"message", message}};
    return j;
}

// ---- simulation config ----------------------------------------------------

namespace detail {

template <class T>
T json_get(const Json& j, const char* key, T fallback)
{
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
        return j[key].get<T>();
    } catch (const std::exception& e) {
        fail(ErrorCode::config_error, std::string("config field '") + key + "': " + e.what());
    }
}

inline MethodSpec method_from_json(const Json& j)
{
    MethodSpec m;
    if (j.is_string()) {
        m.method = parse_method(j.get<std::string>());
        return m;
    }
    if (!j.is_object() || !j.contains("method")) fail(ErrorCode::config_error, "config: each method needs a 'method' name");
    m.method = parse_method(j["method"].get<std::string>());
    m.k = json_get<int>(j, "k", 10);
    if (j.contains("n_c")) m.n_c = json_get<int>(j, "n_c", 0);
    if (j.contains("r")) m.r = json_get<int>(j, "r", 0);
    if (j.contains("size_cap")) m.size_cap = json_get<int>(j, "size_cap", 0);
    if (j.contains("rule")) {
        const auto rule = j["rule"].get<std::string>();
        if (m.method == Method::kfold && rule == "one_se") m.method = Method::kfold_1se;
        else if (rule != "min" && rule != "one_se") fail(ErrorCode::config_error, "config: unknown rule '" + rule + "'");
    }
    return m;
}

} // namespace detail

/**
 * Simulation settings from JSON. Unknown keys are rejected so typos do not
 * silently fall back to defaults.
 */
inline SimConfig sim_config_from_json(const Json& j)
{
    static const std::vector<std::string> known = {"family", "n", "p", "rho", "beta", "sigma", "methods", "penalties",
                                                   "gamma", "n_reps", "base_seed", "test_size", "r", "n_lambda",
                                                   "min_ratio", "intercept", "sweep", "threads", "description"};
    if (!j.is_object()) detail::fail(ErrorCode::config_error, "config: top level must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::find(known.begin(), known.end(), k) == known.end())
            detail::fail(ErrorCode::config_error, "config: unknown field '" + k + "'");
    }
    SimConfig c;
    try {
        c.family = parse_family(detail::json_get<std::string>(j, "family", "gaussian")).kind;
        if (c.family == FamilyKind::binomial) c.beta = {{0, 3.0}, {1, 1.5}, {2, 0.0}, {3, 0.0}, {4, 2.0}};
        c.n = detail::json_get<int>(j, "n", c.n);
        c.p = detail::json_get<int>(j, "p", c.p);
        c.rho = detail::json_get<double>(j, "rho", c.rho);
        c.sigma = detail::json_get<double>(j, "sigma", c.sigma);
        c.n_reps = detail::json_get<int>(j, "n_reps", c.n_reps);
        c.base_seed = detail::json_get<std::uint64_t>(j, "base_seed", c.base_seed);
        c.test_size = detail::json_get<int>(j, "test_size", c.test_size);
        c.r = detail::json_get<int>(j, "r", c.r);
        c.n_lambda = detail::json_get<int>(j, "n_lambda", c.n_lambda);
        if (j.contains("min_ratio")) c.min_ratio = detail::json_get<double>(j, "min_ratio", 0.0);
        c.intercept = detail::json_get<bool>(j, "intercept", c.intercept);
        c.threads = detail::json_get<int>(j, "threads", c.threads);
        if (j.contains("beta")) {
            c.beta.clear();
            const auto& b = j["beta"];
            if (b.is_array()) {
                // leading coefficients: [2.0, 1.6, ...]
                for (std::size_t i = 0; i < b.size(); ++i) c.beta.emplace_back(static_cast<int>(i), b[i].get<double>());
            } else if (b.is_object()) {
                // sparse: {"index": value}
                for (const auto& [k, v] : b.items()) c.beta.emplace_back(std::stoi(k), v.get<double>());
            } else {
                detail::fail(ErrorCode::config_error, "config: beta must be an array or an object");
            }
        }
        const double gamma = detail::json_get<double>(j, "gamma", 3.0);
        if (j.contains("penalties")) {
            c.penalties.clear();
            for (const auto& p : j["penalties"]) c.penalties.push_back(parse_penalty(p.get<std::string>(), gamma));
        }
        if (j.contains("methods")) {
            for (const auto& m : j["methods"]) c.methods.push_back(detail::method_from_json(m));
        }
        if (j.contains("sweep")) {
            NcSweep s;
            for (const auto& m : j["sweep"].at("methods")) s.methods.push_back(parse_method(m.get<std::string>()));
            s.n_c = j["sweep"].at("n_c").get<std::vector<int>>();
            c.sweep = s;
        }
    } catch (const Error& e) {
        if (e.code() == ErrorCode::config_error) throw;
        detail::fail(ErrorCode::config_error, std::string("config: ") + e.what());
    } catch (const std::exception& e) {
        detail::fail(ErrorCode::config_error, std::string("config: ") + e.what());
    }
    try {
        c.validate();
    } catch (const Error& e) {
        detail::fail(ErrorCode::config_error, e.what());
    }
    return c;
}

inline SimConfig load_sim_config(const std::string& path)
{
    Json j;
    try {
        j = Json::parse(read_text(path));
    } catch (const Json::exception& e) {
        detail::fail(ErrorCode::config_error, "config '" + path + "': " + e.what());
    }
    return sim_config_from_json(j);
}

} // namespace pathcv

#include "msplit/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace msplit {

namespace {

std::string shown(const std::string& key, const std::string& display) {
    return display.empty() ? key : display;
}

}  // namespace

Json parse_config_text(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config: not a valid document: ") + e.what());
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("config: cannot read file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const Json& require_key(const Json& obj, const std::string& key, const std::string& display) {
    if (!obj.is_object())
        throw config_error("config: key '" + shown(key, display) +
                           "' looked up in a non-object value");
    auto it = obj.find(key);
    if (it == obj.end())
        throw config_error("config: missing key '" + shown(key, display) + "'");
    return *it;
}

double require_number(const Json& obj, const std::string& key, const std::string& display) {
    const Json& v = require_key(obj, key, display);
    if (!v.is_number())
        throw config_error("config: key '" + shown(key, display) + "' must be a number");
    return v.get<double>();
}

std::int64_t require_integer(const Json& obj, const std::string& key,
                             const std::string& display) {
    const Json& v = require_key(obj, key, display);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw config_error("config: key '" + shown(key, display) + "' must be an integer");
    return v.get<std::int64_t>();
}

std::string require_string(const Json& obj, const std::string& key,
                           const std::string& display) {
    const Json& v = require_key(obj, key, display);
    if (!v.is_string())
        throw config_error("config: key '" + shown(key, display) + "' must be a string");
    return v.get<std::string>();
}

bool get_bool(const Json& obj, const std::string& key, bool fallback) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_boolean())
        throw config_error("config: key '" + key + "' must be true or false");
    return v.get<bool>();
}

std::vector<double> number_list(const Json& j, const std::string& display) {
    if (!j.is_array())
        throw config_error("config: key '" + display + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const Json& v : j) {
        if (!v.is_number())
            throw config_error("config: key '" + display + "' must be an array of numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<std::int64_t> integer_list(const Json& j, const std::string& display) {
    if (!j.is_array())
        throw config_error("config: key '" + display + "' must be an array of integers");
    std::vector<std::int64_t> out;
    out.reserve(j.size());
    for (const Json& v : j) {
        if (!v.is_number_integer() && !v.is_number_unsigned())
            throw config_error("config: key '" + display + "' must be an array of integers");
        out.push_back(v.get<std::int64_t>());
    }
    return out;
}

ChainSpec spec_from_json(const Json& j) {
    ChainSpec spec;
    spec.gamma1 = Measure(number_list(require_key(j, "gamma1", "spec.gamma1"), "spec.gamma1"));
    const Json& ks = require_key(j, "kernels", "spec.kernels");
    if (!ks.is_array())
        throw config_error("config: key 'spec.kernels' must be an array of matrices");
    int idx = 2;  // interior blocks are numbered from the second step
    for (const Json& kj : ks) {
        const std::string name = "spec.kernels[" + std::to_string(idx++) + "]";
        if (!kj.is_array() || kj.empty())
            throw config_error("config: key '" + name + "' must be a non-empty matrix");
        std::vector<std::vector<double>> rows;
        rows.reserve(kj.size());
        for (const Json& row : kj) rows.push_back(number_list(row, name));
        SubKernel P(rows.size(), rows.front().size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != P.cols)
                throw config_error("config: key '" + name + "' has ragged rows");
            for (std::size_t c = 0; c < P.cols; ++c) P(i, c) = rows[i][c];
        }
        spec.kernels.push_back(std::move(P));
    }
    spec.fM = LevelFn(number_list(require_key(j, "fM", "spec.fM"), "spec.fM"));
    spec.M = int(spec.kernels.size()) + 1;
    return spec;
}

Json spec_to_json(const ChainSpec& spec) {
    Json j;
    j["gamma1"] = spec.gamma1.w;
    Json ks = Json::array();
    for (const SubKernel& P : spec.kernels) {
        Json m = Json::array();
        for (std::size_t i = 0; i < P.rows; ++i) {
            Json row = Json::array();
            for (std::size_t c = 0; c < P.cols; ++c) row.push_back(P(i, c));
            m.push_back(std::move(row));
        }
        ks.push_back(std::move(m));
    }
    j["kernels"] = std::move(ks);
    j["fM"] = spec.fM.v;
    return j;
}

Plan plan_from_json(const Json& j) {
    Plan plan;
    plan.N = require_integer(j, "N", "plan.N");
    plan.R = integer_list(require_key(j, "R", "plan.R"), "plan.R");
    return plan;
}

Json plan_to_json(const Plan& plan) {
    Json j;
    j["N"] = plan.N;
    j["R"] = plan.R;
    return j;
}

OUConfig ou_from_json(const Json& j) {
    OUConfig cfg;
    cfg.lambda1 = require_number(j, "lambda1", "ou.lambda1");
    cfg.lambda2 = require_number(j, "lambda2", "ou.lambda2");
    cfg.sigma = require_number(j, "sigma", "ou.sigma");
    const std::vector<double> x0 = number_list(require_key(j, "x0", "ou.x0"), "ou.x0");
    if (x0.size() != 2) throw config_error("config: key 'ou.x0' must hold two coordinates");
    cfg.x0 = {x0[0], x0[1]};
    cfg.dt = require_number(j, "dt", "ou.dt");
    cfg.kill_radius = require_number(j, "kill_radius", "ou.kill_radius");
    if (j.contains("max_steps")) cfg.max_steps = require_integer(j, "max_steps", "ou.max_steps");
    return cfg;
}

Json ou_to_json(const OUConfig& cfg) {
    Json j;
    j["lambda1"] = cfg.lambda1;
    j["lambda2"] = cfg.lambda2;
    j["sigma"] = cfg.sigma;
    j["x0"] = {cfg.x0.x, cfg.x0.y};
    j["dt"] = cfg.dt;
    j["kill_radius"] = cfg.kill_radius;
    j["max_steps"] = cfg.max_steps;
    return j;
}

CostModel cost_model_from_name(const std::string& name) {
    if (name == "unit") return unit_cost();
    if (name == "reciprocal") return reciprocal_cost();
    throw config_error("config: key 'cost_model' must be \"unit\" or \"reciprocal\"");
}

std::string format_report(const Json& report) {
    return report.dump(2) + "\n";
}

void append_report(const std::string& path, const Json& report) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw config_error("config: cannot open report file '" + path + "'");
    out << format_report(report);
    if (!out) throw config_error("config: cannot write report file '" + path + "'");
}

void write_sidecar(const std::string& path, const std::vector<std::string>& columns,
                   const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("config: cannot open sidecar file '" + path + "'");
    out << '#';
    for (const std::string& c : columns) out << ' ' << c;
    out << '\n';
    char buf[32];
    for (const std::vector<double>& row : rows) {
        if (row.size() != columns.size())
            throw config_error("sidecar: row width does not match the column header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            out << (i ? " " : "") << buf;
        }
        out << '\n';
    }
    if (!out) throw config_error("config: cannot write sidecar file '" + path + "'");
}

}  // namespace msplit

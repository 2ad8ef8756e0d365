#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "noisy_mdp/errors.hpp"
#include "noisy_mdp/experiment_harness.hpp"

namespace noisy_mdp {

using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kTopKeys = {"name", "n", "actions", "confusion", "seed",
                                        "estimator", "output_dir", "snapshot_every"};
const std::set<std::string> kParamKeys = {"steps", "burn_in", "exact_q", "actions", "starts", "tol_loss",
                                          "grid_res", "particles", "abort_on_violation"};

[[noreturn]] void fail(const std::string& source, const std::string& field, const std::string& what) {
    throw ValidationError(source + ": field '" + field + "': " + what);
}

std::size_t read_count(const json& j, const std::string& source, const std::string& field) {
    if (!j.is_number_integer() || (!j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        fail(source, field, "expected a non-negative integer");
    }
    return j.get<std::size_t>();
}

Matrix read_matrix(const json& j, std::size_t n, const std::string& source, const std::string& field) {
    if (!j.is_array() || j.size() != n) fail(source, field, "expected " + std::to_string(n) + " rows");
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const json& row = j[i];
        if (!row.is_array() || row.size() != n) {
            fail(source, field, "row " + std::to_string(i) + " must have " + std::to_string(n) + " entries");
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (!row[k].is_number()) fail(source, field, "row " + std::to_string(i) + " has a non-numeric entry");
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = row[k].get<double>();
        }
    }
    try {
        return validated_stochastic(std::move(m), field);
    } catch (const ValidationError& e) {
        throw ValidationError(source + ": " + e.what());
    }
}

json matrix_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

void check_range(std::size_t v, std::size_t lo, std::size_t hi, const std::string& source, const std::string& field) {
    if (v < lo || v > hi) {
        fail(source, field, std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
}

void validate_with_source(const Scenario& s, const std::string& source) {
    const EstimatorConfig& e = s.estimator;
    check_range(e.steps, 1, kMaxSteps, source, "estimator.params.steps");
    if (e.burn_in) check_range(*e.burn_in, 0, kMaxSteps, source, "estimator.params.burn_in");
    check_range(e.starts, 1, kMaxStarts, source, "estimator.params.starts");
    check_range(e.grid_res, 2, kMaxGridRes, source, "estimator.params.grid_res");
    check_range(e.particles, 0, kMaxParticles, source, "estimator.params.particles");
    if (e.tol_loss && !(*e.tol_loss > 0.0)) fail(source, "estimator.params.tol_loss", "must be positive");
    const bool bayes = e.type == EstimatorType::bayes1 || e.type == EstimatorType::bayes2;
    if (bayes && e.particles == 0 && s.n != 2) {
        fail(source, "estimator.params.grid_res", "the grid support needs n = 2; set particles for larger n");
    }
    if (bayes && e.exact_q) fail(source, "estimator.params.exact_q", "not available for Bayes estimators");
    std::set<std::string> seen;
    for (const auto& a : e.actions) {
        if (std::find(s.action_names.begin(), s.action_names.end(), a) == s.action_names.end()) {
            fail(source, "estimator.params.actions", "unknown action '" + a + "'");
        }
        if (!seen.insert(a).second) fail(source, "estimator.params.actions", "duplicate action '" + a + "'");
    }
    if (s.output_dir.empty()) fail(source, "output_dir", "must not be empty");
}

}  // namespace

const char* to_string(EstimatorType type) {
    switch (type) {
        case EstimatorType::repetitive: return "repetitive";
        case EstimatorType::bayes1: return "bayes1";
        case EstimatorType::bayes2: return "bayes2";
        case EstimatorType::partition: return "partition";
    }
    return "?";
}

EstimatorType parse_estimator_type(const std::string& name) {
    if (name == "repetitive") return EstimatorType::repetitive;
    if (name == "bayes1") return EstimatorType::bayes1;
    if (name == "bayes2") return EstimatorType::bayes2;
    if (name == "partition") return EstimatorType::partition;
    throw ValidationError("unknown estimator '" + name + "' (repetitive|bayes1|bayes2|partition)");
}

std::vector<std::size_t> Scenario::action_indices() const {
    std::vector<std::size_t> out;
    if (estimator.actions.empty()) {
        for (std::size_t a = 0; a < action_names.size(); ++a) out.push_back(a);
        return out;
    }
    for (const auto& name : estimator.actions) {
        const auto it = std::find(action_names.begin(), action_names.end(), name);
        if (it == action_names.end()) throw ValidationError("unknown action '" + name + "'");
        out.push_back(static_cast<std::size_t>(it - action_names.begin()));
    }
    return out;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(source + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError(source + ": top level must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!kTopKeys.count(key)) fail(source, key, "unknown key");
    }

    Scenario s;
    if (j.contains("name")) {
        if (!j["name"].is_string()) fail(source, "name", "expected a string");
        s.name = j["name"].get<std::string>();
    }
    if (!j.contains("n")) fail(source, "n", "missing");
    s.n = read_count(j["n"], source, "n");
    if (s.n < 2) fail(source, "n", "need at least 2 states");

    if (!j.contains("actions") || !j["actions"].is_object() || j["actions"].empty()) {
        fail(source, "actions", "expected a non-empty object of named matrices");
    }
    std::vector<Matrix> transitions;
    for (const auto& [name, rows] : j["actions"].items()) {
        s.action_names.push_back(name);
        transitions.push_back(read_matrix(rows, s.n, source, "actions." + name));
    }
    s.mdp = Mdp(std::move(transitions));

    if (!j.contains("confusion")) fail(source, "confusion", "missing");
    s.truth = ConfusionMatrix(read_matrix(j["confusion"], s.n, source, "confusion"));

    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<std::int64_t>() >= 0)) {
            fail(source, "seed", "expected a non-negative integer");
        }
        s.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("output_dir")) {
        if (!j["output_dir"].is_string()) fail(source, "output_dir", "expected a string");
        s.output_dir = j["output_dir"].get<std::string>();
    } else if (!s.name.empty()) {
        s.output_dir = std::filesystem::path("out") / s.name;
    }
    if (j.contains("snapshot_every")) s.snapshot_every = read_count(j["snapshot_every"], source, "snapshot_every");

    if (j.contains("estimator")) {
        const json& e = j["estimator"];
        if (!e.is_object()) fail(source, "estimator", "expected an object");
        for (const auto& [key, _] : e.items()) {
            if (key != "type" && key != "params") fail(source, "estimator." + key, "unknown key");
        }
        if (e.contains("type")) {
            if (!e["type"].is_string()) fail(source, "estimator.type", "expected a string");
            try {
                s.estimator.type = parse_estimator_type(e["type"].get<std::string>());
            } catch (const ValidationError& err) {
                fail(source, "estimator.type", err.what());
            }
        }
        if (e.contains("params")) {
            const json& p = e["params"];
            if (!p.is_object()) fail(source, "estimator.params", "expected an object");
            for (const auto& [key, _] : p.items()) {
                if (!kParamKeys.count(key)) fail(source, "estimator.params." + key, "unknown key");
            }
            EstimatorConfig& c = s.estimator;
            const auto count = [&](const char* key) { return read_count(p[key], source, std::string("estimator.params.") + key); };
            const auto flag = [&](const char* key) {
                if (!p[key].is_boolean()) fail(source, std::string("estimator.params.") + key, "expected true or false");
                return p[key].get<bool>();
            };
            if (p.contains("steps")) c.steps = count("steps");
            if (p.contains("burn_in")) c.burn_in = count("burn_in");
            if (p.contains("exact_q")) c.exact_q = flag("exact_q");
            if (p.contains("starts")) c.starts = count("starts");
            if (p.contains("grid_res")) c.grid_res = count("grid_res");
            if (p.contains("particles")) c.particles = count("particles");
            if (p.contains("abort_on_violation")) c.abort_on_violation = flag("abort_on_violation");
            if (p.contains("tol_loss")) {
                if (!p["tol_loss"].is_number()) fail(source, "estimator.params.tol_loss", "expected a number");
                c.tol_loss = p["tol_loss"].get<double>();
            }
            if (p.contains("actions")) {
                if (!p["actions"].is_array()) fail(source, "estimator.params.actions", "expected a list of names");
                for (const auto& a : p["actions"]) {
                    if (!a.is_string()) fail(source, "estimator.params.actions", "expected a list of names");
                    c.actions.push_back(a.get<std::string>());
                }
            }
        }
    }
    validate_with_source(s, source);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(path.string() + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    Scenario s = parse_scenario(buf.str(), path.string());
    if (s.name.empty()) {
        s.name = path.stem().string();
        if (s.output_dir == std::filesystem::path("out")) s.output_dir = std::filesystem::path("out") / s.name;
    }
    return s;
}

void validate_scenario(const Scenario& s) { validate_with_source(s, s.name.empty() ? "scenario" : s.name); }

namespace {

json scenario_object(const Scenario& s) {
    json j;
    j["name"] = s.name;
    j["n"] = s.n;
    json actions = json::object();
    for (std::size_t a = 0; a < s.action_names.size(); ++a) actions[s.action_names[a]] = matrix_json(s.mdp.transition(a));
    j["actions"] = std::move(actions);
    j["confusion"] = matrix_json(s.truth.entries());
    j["seed"] = s.seed;
    const EstimatorConfig& e = s.estimator;
    json p;
    p["steps"] = e.steps;
    p["burn_in"] = e.burn_in ? json(*e.burn_in) : json(nullptr);
    p["exact_q"] = e.exact_q;
    p["actions"] = e.actions;
    p["starts"] = e.starts;
    p["tol_loss"] = e.tol_loss ? json(*e.tol_loss) : json(nullptr);
    p["grid_res"] = e.grid_res;
    p["particles"] = e.particles;
    p["abort_on_violation"] = e.abort_on_violation;
    j["estimator"] = {{"type", to_string(e.type)}, {"params", std::move(p)}};
    j["output_dir"] = s.output_dir.generic_string();
    j["snapshot_every"] = s.snapshot_every;
    return j;
}

}  // namespace

std::string scenario_json(const Scenario& s) { return scenario_object(s).dump(2); }

std::string scenario_digest(const Scenario& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    // Where the artifacts go does not change what is computed.
    json j = scenario_object(s);
    j.erase("output_dir");
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace noisy_mdp

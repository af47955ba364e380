#include "lab/harness.hpp"

#include "lab/errors.hpp"
#include "lab/format.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace lab {

using nlohmann::json;

namespace {

std::string type_name(const json& j) { return j.type_name(); }

}  // namespace

ConfigBlock::ConfigBlock(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config key '" + (path_.empty() ? std::string("<root>") : path_) + "': expected an object");
}

std::string ConfigBlock::key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

bool ConfigBlock::has(const std::string& key) const { return j_.contains(key); }

const json& ConfigBlock::get(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError("config key '" + key_path(key) + "': missing");
    used_.insert(key);
    return j_.at(key);
}

const json& ConfigBlock::raw(const std::string& key) const { return get(key); }

double ConfigBlock::number(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_number()) throw ConfigError("config key '" + key_path(key) + "': expected a number, got " + type_name(v));
    return v.get<double>();
}

double ConfigBlock::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

int ConfigBlock::integer(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_number_integer()) throw ConfigError("config key '" + key_path(key) + "': expected an integer, got " + type_name(v));
    return v.get<int>();
}

int ConfigBlock::integer(const std::string& key, int fallback) const { return has(key) ? integer(key) : fallback; }

bool ConfigBlock::boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = get(key);
    if (!v.is_boolean()) throw ConfigError("config key '" + key_path(key) + "': expected a boolean, got " + type_name(v));
    return v.get<bool>();
}

std::string ConfigBlock::string(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_string()) throw ConfigError("config key '" + key_path(key) + "': expected a string, got " + type_name(v));
    return v.get<std::string>();
}

std::string ConfigBlock::string(const std::string& key, const std::string& fallback) const {
    return has(key) ? string(key) : fallback;
}

std::vector<double> ConfigBlock::numbers(const std::string& key) const {
    const json& v = get(key);
    if (!v.is_array()) throw ConfigError("config key '" + key_path(key) + "': expected an array, got " + type_name(v));
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError("config key '" + key_path(key) + "[" + std::to_string(i) + "]': expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

std::vector<double> ConfigBlock::numbers(const std::string& key, const std::vector<double>& fallback) const {
    return has(key) ? numbers(key) : fallback;
}

ConfigBlock ConfigBlock::block(const std::string& key) const { return ConfigBlock(get(key), key_path(key)); }

void ConfigBlock::finish() const {
    for (const auto& [k, v] : j_.items())
        if (!used_.count(k)) throw ConfigError("config key '" + key_path(k) + "': unknown key");
}

std::string config_hash(const json& body) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : body.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config key '<root>': expected an object");
    ExperimentConfig c;
    ConfigBlock root(j, "");
    c.experiment = root.string("experiment");
    bool known = false;
    for (const auto& id : experiment_ids()) known = known || id == c.experiment;
    if (!known) throw ConfigError("config key 'experiment': unknown experiment id '" + c.experiment + "'");
    if (root.has("seed")) {
        const json& s = root.raw("seed");
        if (!s.is_number_integer()) throw ConfigError("config key 'seed': expected an integer, got " + std::string(s.type_name()));
        c.seed = s.get<long long>();
    }
    c.out_dir = root.string("out", "");
    c.body = j;
    c.body.erase("out");
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open config " + p.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + p.string() + ": " + e.what());
    }
    return from_json(j);
}

std::string ExperimentConfig::hash() const { return config_hash(body); }

void Table::add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::logic_error("table " + name + ": row width mismatch");
    rows.push_back(std::move(row));
}

std::string Table::csv() const {
    std::string s;
    for (std::size_t k = 0; k < columns.size(); ++k) s += (k ? "," : "") + columns[k];
    s += '\n';
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.size(); ++k) s += (k ? "," : "") + r[k];
        s += '\n';
    }
    return s;
}

bool ExperimentReport::passed() const {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

void ExperimentReport::check(std::string name, double value, const std::string& op, double limit) {
    bool ok = false;
    if (op == "<=") ok = value <= limit;
    else if (op == ">=") ok = value >= limit;
    else if (op == "==") ok = value == limit;
    else throw std::logic_error("check: unknown relation " + op);
    checks.push_back({std::move(name), value, op, limit, ok && std::isfinite(value)});
}

void ExperimentReport::check_equal(std::string name, const std::string& value, const std::string& expected) {
    results[name] = value;
    results[name + "_expected"] = expected;
    checks.push_back({std::move(name), value == expected ? 1.0 : 0.0, "==", 1.0, value == expected});
}

json ExperimentReport::to_json() const {
    json j;
    j["experiment"] = experiment;
    j["config_hash"] = config_hash;
    j["versions"] = {{"lab", "1.0.0"},
                     {"json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                  "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    j["config"] = config;
    j["tolerances"] = tolerances;
    j["results"] = results;
    json cs = json::object();
    for (const auto& c : checks) cs[c.name] = {{"value", c.value}, {"op", c.op}, {"limit", c.limit}, {"pass", c.pass}};
    j["checks"] = cs;
    j["pass"] = passed();
    json ts = json::array();
    for (const auto& t : tables) ts.push_back(t.name + ".csv");
    for (const auto& a : artifacts) ts.push_back(a.name);
    j["files"] = ts;
    return j;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << s;
}

}  // namespace

void ExperimentReport::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    write_file(dir / "report.json", to_json().dump(2) + "\n");
    for (const auto& t : tables) write_file(dir / (t.name + ".csv"), t.csv());
    for (const auto& a : artifacts) write_file(dir / a.name, a.content);
}

std::string GoldenVerdict::summary() const {
    std::string s = std::string(pass ? "PASS" : "FAIL") + " (" + std::to_string(fields) + " fields";
    if (!drifts.empty()) s += ", " + std::to_string(drifts.size()) + " drifted within tolerance";
    s += ")\n";
    for (const auto& f : failures) s += "  FAIL " + f + "\n";
    for (const auto& d : drifts) s += "  drift " + d + "\n";
    return s;
}

namespace {

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
    if (j.is_object() && !j.empty()) {
        for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array() && !j.empty()) {
        for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
    } else {
        out.emplace_back(prefix, j);
    }
}

const json* lookup(const json& j, const std::string& path) {
    const json* cur = &j;
    std::size_t pos = 0;
    while (pos < path.size()) {
        if (path[pos] == '[') {
            const std::size_t end = path.find(']', pos);
            const std::size_t idx = std::stoul(path.substr(pos + 1, end - pos - 1));
            if (!cur->is_array() || idx >= cur->size()) return nullptr;
            cur = &(*cur)[idx];
            pos = end + 1;
            if (pos < path.size() && path[pos] == '.') ++pos;
            continue;
        }
        std::size_t end = path.find_first_of(".[", pos);
        if (end == std::string::npos) end = path.size();
        const std::string key = path.substr(pos, end - pos);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &(*cur)[key];
        pos = end;
        if (pos < path.size() && path[pos] == '.') ++pos;
    }
    return cur;
}

std::pair<double, double> tolerance_for(const json& tol, const std::string& field) {
    // the longest matching prefix wins; "*" matches everything with length 0
    long best = -1;
    const json* hit = nullptr;
    for (const auto& [k, v] : tol.items()) {
        const bool match = k == "*" || field == k || field.rfind(k + ".", 0) == 0 || field.rfind(k + "[", 0) == 0;
        const long len = k == "*" ? 0 : static_cast<long>(k.size());
        if (match && len > best) {
            best = len;
            hit = &v;
        }
    }
    if (!hit) return {0.0, 0.0};
    return {hit->value("abs", 0.0), hit->value("rel", 0.0)};
}

}  // namespace

GoldenVerdict compare_golden(const json& report, const std::filesystem::path& golden_path, const json& tolerances) {
    std::ifstream in(golden_path);
    if (!in) throw GoldenMissing("golden file not found: " + golden_path.string());
    json golden;
    try {
        golden = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("golden " + golden_path.string() + ": " + e.what());
    }
    json tol = golden.value("field_tolerances", json::object());
    for (const auto& [k, v] : tolerances.items()) tol[k] = v;
    json expected = golden;
    expected.erase("field_tolerances");
    expected.erase("versions");

    GoldenVerdict v;
    std::vector<std::pair<std::string, json>> fields;
    flatten(expected, "", fields);
    v.fields = fields.size();
    for (const auto& [path, want] : fields) {
        const json* got = lookup(report, path);
        if (!got) {
            v.failures.push_back(path + ": missing from report");
            continue;
        }
        if (want.is_number() && got->is_number()) {
            const double a = got->get<double>(), b = want.get<double>();
            const auto [abs_tol, rel_tol] = tolerance_for(tol, path);
            const double diff = std::abs(a - b);
            if (a == b) continue;
            if (diff <= abs_tol + rel_tol * std::abs(b)) {
                v.drifts.push_back(path + ": " + fmt(a) + " vs golden " + fmt(b));
            } else {
                v.failures.push_back(path + ": " + fmt(a) + " vs golden " + fmt(b) + " (diff " + fmt(diff) + ")");
            }
        } else if (*got != want) {
            v.failures.push_back(path + ": " + got->dump() + " vs golden " + want.dump());
        }
    }
    v.pass = v.failures.empty();
    return v;
}

}  // namespace lab

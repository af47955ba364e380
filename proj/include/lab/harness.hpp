#pragma once

#include "json.hpp"

#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace lab {

// Typed view of one JSON object.  Every read marks its key as used;
// finish() rejects keys nobody read.  Errors name the dotted key path.
class ConfigBlock {
public:
    ConfigBlock(const nlohmann::json& j, std::string path);

    bool has(const std::string& key) const;
    double number(const std::string& key) const;
    double number(const std::string& key, double fallback) const;
    int integer(const std::string& key) const;
    int integer(const std::string& key, int fallback) const;
    bool boolean(const std::string& key, bool fallback) const;
    std::string string(const std::string& key) const;
    std::string string(const std::string& key, const std::string& fallback) const;
    std::vector<double> numbers(const std::string& key) const;
    std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
    ConfigBlock block(const std::string& key) const;
    // Raw JSON, marked as used; the caller validates it.
    const nlohmann::json& raw(const std::string& key) const;
    const nlohmann::json& data() const { return j_; }
    std::string key_path(const std::string& key) const;
    void finish() const;

private:
    const nlohmann::json& get(const std::string& key) const;
    const nlohmann::json& j_;
    std::string path_;
    mutable std::set<std::string> used_;
};

struct ExperimentConfig {
    std::string experiment;
    long long seed = 0;
    std::string out_dir;
    nlohmann::json body;  // the config without "out"

    // Checks the common keys and that the experiment id is known; the
    // pipeline blocks are checked when the experiment runs.
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::filesystem::path& p);
    // FNV-1a 64 of the compact dump of body, as 16 hex digits.
    std::string hash() const;
};

std::string config_hash(const nlohmann::json& body);

// CSV payload with a fixed column order.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
    std::string csv() const;
};

// Named text artifact written next to the report (bitmaps and the like).
struct Artifact {
    std::string name;
    std::string content;
};

// One quantitative claim: value op limit.
struct Check {
    std::string name;
    double value = 0.0;
    std::string op;  // "<=", ">=" or "=="
    double limit = 0.0;
    bool pass = false;
};

struct ExperimentReport {
    std::string experiment;
    nlohmann::json config;
    std::string config_hash;
    nlohmann::json tolerances = nlohmann::json::object();
    nlohmann::json results = nlohmann::json::object();  // verdict strings and summary numbers
    std::vector<Check> checks;
    std::vector<Table> tables;
    std::vector<Artifact> artifacts;

    bool passed() const;
    void check(std::string name, double value, const std::string& op, double limit);
    void check_equal(std::string name, const std::string& value, const std::string& expected);
    // {experiment, config_hash, versions, config, tolerances, results, checks, pass, files}.
    nlohmann::json to_json() const;
    // report.json plus one file per table and artifact.
    void write(const std::filesystem::path& dir) const;
};

std::vector<std::string> experiment_ids();
// jobs = 0 uses the hardware concurrency.  Writes the report when the
// config names an output directory.
ExperimentReport run_experiment(const ExperimentConfig& config, unsigned jobs = 0);

// The golden file is a subset of a report JSON.  Its "field_tolerances" block, overridden by
// the argument, maps dotted field paths (or "*") to {abs, rel}.
struct GoldenVerdict {
    bool pass = true;
    std::vector<std::string> failures;
    std::vector<std::string> drifts;
    std::size_t fields = 0;
    std::string summary() const;
};

struct GoldenMissing : std::runtime_error {
    using std::runtime_error::runtime_error;
};

GoldenVerdict compare_golden(const nlohmann::json& report, const std::filesystem::path& golden_path,
                             const nlohmann::json& tolerances = nlohmann::json::object());

}  // namespace lab

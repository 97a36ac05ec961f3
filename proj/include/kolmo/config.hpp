// config.hpp - sectioned key=value run configuration
//
// Grammar (one item per line, surrounding blanks ignored):
//   [section]          starts a section; names are unique
//   key = value        belongs to the current section; keys are unique per section
//   # text  or ; text  comment line
// Lists are comma-separated values. Keys before the first section live at top level.
#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "kolmo/profile.hpp"

namespace kolmo {

class Config {
public:
    Config() = default;

    static Config from_string(const std::string& text, const std::string& origin = "<string>") {
        Config c;
        c.origin_ = origin;
        std::istringstream in(text);
        try {
            boost::property_tree::ini_parser::read_ini(in, c.tree_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw ValidationError("config " + origin + ":" + std::to_string(e.line()) + ": " + e.message());
        }
        return c;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ValidationError("config: cannot open " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        Config c = from_string(ss.str(), path);
        c.base_dir_ = std::filesystem::path(path).parent_path().string();
        return c;
    }

    const std::string& origin() const { return origin_; }

    bool has(const std::string& section, const std::string& key) const {
        return static_cast<bool>(tree_.get_optional<std::string>(path(section, key)));
    }

    bool has_section(const std::string& section) const { return tree_.get_child_optional(section).has_value(); }

    std::string text(const std::string& section, const std::string& key) const {
        auto v = tree_.get_optional<std::string>(path(section, key));
        if (!v) throw ValidationError("config: missing required field " + section + "." + key);
        return *v;
    }

    std::string text_or(const std::string& section, const std::string& key, const std::string& fallback) const {
        return has(section, key) ? text(section, key) : fallback;
    }

    double number(const std::string& section, const std::string& key) const {
        return parse_number(text(section, key), section + "." + key);
    }

    double number_or(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? number(section, key) : fallback;
    }

    long integer(const std::string& section, const std::string& key) const {
        return parse_integer(text(section, key), section + "." + key);
    }

    long integer_or(const std::string& section, const std::string& key, long fallback) const {
        return has(section, key) ? integer(section, key) : fallback;
    }

    bool flag_or(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        const std::string v = text(section, key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ValidationError("config: " + section + "." + key + " must be true or false, got '" + v + "'");
    }

    rvec numbers(const std::string& section, const std::string& key) const {
        rvec out;
        for (const auto& item : split(text(section, key))) out.push_back(parse_number(item, section + "." + key));
        if (out.empty()) throw ValidationError("config: " + section + "." + key + " is an empty list");
        return out;
    }

    rvec numbers_or(const std::string& section, const std::string& key, rvec fallback) const {
        return has(section, key) ? numbers(section, key) : fallback;
    }

    std::vector<long> integers(const std::string& section, const std::string& key) const {
        std::vector<long> out;
        for (const auto& item : split(text(section, key))) out.push_back(parse_integer(item, section + "." + key));
        if (out.empty()) throw ValidationError("config: " + section + "." + key + " is an empty list");
        return out;
    }

    std::vector<long> integers_or(const std::string& section, const std::string& key, std::vector<long> fallback) const {
        return has(section, key) ? integers(section, key) : fallback;
    }

    // Relative paths resolve against the directory of the config file.
    std::string resolve(const std::string& p) const {
        std::filesystem::path fp(p);
        if (fp.is_absolute() || base_dir_.empty()) return fp.string();
        return (std::filesystem::path(base_dir_) / fp).string();
    }

    // Every section and key, values as written.
    nlohmann::json echo() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, node] : tree_) {
            if (node.empty()) {
                j[name] = node.data();
                continue;
            }
            nlohmann::json s = nlohmann::json::object();
            for (const auto& [k, v] : node) s[k] = v.data();
            j[name] = s;
        }
        return j;
    }

private:
    static std::string path(const std::string& section, const std::string& key) {
        return section.empty() ? key : section + "." + key;
    }

    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
    }

    static std::vector<std::string> split(const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    static double parse_number(const std::string& s, const std::string& field) {
        const std::string t = trim(s);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (t.empty() || used != t.size() || !std::isfinite(v))
            throw ValidationError("config: " + field + " must be a finite number, got '" + s + "'");
        return v;
    }

    static long parse_integer(const std::string& s, const std::string& field) {
        const std::string t = trim(s);
        std::size_t used = 0;
        long v = 0;
        try {
            v = std::stol(t, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (t.empty() || used != t.size()) throw ValidationError("config: " + field + " must be an integer, got '" + s + "'");
        return v;
    }

    boost::property_tree::ptree tree_;
    std::string origin_;
    std::string base_dir_;
};

// [profile] kind = linear | scaled-linear | cubic-perturbed | sampled, with
// ell_minus, ell_plus (not for sampled), c (scaled-linear), a (cubic-perturbed),
// samples-file (sampled; two-column CSV y,q).
inline QProfile profile_from_config(const Config& c) {
    const std::string kind = c.text("profile", "kind");
    if (kind == "sampled") return QProfile::from_csv(c.resolve(c.text("profile", "samples-file")));
    const double lm = c.number("profile", "ell_minus");
    const double lp = c.number("profile", "ell_plus");
    if (!(lm > 0.0)) throw ValidationError("config: profile.ell_minus must be positive");
    if (!(lp > 0.0)) throw ValidationError("config: profile.ell_plus must be positive");
    if (kind == "linear") return QProfile::linear(lm, lp);
    if (kind == "scaled-linear") return QProfile::scaled_linear(c.number("profile", "c"), lm, lp);
    if (kind == "cubic-perturbed") return QProfile::cubic_perturbed(c.number("profile", "a"), lm, lp);
    throw ValidationError("config: profile.kind '" + kind +
                          "' is not one of linear, scaled-linear, cubic-perturbed, sampled");
}

}  // namespace kolmo

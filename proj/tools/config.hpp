#pragma once

#include "llg/io.hpp"

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace llgctl {

using llg::io::json;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One JSON object of the config. Every key must be read through a typed
// accessor before finish(); anything left over is an unknown key. Resolved
// values (defaults filled in) are mirrored into `resolved` for the manifest.
class Block {
public:
    Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + "must be an object");
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    double num(const std::string& k, double def, double lo = -1e300, double hi = 1e300) {
        double v = def;
        if (take(k)) {
            if (!j_[k].is_number()) throw ConfigError(where(k) + "must be a number");
            v = j_[k].get<double>();
        }
        if (!(v >= lo && v <= hi)) throw ConfigError(where(k) + "out of range [" + llg::io::fmt17(lo) + ", " + llg::io::fmt17(hi) + "]");
        resolved[k] = v;
        return v;
    }

    double req_num(const std::string& k, double lo = -1e300, double hi = 1e300) {
        if (!has(k)) throw ConfigError(where(k) + "is required");
        return num(k, 0.0, lo, hi);
    }

    long integer(const std::string& k, long def, long lo, long hi) {
        long v = def;
        if (take(k)) {
            if (!j_[k].is_number_integer()) throw ConfigError(where(k) + "must be an integer");
            v = j_[k].get<long>();
        }
        if (v < lo || v > hi) throw ConfigError(where(k) + "out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
        resolved[k] = v;
        return v;
    }

    bool boolean(const std::string& k, bool def) {
        bool v = def;
        if (take(k)) {
            if (!j_[k].is_boolean()) throw ConfigError(where(k) + "must be true or false");
            v = j_[k].get<bool>();
        }
        resolved[k] = v;
        return v;
    }

    std::string str(const std::string& k, const std::string& def, const std::vector<std::string>& allowed = {}) {
        std::string v = def;
        if (take(k)) {
            if (!j_[k].is_string()) throw ConfigError(where(k) + "must be a string");
            v = j_[k].get<std::string>();
        }
        if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : "|") + a;
            throw ConfigError(where(k) + "must be one of " + list);
        }
        resolved[k] = v;
        return v;
    }

    // a number or a nonempty array of numbers
    std::vector<double> nums(const std::string& k, const std::vector<double>& def, double lo = -1e300, double hi = 1e300) {
        std::vector<double> v = def;
        if (take(k)) {
            const json& x = j_[k];
            v.clear();
            if (x.is_number()) v.push_back(x.get<double>());
            else if (x.is_array() && !x.empty()) {
                for (const auto& e : x) {
                    if (!e.is_number()) throw ConfigError(where(k) + "must hold numbers only");
                    v.push_back(e.get<double>());
                }
            } else throw ConfigError(where(k) + "must be a number or a nonempty array of numbers");
        }
        for (double e : v)
            if (!(e >= lo && e <= hi)) throw ConfigError(where(k) + "entry out of range");
        resolved[k] = v;
        return v;
    }

    std::vector<double> vec3(const std::string& k, const std::vector<double>& def) {
        auto v = nums(k, def);
        if (v.size() != 3) throw ConfigError(where(k) + "must have three entries");
        return v;
    }

    // nested object; absent means empty
    Block sub(const std::string& k) {
        static const json empty = json::object();
        const json& x = take(k) ? j_[k] : empty;
        return Block(x, path_ + k + ".");
    }

    // store a finished sub-block's resolved values
    void adopt(const std::string& k, Block& b) {
        b.finish();
        resolved[k] = b.resolved;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key '" + path_ + it.key() + "'");
    }

    json resolved = json::object();

private:
    bool take(const std::string& k) {
        seen_.insert(k);
        return j_.contains(k);
    }
    std::string where(const std::string& k = "") const { return "'" + path_ + k + "' "; }

    json j_;
    std::string path_;
    std::set<std::string> seen_;
};

} // namespace llgctl

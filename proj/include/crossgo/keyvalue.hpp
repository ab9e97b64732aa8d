#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace crossgo {

/// `key = value` lines; `#` starts a comment; blank lines ignored.
class KeyValues {
public:
    static KeyValues parse(std::istream& in)
    {
        KeyValues kv;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::runtime_error("line " + std::to_string(lineno) + ": expected key = value");
            auto key = trim(line.substr(0, eq));
            if (key.empty()) throw std::runtime_error("line " + std::to_string(lineno) + ": empty key");
            kv.values_[key] = trim(line.substr(eq + 1));
        }
        return kv;
    }

    static KeyValues load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config " + path);
        return parse(in);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& values() const { return values_; }

    std::string get(const std::string& key, const std::string& fallback) const
    {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    template <typename T>
    T get(const std::string& key, T fallback) const
    {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::istringstream in(it->second);
        T v{};
        if constexpr (std::is_same_v<T, bool>) {
            std::string s;
            in >> s;
            if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
            if (s == "false" || s == "0" || s == "no" || s == "off") return false;
            throw std::runtime_error("config key " + key + ": expected a boolean");
        } else {
            if (!(in >> v) || !(in >> std::ws).eof())
                throw std::runtime_error("config key " + key + ": cannot parse '" + it->second + "'");
        }
        return v;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    void write(std::ostream& out) const
    {
        for (const auto& [k, v] : values_) out << k << " = " << v << '\n';
    }

private:
    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return "";
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace crossgo

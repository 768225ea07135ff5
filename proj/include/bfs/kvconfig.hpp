#pragma once

#include <cctype>
#include <map>
#include <string>
#include <vector>

#include "bfs/errors.hpp"
#include "bfs/io.hpp"

namespace bfs {

// Minimal TOML-style key/value files: `key = value` lines, # comments,
// numbers, quoted strings, booleans, and (nested) inline arrays. Enough for
// fiber profiles and run configs without dragging in a full TOML parser.
struct KvValue {
    enum class Kind { number, string, boolean, array };
    Kind kind = Kind::number;
    double num = 0.0;
    bool flag = false;
    std::string str;
    std::vector<KvValue> arr;
};

class KvConfig {
public:
    static KvConfig parse_string(const std::string& text, const std::string& origin = "<string>") {
        KvConfig cfg;
        std::size_t pos = 0;
        int line_no = 0;
        while (pos < text.size()) {
            std::size_t eol = text.find('\n', pos);
            if (eol == std::string::npos) eol = text.size();
            std::string line = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++line_no;

            const std::size_t hash = find_comment(line);
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;

            const std::size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw data_error(origin + ":" + std::to_string(line_no) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string val = trim(line.substr(eq + 1));
            if (key.empty() || val.empty())
                throw data_error(origin + ":" + std::to_string(line_no) + ": empty key or value");
            std::size_t vp = 0;
            cfg.values_[key] = parse_value(val, vp, origin, line_no);
        }
        return cfg;
    }

    static KvConfig parse_file(const std::string& path) {
        auto in = open_input(path, std::ios::in);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse_string(text, path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double number(const std::string& key) const {
        const KvValue& v = get(key);
        if (v.kind != KvValue::Kind::number) throw data_error("config key '" + key + "' is not a number");
        return v.num;
    }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }

    std::string string_or(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        const KvValue& v = get(key);
        if (v.kind != KvValue::Kind::string) throw data_error("config key '" + key + "' is not a string");
        return v.str;
    }

    const std::vector<KvValue>& array(const std::string& key) const {
        const KvValue& v = get(key);
        if (v.kind != KvValue::Kind::array) throw data_error("config key '" + key + "' is not an array");
        return v.arr;
    }

    // Rows of numbers from an array-of-arrays value.
    std::vector<std::vector<double>> number_rows(const std::string& key) const {
        std::vector<std::vector<double>> rows;
        for (const KvValue& row : array(key)) {
            if (row.kind != KvValue::Kind::array)
                throw data_error("config key '" + key + "' must be an array of arrays");
            std::vector<double> r;
            for (const KvValue& x : row.arr) {
                if (x.kind != KvValue::Kind::number)
                    throw data_error("config key '" + key + "' contains a non-numeric entry");
                r.push_back(x.num);
            }
            rows.push_back(std::move(r));
        }
        return rows;
    }

private:
    std::map<std::string, KvValue> values_;

    const KvValue& get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw data_error("missing config key '" + key + "'");
        return it->second;
    }

    static std::string trim(const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    }

    // A # starts a comment unless it sits inside a quoted string.
    static std::size_t find_comment(const std::string& line) {
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) return i;
        }
        return std::string::npos;
    }

    static KvValue parse_value(const std::string& s, std::size_t& p, const std::string& origin, int line_no) {
        auto fail = [&](const std::string& why) -> KvValue {
            throw data_error(origin + ":" + std::to_string(line_no) + ": " + why);
        };
        while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
        if (p >= s.size()) return fail("missing value");

        KvValue v;
        if (s[p] == '[') {
            ++p;
            v.kind = KvValue::Kind::array;
            while (true) {
                while (p < s.size() && (std::isspace(static_cast<unsigned char>(s[p])) || s[p] == ',')) ++p;
                if (p >= s.size()) return fail("unterminated array");
                if (s[p] == ']') { ++p; break; }
                v.arr.push_back(parse_value(s, p, origin, line_no));
            }
            return v;
        }
        if (s[p] == '"') {
            const std::size_t close = s.find('"', p + 1);
            if (close == std::string::npos) return fail("unterminated string");
            v.kind = KvValue::Kind::string;
            v.str = s.substr(p + 1, close - p - 1);
            p = close + 1;
            return v;
        }
        std::size_t end = p;
        while (end < s.size() && s[end] != ',' && s[end] != ']' &&
               !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
        const std::string tok = s.substr(p, end - p);
        p = end;
        if (tok == "true" || tok == "false") {
            v.kind = KvValue::Kind::boolean;
            v.flag = (tok == "true");
            return v;
        }
        char* parsed_end = nullptr;
        v.num = std::strtod(tok.c_str(), &parsed_end);
        if (parsed_end == tok.c_str() || *parsed_end != '\0')
            return fail("cannot parse value '" + tok + "'");
        v.kind = KvValue::Kind::number;
        return v;
    }
};

} // namespace bfs

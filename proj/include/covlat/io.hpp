#pragma once

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "covlat/hash.hpp"
#include "covlat/lattice.hpp"

namespace covlat {

// ---------------------------------------------------------------------------
// Config file support: a TOML subset sufficient for run configuration —
// [section] tables one level deep, keys with string / number / boolean /
// flat-array values, # comments.  Keys are stored as "section.key" and
// serialized in sorted order, which makes the serialized form canonical and
// hashable.
// ---------------------------------------------------------------------------

struct TomlValue {
    enum class Kind { String, Float, Integer, Boolean, Array } kind = Kind::String;
    std::string str;
    double num = 0.0;
    long long integer = 0;
    bool boolean = false;
    std::vector<TomlValue> array;

    static TomlValue of_string(std::string s) {
        TomlValue v;
        v.kind = Kind::String;
        v.str = std::move(s);
        return v;
    }
    static TomlValue of_float(double d) {
        TomlValue v;
        v.kind = Kind::Float;
        v.num = d;
        return v;
    }
    static TomlValue of_integer(long long i) {
        TomlValue v;
        v.kind = Kind::Integer;
        v.integer = i;
        return v;
    }
    static TomlValue of_bool(bool b) {
        TomlValue v;
        v.kind = Kind::Boolean;
        v.boolean = b;
        return v;
    }

    double as_number() const {
        if (kind == Kind::Float) return num;
        if (kind == Kind::Integer) return static_cast<double>(integer);
        throw ValidationError("config value is not a number");
    }
    long long as_integer() const {
        if (kind == Kind::Integer) return integer;
        throw ValidationError("config value is not an integer");
    }
    const std::string& as_string() const {
        if (kind != Kind::String) throw ValidationError("config value is not a string");
        return str;
    }
    bool as_bool() const {
        if (kind != Kind::Boolean) throw ValidationError("config value is not a boolean");
        return boolean;
    }
};

using TomlTable = std::map<std::string, TomlValue>;

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline TomlValue parse_toml_scalar(std::string_view text, int line_no) {
    text = trim(text);
    if (text.empty()) throw ValidationError("config line " + std::to_string(line_no) + ": empty value");
    if (text.front() == '"') {
        if (text.size() < 2 || text.back() != '"')
            throw ValidationError("config line " + std::to_string(line_no) + ": unterminated string");
        return TomlValue::of_string(std::string(text.substr(1, text.size() - 2)));
    }
    if (text == "true") return TomlValue::of_bool(true);
    if (text == "false") return TomlValue::of_bool(false);
    const std::string s(text);
    if (s.find_first_of(".eE") == std::string::npos || (s.size() > 2 && s[0] == '0' && s[1] == 'x')) {
        errno = 0;
        char* end = nullptr;
        const long long i = std::strtoll(s.c_str(), &end, 0);
        if (end == s.c_str() + s.size() && errno == 0) return TomlValue::of_integer(i);
    }
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size())
        throw ValidationError("config line " + std::to_string(line_no) + ": cannot parse value '" + s + "'");
    return TomlValue::of_float(d);
}

} // namespace detail

inline TomlTable parse_toml(std::string_view text) {
    TomlTable table;
    std::string section;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError("config line " + std::to_string(line_no) + ": malformed section");
            section = std::string(detail::trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
        const std::string key(detail::trim(line.substr(0, eq)));
        std::string_view val = detail::trim(line.substr(eq + 1));
        TomlValue v;
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']')
                throw ValidationError("config line " + std::to_string(line_no) + ": unterminated array");
            v.kind = TomlValue::Kind::Array;
            std::string_view inner = detail::trim(val.substr(1, val.size() - 2));
            while (!inner.empty()) {
                std::size_t comma = inner.find(',');
                const std::string_view item =
                    comma == std::string_view::npos ? inner : inner.substr(0, comma);
                v.array.push_back(detail::parse_toml_scalar(item, line_no));
                inner = comma == std::string_view::npos ? std::string_view{}
                                                        : detail::trim(inner.substr(comma + 1));
            }
        } else {
            v = detail::parse_toml_scalar(val, line_no);
        }
        table[section.empty() ? key : section + "." + key] = std::move(v);
    }
    return table;
}

inline TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

namespace detail {

inline std::string toml_scalar_to_string(const TomlValue& v) {
    char buf[40];
    switch (v.kind) {
        case TomlValue::Kind::String: return '"' + v.str + '"';
        case TomlValue::Kind::Float:
            std::snprintf(buf, sizeof buf, "%.17g", v.num);
            return buf;
        case TomlValue::Kind::Integer: return std::to_string(v.integer);
        case TomlValue::Kind::Boolean: return v.boolean ? "true" : "false";
        case TomlValue::Kind::Array: {
            std::string out = "[";
            for (std::size_t i = 0; i < v.array.size(); ++i) {
                if (i) out += ", ";
                out += toml_scalar_to_string(v.array[i]);
            }
            return out + "]";
        }
    }
    return {};
}

} // namespace detail

/// Canonical serialization: sections and keys in sorted order (std::map
/// iteration), stable value formatting.  Hash this text for the config hash.
inline std::string serialize_toml(const TomlTable& table) {
    std::string out;
    std::string section;
    for (const auto& [full_key, value] : table) {
        const std::size_t dot = full_key.rfind('.');
        const std::string sec = dot == std::string::npos ? "" : full_key.substr(0, dot);
        const std::string key = dot == std::string::npos ? full_key : full_key.substr(dot + 1);
        if (sec != section || (out.empty() && !sec.empty())) {
            section = sec;
            if (!out.empty()) out += '\n';
            out += '[' + section + "]\n";
        }
        out += key + " = " + detail::toml_scalar_to_string(value) + '\n';
    }
    return out;
}

inline std::uint64_t config_hash(const TomlTable& table) { return fnv1a64(serialize_toml(table)); }

inline std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// CSV output: '.' decimal, ',' separator, LF line endings, a leading
// "# config_hash=..." comment, then the header row.
// ---------------------------------------------------------------------------

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
              std::uint64_t cfg_hash)
        : out_(path) {
        if (!out_) throw Error("cannot open output file " + path.string());
        out_ << "# config_hash=" << hash_hex(cfg_hash) << '\n';
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& values) {
        char buf[40];
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out_ << ',';
            std::snprintf(buf, sizeof buf, "%.17g", values[i]);
            out_ << buf;
        }
        out_ << '\n';
    }

    void raw_row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

/// First-line config hash of a CSV output, or the config_hash field of a
/// JSON report (searched textually so io stays dependency-free).
inline std::optional<std::string> embedded_hash(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string line;
    std::getline(in, line);
    const std::string csv_tag = "# config_hash=";
    if (line.rfind(csv_tag, 0) == 0) return line.substr(csv_tag.size());
    std::ostringstream ss;
    ss << line;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const std::string json_tag = "\"config_hash\": \"";
    if (const auto p = text.find(json_tag); p != std::string::npos)
        return text.substr(p + json_tag.size(), 16);
    return std::nullopt;
}

} // namespace covlat

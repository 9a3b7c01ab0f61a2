#include "mecsim/kv.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mecsim {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void KvFile::set(const std::string& key, const std::string& value) {
    if (values_.find(key) == values_.end()) order_.push_back(key);
    values_[key] = value;
}

void KvFile::set_int(const std::string& key, long long v) {
    set(key, std::to_string(v));
}

void KvFile::set_double(const std::string& key, double v) {
    set(key, format_double(v));
}

void KvFile::set_doubles(const std::string& key, const std::vector<double>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_double(v[i]);
    }
    set(key, s);
}

void KvFile::set_ints(const std::string& key, const std::vector<int>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    set(key, s);
}

bool KvFile::has(const std::string& key) const {
    return values_.find(key) != values_.end();
}

const std::string& KvFile::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::runtime_error("missing key: " + key);
    return it->second;
}

long long KvFile::get_int(const std::string& key) const {
    return std::stoll(get(key));
}

double KvFile::get_double(const std::string& key) const {
    return std::stod(get(key));
}

static std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<double> KvFile::get_doubles(const std::string& key) const {
    std::vector<double> out;
    for (const auto& tok : split_csv(get(key))) out.push_back(std::stod(tok));
    return out;
}

std::vector<int> KvFile::get_ints(const std::string& key) const {
    std::vector<int> out;
    for (const auto& tok : split_csv(get(key))) out.push_back(std::stoi(tok));
    return out;
}

std::string KvFile::serialize() const {
    std::string out;
    for (const auto& key : order_) {
        out += key;
        out += '=';
        out += values_.at(key);
        out += '\n';
    }
    return out;
}

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("malformed line " + std::to_string(lineno) + ": " + line);
        kv.set(line.substr(0, eq), line.substr(eq + 1));
    }
    return kv;
}

KvFile KvFile::read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void KvFile::write_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << serialize();
}

}  // namespace mecsim

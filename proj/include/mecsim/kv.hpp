#pragma once

#include <map>
#include <string>
#include <vector>

namespace mecsim {

// Flat key=value text files. Used for scenario serialization, run dumps and
// the CLI config. Lines starting with '#' and blank lines are ignored on
// read; writes are ordered so files diff cleanly. Doubles go through %.17g
// so a write/read round trip is exact.
class KvFile {
public:
    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, long long v);
    void set_double(const std::string& key, double v);
    void set_doubles(const std::string& key, const std::vector<double>& v);
    void set_ints(const std::string& key, const std::vector<int>& v);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;  // throws if missing
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::vector<double> get_doubles(const std::string& key) const;
    std::vector<int> get_ints(const std::string& key) const;

    std::string serialize() const;
    static KvFile parse(const std::string& text);

    static KvFile read_file(const std::string& path);
    void write_file(const std::string& path) const;

    const std::vector<std::string>& keys() const { return order_; }

private:
    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

std::string format_double(double v);

}  // namespace mecsim

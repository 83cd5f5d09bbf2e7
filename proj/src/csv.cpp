#include "spincat/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spincat/core.hpp"

namespace spincat::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

} // namespace

std::string format(double v) {
    if (std::isnan(v)) {
        return "NaN";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

double parse_double(const std::string& s) {
    if (s == "NaN" || s == "nan") {
        return std::nan("");
    }
    if (s == "inf") {
        return INFINITY;
    }
    if (s == "-inf") {
        return -INFINITY;
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ConfigError("csv: cannot parse number '" + s + "'");
    }
    return v;
}

void Writer::comment(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        os_ << "# " << line << '\n';
    }
}

void Writer::header(const std::vector<std::string>& columns) { row(columns); }

void Writer::row(const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        os_ << (i ? "," : "") << format(values[i]);
    }
    os_ << '\n';
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        os_ << (i ? "," : "") << fields[i];
    }
    os_ << '\n';
}

std::size_t Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (columns[i] == name) {
            return i;
        }
    }
    throw ConfigError("csv: missing column '" + name + "'");
}

Table read(std::istream& is) {
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            t.comments.push_back(line.size() > 2 && line[1] == ' ' ? line.substr(2) : line.substr(1));
            continue;
        }
        if (!have_header) {
            t.columns = split(line);
            have_header = true;
            continue;
        }
        auto fields = split(line);
        if (fields.size() != t.columns.size()) {
            throw ConfigError("csv: row has " + std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(t.columns.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open '" + path + "'");
    }
    return read(in);
}

} // namespace spincat::csv

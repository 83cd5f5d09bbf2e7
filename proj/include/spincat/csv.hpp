// Minimal CSV emission/reading for the figure data files. Numbers are written
// in shortest round-trip form; NaN is spelled NaN. Lines starting with '#' are
// comments (provenance header).
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spincat::csv {

std::string format(double v);
double parse_double(const std::string& s);

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    /// Writes every line of `text` prefixed with "# ".
    void comment(const std::string& text);
    void header(const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& os_;
};

struct Table {
    std::vector<std::string> comments;  // without the leading "# "
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

Table read(std::istream& is);
Table read_file(const std::string& path);

} // namespace spincat::csv

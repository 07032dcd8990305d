#include "pgad/csv.hpp"

#include <array>
#include <charconv>
#include <string>

#include "pgad/error.hpp"

namespace pgad::csv {

std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{}) fail(ErrorKind::Io, "cannot format number");
    return std::string(buf.data(), end);
}

double parse_double(std::string_view text, std::string_view what) {
    double v = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        fail(ErrorKind::Io, "bad number '" + std::string(text) + "' in " + std::string(what));
    return v;
}

long long parse_int(std::string_view text, std::string_view what) {
    long long v = 0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        fail(ErrorKind::Io, "bad integer '" + std::string(text) + "' in " + std::string(what));
    return v;
}

std::vector<std::string_view> split(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

}  // namespace pgad::csv

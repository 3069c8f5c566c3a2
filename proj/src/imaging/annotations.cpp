#include "edgehr/imaging/annotations.hpp"

#include "edgehr/common/error.hpp"

#include <charconv>
#include <cstdio>
#include <string>

namespace edgehr::imaging {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

[[noreturn]] void fail(errc code, std::size_t line_no, const std::string& what) {
    throw Error(code, "annotation line " + std::to_string(line_no) + ": " + what);
}

double parse_number(std::string_view field, std::size_t line_no) {
    double value = 0.0;
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc{} || ptr != end) fail(errc::parse, line_no, "not a decimal number '" + std::string(field) + "'");
    return value;
}

} // namespace

std::vector<BoundingBox> parse_annotations(std::string_view text) {
    std::vector<BoundingBox> boxes;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto fields = split_fields(line);
        if (fields.size() != 5) fail(errc::parse, line_no, "expected 5 fields 'class cx cy w h'");

        int class_id = -1;
        const auto* end = fields[0].data() + fields[0].size();
        const auto [ptr, ec] = std::from_chars(fields[0].data(), end, class_id);
        if (ec != std::errc{} || ptr != end) fail(errc::parse, line_no, "class id is not an integer");
        if (class_id < 0 || class_id > 2) fail(errc::range, line_no, "class id must be 0, 1 or 2");

        BoundingBox box;
        box.region = static_cast<RegionClass>(class_id);
        box.cx = parse_number(fields[1], line_no);
        box.cy = parse_number(fields[2], line_no);
        box.w = parse_number(fields[3], line_no);
        box.h = parse_number(fields[4], line_no);
        for (double v : {box.cx, box.cy, box.w, box.h}) {
            if (!(v >= 0.0 && v <= 1.0)) fail(errc::range, line_no, "coordinate outside [0,1]");
        }
        if (box.w <= 0.0 || box.h <= 0.0) fail(errc::range, line_no, "box width and height must be positive");
        boxes.push_back(box);
    }
    return boxes;
}

std::string format_annotations(const std::vector<BoundingBox>& boxes) {
    std::string out;
    char buf[128];
    for (const auto& b : boxes) {
        std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", static_cast<int>(b.region), b.cx, b.cy, b.w, b.h);
        out += buf;
    }
    return out;
}

} // namespace edgehr::imaging

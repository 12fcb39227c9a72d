#include "s2vr/io.hpp"

#include "s2vr/errors.hpp"
#include "s2vr/geometry.hpp"
#include "s2vr/hash.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

namespace s2vr::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, delim)) out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw FormatError(where + ": cannot parse number '" + s + "'");
    return v;
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw FormatError("format_double: conversion failed");
    return std::string(buf, ptr);
}

std::string render_table(const Table& t) {
    if (static_cast<Eigen::Index>(t.columns.size()) != t.data.rows()) {
        throw ShapeError("table: " + std::to_string(t.columns.size()) + " column names for " +
                         std::to_string(t.data.rows()) + " values per record");
    }
    std::string out = "# s2vr " + t.kind + " v1\n";
    for (const auto& [k, v] : t.meta) out += "# " + k + " " + v + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
    out += "\n";
    for (Eigen::Index c = 0; c < t.data.cols(); ++c) {
        for (Eigen::Index r = 0; r < t.data.rows(); ++r) {
            if (r) out += ',';
            out += format_double(t.data(r, c));
        }
        out += '\n';
    }
    return out;
}

Table parse_table(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    Table t;
    if (!std::getline(in, line)) throw FormatError(source + ": empty file");
    {
        std::istringstream head(line);
        std::string hash, tag, kind, version;
        head >> hash >> tag >> kind >> version;
        if (hash != "#" || tag != "s2vr" || kind.empty() || version != "v1") {
            throw FormatError(source + ": missing '# s2vr <kind> v1' header");
        }
        t.kind = kind;
    }
    bool have_columns = false;
    std::vector<std::vector<double>> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = trim(line.substr(1));
            const auto sp = body.find(' ');
            if (sp == std::string::npos) t.meta[body] = "";
            else t.meta[body.substr(0, sp)] = trim(body.substr(sp + 1));
            continue;
        }
        if (!have_columns) {
            t.columns = split(line, ',');
            have_columns = true;
            continue;
        }
        const auto fields = split(line, ',');
        if (fields.size() != t.columns.size()) {
            throw FormatError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                              " values, got " + std::to_string(fields.size()));
        }
        std::vector<double> rec;
        rec.reserve(fields.size());
        for (const auto& f : fields) rec.push_back(parse_double(f, source + ":" + std::to_string(lineno)));
        records.push_back(std::move(rec));
    }
    if (!have_columns) throw FormatError(source + ": missing column-name line");
    t.data.resize(static_cast<Eigen::Index>(t.columns.size()), static_cast<Eigen::Index>(records.size()));
    for (std::size_t c = 0; c < records.size(); ++c)
        for (std::size_t r = 0; r < t.columns.size(); ++r)
            t.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = records[c][r];
    return t;
}

void write_table(const std::string& path, const Table& table) {
    write_file(path, render_table(table));
}

Table read_table(const std::string& path) {
    return parse_table(read_file(path), path);
}

std::vector<std::string> label_columns() {
    std::vector<std::string> cols;
    for (int i = 1; i <= geometry::kLandmarks; ++i) cols.push_back("h_" + std::to_string(i));
    for (int i = 1; i <= geometry::kLandmarks; ++i) cols.push_back("v_" + std::to_string(i));
    for (const auto& a : angle_columns()) cols.push_back(a);
    return cols;
}

std::vector<std::string> angle_columns() {
    return {"TA", "MA", "BA"};
}

Table annotation_table(const Eigen::MatrixXd& labels, const std::string& pipeline) {
    if (labels.rows() != geometry::kLabelSize) throw ShapeError("annotation table: labels must have 139 rows");
    Table t;
    t.kind = "annotations";
    t.meta["pipeline"] = pipeline;
    t.meta["layout"] = "h_1..h_68,v_1..v_68,TA,MA,BA (landmark 4k+c: vertebra k top-left,top-right,bottom-left,bottom-right)";
    t.columns = label_columns();
    t.data = labels;
    return t;
}

Eigen::MatrixXd read_annotations(const std::string& path) {
    Table t = read_table(path);
    if (t.kind != "annotations") throw FormatError(path + ": not an annotation file (kind '" + t.kind + "')");
    if (t.data.rows() != geometry::kLabelSize) throw FormatError(path + ": annotation records must have 139 values");
    return t.data;
}

Table feature_table(const Eigen::MatrixXd& features, const features::HogLayout& layout, const std::string& pipeline) {
    if (static_cast<std::size_t>(features.rows()) != layout.length()) {
        throw ShapeError("feature table: descriptor length does not match the layout");
    }
    Table t;
    t.kind = "features";
    t.meta["pipeline"] = pipeline;
    std::ostringstream lay;
    lay << "cells_x=" << layout.cells_x << " cells_y=" << layout.cells_y << " blocks_x=" << layout.blocks_x
        << " blocks_y=" << layout.blocks_y << " block=" << layout.block << " bins=" << layout.bins
        << " length=" << layout.length();
    t.meta["layout"] = lay.str();
    for (std::size_t i = 0; i < layout.length(); ++i) t.columns.push_back("f_" + std::to_string(i + 1));
    t.data = features;
    return t;
}

Eigen::MatrixXd read_features(const std::string& path) {
    Table t = read_table(path);
    if (t.kind != "features") throw FormatError(path + ": not a feature file (kind '" + t.kind + "')");
    return t.data;
}

void write_pgm(const std::string& path, const features::GrayImage& image, const std::string& comment) {
    std::string out = "P5\n";
    if (!comment.empty()) out += "# " + comment + "\n";
    out += std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
    out.reserve(out.size() + image.pixels.size() * 2);
    for (double p : image.pixels) {
        const auto v = static_cast<unsigned>(std::lround(std::clamp(p, 0.0, 1.0) * 65535.0));
        out.push_back(static_cast<char>((v >> 8) & 0xff));
        out.push_back(static_cast<char>(v & 0xff));
    }
    write_file(path, out);
}

features::GrayImage read_pgm(const std::string& path) {
    const std::string bytes = read_file(path);
    // Header: four whitespace-separated tokens, '#' comments running to end of line.
    std::size_t pos = 0;
    auto token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        const std::size_t start = pos;
        while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
        return bytes.substr(start, pos - start);
    };
    const std::string magic = token();
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw FormatError(path + ": malformed PGM header");
    }
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 65535) throw FormatError(path + ": not a 16-bit P5 PGM");
    const std::size_t offset = pos + 1;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 2;
    if (bytes.size() < offset + need) throw FormatError(path + ": truncated pixel data");
    features::GrayImage img(w, h);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const auto hi = static_cast<unsigned char>(bytes[offset + 2 * i]);
        const auto lo = static_cast<unsigned char>(bytes[offset + 2 * i + 1]);
        img.pixels[i] = static_cast<double>((hi << 8) | lo) / 65535.0;
    }
    return img;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::string file_digest(const std::string& path) {
    Fnv1a h;
    h.update(read_file(path));
    return h.hex();
}

}  // namespace s2vr::io

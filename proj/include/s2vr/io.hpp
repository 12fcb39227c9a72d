#pragma once

#include "s2vr/features.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace s2vr::io {

/// Shortest decimal string that parses back to exactly `value`.
std::string format_double(double value);

/// Delimited text table: `# key value` metadata lines, one column-name line, then one
/// comma-separated record per sample. The matrix stores one sample per column.
struct Table {
    std::string kind;                           ///< first line: "# s2vr <kind> v1"
    std::map<std::string, std::string> meta;    ///< remaining "# key value" lines
    std::vector<std::string> columns;
    Eigen::MatrixXd data;                       ///< columns.size() x records
};

std::string render_table(const Table& table);
Table parse_table(const std::string& text, const std::string& source = "<memory>");

void write_table(const std::string& path, const Table& table);
Table read_table(const std::string& path);

/// Column names h_1..h_68, v_1..v_68, TA, MA, BA.
std::vector<std::string> label_columns();
std::vector<std::string> angle_columns();

/// Annotation table (139 columns); `labels` is 139 x N.
Table annotation_table(const Eigen::MatrixXd& labels, const std::string& pipeline);
Eigen::MatrixXd read_annotations(const std::string& path);

/// Feature table; header records the HOG layout so consumers can check it.
Table feature_table(const Eigen::MatrixXd& features, const features::HogLayout& layout, const std::string& pipeline);
Eigen::MatrixXd read_features(const std::string& path);

/// 16-bit binary PGM (P5, maxval 65535). A non-empty comment goes on its own header line.
void write_pgm(const std::string& path, const features::GrayImage& image, const std::string& comment = "");
features::GrayImage read_pgm(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/// FNV-1a digest of a file's bytes as hex.
std::string file_digest(const std::string& path);

}  // namespace s2vr::io

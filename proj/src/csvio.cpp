#include "kangc/csvio.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <system_error>

#include "kangc/datagen.hpp"

namespace kangc {

std::string format_double(double value) {
    std::array<char, 48> buf;
    const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (result.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf.data(), result.ptr);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix) {
    auto out = open_out(path);
    for (Eigen::Index r = 0; r < matrix.rows(); ++r) {
        for (Eigen::Index c = 0; c < matrix.cols(); ++c) {
            if (c > 0) out << ',';
            out << format_double(matrix(r, c));
        }
        out << '\n';
    }
    finish(out, path);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    const auto panels = load_panel(path, LoadSpec{PanelFormat::kSingle, 0});
    return panels.front().values;
}

void write_truth_csv(const std::filesystem::path& path, const Eigen::MatrixXi& truth) {
    for (Eigen::Index r = 0; r < truth.rows(); ++r) {
        for (Eigen::Index c = 0; c < truth.cols(); ++c) {
            if (truth(r, c) != 0 && truth(r, c) != 1) {
                throw std::invalid_argument("write_truth_csv: entry (" + std::to_string(r + 1) +
                                            ", " + std::to_string(c + 1) + ") is not 0/1");
            }
        }
    }
    auto out = open_out(path);
    for (Eigen::Index r = 0; r < truth.rows(); ++r) {
        for (Eigen::Index c = 0; c < truth.cols(); ++c) {
            if (c > 0) out << ',';
            out << truth(r, c);
        }
        out << '\n';
    }
    finish(out, path);
}

Eigen::MatrixXi read_truth_csv(const std::filesystem::path& path) {
    const Eigen::MatrixXd raw = read_matrix_csv(path);
    Eigen::MatrixXi truth(raw.rows(), raw.cols());
    for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        for (Eigen::Index c = 0; c < raw.cols(); ++c) {
            const double v = raw(r, c);
            if (v != 0.0 && v != 1.0) {
                throw std::runtime_error("read_truth_csv: " + path.string() + ": entry (" +
                                         std::to_string(r + 1) + ", " + std::to_string(c + 1) +
                                         ") is not 0/1");
            }
            truth(r, c) = static_cast<int>(v);
        }
    }
    return truth;
}

void write_panel_csv(const std::filesystem::path& path, const TimeSeriesPanel& panel) {
    validate_panel(panel);
    auto out = open_out(path);
    const int p = static_cast<int>(panel.values.cols());
    for (int j = 0; j < p; ++j) {
        if (j > 0) out << ',';
        if (!panel.series_names.empty()) {
            out << panel.series_names[static_cast<std::size_t>(j)];
        } else {
            out << 'x' << (j + 1);
        }
    }
    out << '\n';
    for (Eigen::Index r = 0; r < panel.values.rows(); ++r) {
        for (Eigen::Index c = 0; c < panel.values.cols(); ++c) {
            if (c > 0) out << ',';
            out << format_double(panel.values(r, c));
        }
        out << '\n';
    }
    finish(out, path);
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("file_digest: cannot open " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    std::array<char, 65536> buf;
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            hash ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
            hash *= 0x100000001b3ULL;
        }
    }
    std::array<char, 17> hex{};
    static const char* digits = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) {
        hex[static_cast<std::size_t>(15 - i)] = digits[(hash >> (4 * i)) & 0xF];
    }
    return std::string(hex.data(), 16);
}

}  // namespace kangc

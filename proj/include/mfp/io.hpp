/// @file io.hpp
/// @brief Binary PGM (P5) images and full-precision CSV files.
///
/// CSV values are written with 17 significant digits so every file re-parses
/// to the exact in-memory double.

#pragma once

#include <cctype>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfp/tensor.hpp"

namespace mfp::io {

struct PgmImage {
    int width = 0;
    int height = 0;
    int maxval = 255;
    std::vector<double> pixels;  ///< row-major, scaled to [0, 1]

    double at(int row, int col) const {
        return pixels[static_cast<std::size_t>(row) * width + col];
    }
};

/// Reads an 8- or 16-bit binary PGM (P5). Throws std::runtime_error with the
/// path on unreadable, malformed or oversized (> 16M pixel) files.
inline PgmImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    const auto fail = [&](const std::string& why) {
        throw std::runtime_error("read_pgm: " + path + ": " + why);
    };
    if (!in) fail("cannot open");

    auto next_token = [&]() -> std::string {
        std::string tok;
        int c;
        while ((c = in.get()) != EOF) {
            if (c == '#') {
                while ((c = in.get()) != EOF && c != '\n') {}
            } else if (!std::isspace(c)) {
                tok.push_back(static_cast<char>(c));
                while ((c = in.peek()) != EOF && !std::isspace(c)) tok.push_back(static_cast<char>(in.get()));
                return tok;
            }
        }
        return tok;
    };

    if (next_token() != "P5") fail("not a binary PGM (P5)");
    PgmImage img;
    try {
        img.width = std::stoi(next_token());
        img.height = std::stoi(next_token());
        img.maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        fail("malformed header");
    }
    if (img.width <= 0 || img.height <= 0) fail("bad dimensions");
    if (static_cast<long long>(img.width) * img.height > 16ll * 1024 * 1024) fail("image too large");
    if (img.maxval <= 0 || img.maxval >= 65536) fail("unsupported maxval");
    in.get();  // single whitespace after maxval

    const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    const bool two_bytes = img.maxval > 255;
    std::vector<unsigned char> raw(n * (two_bytes ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) fail("truncated pixel data");

    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const unsigned v = two_bytes ? (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1]
                                     : raw[i];
        img.pixels[i] = static_cast<double>(v) / img.maxval;
    }
    return img;
}

/// Writes a 2D tensor as an 8-bit PGM, linearly mapping [0, max] to [0, 255].
inline void write_pgm(const std::string& path, const Tensor& field) {
    if (field.rank() != 2) throw std::invalid_argument("write_pgm: 2D fields only");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
    const int h = field.extent(0), w = field.extent(1);
    double hi = 0.0;
    for (std::size_t i = 0; i < field.size(); ++i) hi = std::max(hi, field[i]);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double v = hi > 0.0 ? field[i] / hi : 0.0;
        const int q = static_cast<int>(v <= 0.0 ? 0.0 : (v >= 1.0 ? 255.0 : v * 255.0 + 0.5));
        out.put(static_cast<char>(q));
    }
}

/// Nearest-neighbor resample of an image onto an (n1, n2) cell-center grid:
/// target cell (j1, j2) reads the pixel whose center is nearest to the cell
/// center, with image rows mapping to axis 1 and columns to axis 2.
inline Tensor resample_nearest(const PgmImage& img, int n1, int n2) {
    Tensor out({n1, n2});
    for (int j1 = 0; j1 < n1; ++j1) {
        int row = static_cast<int>((j1 + 0.5) * img.height / n1);
        row = std::min(row, img.height - 1);
        for (int j2 = 0; j2 < n2; ++j2) {
            int col = static_cast<int>((j2 + 0.5) * img.width / n2);
            col = std::min(col, img.width - 1);
            out.at({j1, j2}) = img.at(row, col);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvWriter {
    explicit CsvWriter(const std::string& path) : out(path) {
        if (!out) throw std::runtime_error("CsvWriter: cannot open " + path);
    }

    void header(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
        out << "\n";
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            out << (i ? "," : "") << format_full(values[i]);
        out << "\n";
    }

    std::ofstream out;
};

struct CsvFile {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline CsvFile read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_csv: cannot open " + path);
    CsvFile csv;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (first) {
            while (std::getline(ss, cell, ',')) csv.columns.push_back(cell);
            first = false;
        } else {
            std::vector<double> row;
            while (std::getline(ss, cell, ',')) {
                try {
                    row.push_back(std::stod(cell));
                } catch (const std::exception&) {
                    row.push_back(std::numeric_limits<double>::quiet_NaN());  // label cell
                }
            }
            csv.rows.push_back(std::move(row));
        }
    }
    return csv;
}

/// Reads a headerless numeric matrix CSV (as written for 2D slices).
inline std::vector<std::vector<double>> read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_matrix_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Writes a central-field time slice (1D: one value per line with its x
/// coordinate; 2D: x1 rows by x2 columns).
inline void write_density_slice(const std::string& path, const Tensor& slice) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_density_slice: cannot open " + path);
    if (slice.rank() == 1) {
        out << "x,rho\n";
        const int n = slice.extent(0);
        for (int j = 0; j < n; ++j)
            out << format_full((j + 0.5) / n) << "," << format_full(slice[static_cast<std::size_t>(j)])
                << "\n";
    } else if (slice.rank() == 2) {
        const int n1 = slice.extent(0), n2 = slice.extent(1);
        for (int a = 0; a < n1; ++a) {
            for (int b = 0; b < n2; ++b)
                out << (b ? "," : "") << format_full(slice.at({a, b}));
            out << "\n";
        }
    } else {
        throw std::invalid_argument("write_density_slice: 1D/2D slices only");
    }
}

}  // namespace mfp::io

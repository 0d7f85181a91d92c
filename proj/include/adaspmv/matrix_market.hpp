#pragma once

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adaspmv/sparse.hpp"
#include "adaspmv/types.hpp"

namespace adaspmv {

namespace detail {

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

inline bool blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

} // namespace detail

// Matrix Market coordinate reader. Accepts real, integer and pattern
// fields with general or symmetric symmetry. Symmetric inputs are
// expanded to full storage, pattern entries get value 1.0, duplicate
// coordinates are summed, and 1-based coordinates become 0-based here at
// the parse boundary.
inline DualMatrix load_matrix_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open file: " + path);

    std::string line;
    long lineno = 0;

    if (!std::getline(in, line)) throw ParseError("empty file", 1);
    ++lineno;
    {
        std::istringstream banner(detail::lower(line));
        std::string tag, object, format, field, symmetry;
        banner >> tag >> object >> format >> field >> symmetry;
        if (tag != "%%matrixmarket" || object != "matrix")
            throw ParseError("malformed Matrix Market banner", lineno);
        if (format != "coordinate")
            throw ParseError("only coordinate format is supported, got '" + format + "'", lineno);
        if (field != "real" && field != "integer" && field != "pattern")
            throw ParseError("unsupported field '" + field + "'", lineno);
        if (symmetry != "general" && symmetry != "symmetric")
            throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);

        const bool pattern = field == "pattern";
        const bool symmetric = symmetry == "symmetric";

        // size line: first non-comment, non-blank line
        index_t rows = 0, cols = 0;
        long long declared = -1;
        for (;;) {
            if (!std::getline(in, line)) throw ParseError("missing size line", lineno);
            ++lineno;
            if (!line.empty() && line[0] == '%') continue;
            if (detail::blank(line)) continue;
            std::istringstream ss(line);
            long long r = 0, c = 0, e = 0;
            if (!(ss >> r >> c >> e) || r < 0 || c < 0 || e < 0)
                throw ParseError("malformed size line", lineno);
            std::string rest;
            if (ss >> rest) throw ParseError("trailing tokens on size line", lineno);
            rows = r;
            cols = c;
            declared = e;
            break;
        }
        if (rows == 0 || cols == 0)
            throw ParseError("degenerate matrix dimensions (" + std::to_string(rows) + " x " +
                                 std::to_string(cols) + ")",
                             lineno);

        std::vector<Triplet> triplets;
        triplets.reserve(static_cast<size_t>(symmetric ? 2 * declared : declared));
        long long seen = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '%' || detail::blank(line)) continue;
            const char* p = line.c_str();
            char* end = nullptr;
            long long r = std::strtoll(p, &end, 10);
            if (end == p) throw ParseError("expected row coordinate", lineno);
            p = end;
            long long c = std::strtoll(p, &end, 10);
            if (end == p) throw ParseError("expected column coordinate", lineno);
            p = end;
            double v = 1.0;
            if (!pattern) {
                v = std::strtod(p, &end);
                if (end == p) throw ParseError("expected value", lineno);
                p = end;
            }
            while (*p != '\0' && std::isspace(static_cast<unsigned char>(*p))) ++p;
            if (*p != '\0') throw ParseError("trailing tokens on entry line", lineno);
            if (r < 1 || r > rows)
                throw ParseError("row coordinate " + std::to_string(r) + " out of range", lineno);
            if (c < 1 || c > cols)
                throw ParseError("column coordinate " + std::to_string(c) + " out of range",
                                 lineno);
            ++seen;
            if (seen > declared)
                throw ParseError("more entries than declared in size line", lineno);
            Triplet t{r - 1, c - 1, static_cast<real_t>(v)};
            triplets.push_back(t);
            if (symmetric && t.row != t.col) triplets.push_back({t.col, t.row, t.value});
        }
        if (seen != declared)
            throw ParseError("entry count " + std::to_string(seen) + " does not match declared " +
                                 std::to_string(declared),
                             lineno);
        return DualMatrix::from_triplets(rows, cols, triplets);
    }
}

// Canonical writer: general/real, row-major sorted entries, 1-based,
// round-trippable values. Reloading a written file reproduces the matrix
// bit for bit.
inline void write_matrix_market(const CsrMatrix& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw FormatError("cannot open file for writing: " + path);
    std::fprintf(f, "%%%%MatrixMarket matrix coordinate real general\n");
    std::fprintf(f, "%lld %lld %lld\n", static_cast<long long>(m.rows),
                 static_cast<long long>(m.cols), static_cast<long long>(m.nnz()));
    for (index_t r = 0; r < m.rows; ++r) {
        for (index_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
            std::fprintf(f, "%lld %lld %.17g\n", static_cast<long long>(r + 1),
                         static_cast<long long>(m.col_indices[k] + 1),
                         static_cast<double>(m.values[k]));
        }
    }
    std::fclose(f);
}

// =============================================================================
// Binary cache, version 1. Little-endian throughout:
//   magic "ASPMVBIN" | u32 version | u32 real width | u64 rows cols nnz
//   | row_offsets (rows+1 x i64) | col_indices (nnz x i64) | values (nnz x real)
// =============================================================================

inline constexpr char kBinaryMagic[8] = {'A', 'S', 'P', 'M', 'V', 'B', 'I', 'N'};
inline constexpr std::uint32_t kBinaryVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary cache assumes a little-endian host");

inline void save_binary(const CsrMatrix& m, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw FormatError("cannot open file for writing: " + path);
    auto write = [&](const void* p, size_t bytes) {
        if (std::fwrite(p, 1, bytes, f) != bytes) {
            std::fclose(f);
            throw FormatError("short write to " + path);
        }
    };
    write(kBinaryMagic, sizeof kBinaryMagic);
    std::uint32_t version = kBinaryVersion;
    std::uint32_t width = sizeof(real_t);
    write(&version, sizeof version);
    write(&width, sizeof width);
    std::uint64_t dims[3] = {static_cast<std::uint64_t>(m.rows),
                             static_cast<std::uint64_t>(m.cols),
                             static_cast<std::uint64_t>(m.nnz())};
    write(dims, sizeof dims);
    write(m.row_offsets.data(), m.row_offsets.size() * sizeof(index_t));
    write(m.col_indices.data(), m.col_indices.size() * sizeof(index_t));
    write(m.values.data(), m.values.size() * sizeof(real_t));
    std::fclose(f);
}

inline DualMatrix load_binary(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw FormatError("cannot open file: " + path);
    auto read = [&](void* p, size_t bytes) {
        if (std::fread(p, 1, bytes, f) != bytes) {
            std::fclose(f);
            throw FormatError("truncated binary matrix file: " + path);
        }
    };
    char magic[8];
    read(magic, sizeof magic);
    if (std::memcmp(magic, kBinaryMagic, sizeof magic) != 0) {
        std::fclose(f);
        throw FormatError("not a binary matrix file: " + path);
    }
    std::uint32_t version = 0, width = 0;
    read(&version, sizeof version);
    read(&width, sizeof width);
    if (version != kBinaryVersion) {
        std::fclose(f);
        throw FormatError("unsupported binary matrix version " + std::to_string(version));
    }
    if (width != sizeof(real_t)) {
        std::fclose(f);
        throw FormatError("binary matrix value width " + std::to_string(width) +
                          " does not match this build");
    }
    std::uint64_t dims[3];
    read(dims, sizeof dims);
    CsrMatrix m;
    m.rows = static_cast<index_t>(dims[0]);
    m.cols = static_cast<index_t>(dims[1]);
    m.row_offsets.resize(static_cast<size_t>(dims[0]) + 1);
    m.col_indices.resize(static_cast<size_t>(dims[2]));
    m.values.resize(static_cast<size_t>(dims[2]));
    read(m.row_offsets.data(), m.row_offsets.size() * sizeof(index_t));
    read(m.col_indices.data(), m.col_indices.size() * sizeof(index_t));
    read(m.values.data(), m.values.size() * sizeof(real_t));
    std::fclose(f);
    m.validate();
    return DualMatrix::from_csr(std::move(m));
}

// Loads either format, sniffing the binary magic first.
inline DualMatrix load_matrix(const std::string& path) {
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw FormatError("cannot open file: " + path);
        char magic[8] = {};
        probe.read(magic, sizeof magic);
        if (probe.gcount() == 8 && std::memcmp(magic, kBinaryMagic, 8) == 0)
            return load_binary(path);
    }
    return load_matrix_market(path);
}

} // namespace adaspmv

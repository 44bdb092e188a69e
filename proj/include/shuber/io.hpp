#pragma once

// On-disk formats: a data set is a directory holding meta.json and flat
// little-endian float64 arrays (X.bin sample-major, each sample row-major).

#include "shuber/datagen.hpp"
#include "shuber/solver.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace shuber::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace detail {

inline void write_doubles(const fs::path& path, const double* data, std::size_t count) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path.string());
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            std::uint64_t bits = std::bit_cast<std::uint64_t>(data[i]);
            char bytes[8];
            for (int k = 0; k < 8; ++k)
                bytes[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
            out.write(bytes, 8);
        }
    }
    if (!out)
        throw std::runtime_error("write failed: " + path.string());
}

inline std::vector<double> read_doubles(const fs::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open for reading: " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() != expected * sizeof(double))
        throw std::runtime_error(path.string() + ": expected " + std::to_string(expected) + " doubles, found " +
                                 std::to_string(raw.size()) + " bytes");
    std::vector<double> out(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[8 * i + static_cast<std::size_t>(k)]))
                    << (8 * k);
        out[i] = std::bit_cast<double>(bits);
    }
    return out;
}

} // namespace detail

/// Row-major binary dump of a matrix.
inline void write_matrix(const fs::path& path, const Matrix& m) {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    detail::write_doubles(path, rm.data(), static_cast<std::size_t>(rm.size()));
}

inline Matrix read_matrix(const fs::path& path, Index rows, Index cols) {
    const std::vector<double> v = detail::read_doubles(path, static_cast<std::size_t>(rows * cols));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j)
            m(i, j) = v[static_cast<std::size_t>(i * cols + j)];
    return m;
}

inline void write_vector(const fs::path& path, const Vector& v) {
    detail::write_doubles(path, v.data(), static_cast<std::size_t>(v.size()));
}

inline Vector read_vector(const fs::path& path, Index n) {
    const std::vector<double> raw = detail::read_doubles(path, static_cast<std::size_t>(n));
    return Eigen::Map<const Vector>(raw.data(), n);
}

/// Shortest decimal text that round-trips a double (17 significant digits).
inline std::string format_double(double x) {
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct DatasetMeta {
    GroundTruthSpec spec;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    /// Free-form metadata (preset id, rep, ...).
    json extra = json::object();
};

inline json spec_to_json(const GroundTruthSpec& s) {
    return {{"kind", to_string(s.kind)},          {"s", s.s},
            {"r", s.r},                           {"entry_value", s.entry_value},
            {"spikeness_a", s.spikeness_a},       {"gamma_value", s.gamma_value},
            {"outlier_value", s.outlier_value},   {"sigma", s.sigma}};
}

inline GroundTruthSpec spec_from_json(const json& j) {
    GroundTruthSpec s;
    s.kind = truth_kind_from_string(j.at("kind").get<std::string>());
    s.s = j.value("s", Index{0});
    s.r = j.value("r", Index{0});
    s.entry_value = j.value("entry_value", 0.0);
    s.spikeness_a = j.value("spikeness_a", 0.0);
    s.gamma_value = j.value("gamma_value", 0.0);
    s.outlier_value = j.value("outlier_value", 0.0);
    s.sigma = j.value("sigma", 1.0);
    return s;
}

/// Writes meta.json, X.bin, y.bin and (when present) truth_B_star.bin,
/// truth_Gamma_star.bin, truth_theta_star.bin, truth_noise.bin.
inline void write_dataset(const fs::path& dir, const Dataset& ds, const DatasetMeta& meta, bool csv = false) {
    ds.validate();
    fs::create_directories(dir);
    json j;
    j["format"] = "shuber-dataset";
    j["version"] = 1;
    j["n"] = ds.n();
    j["d1"] = ds.d1;
    j["d2"] = ds.d2;
    j["epsilon"] = meta.epsilon;
    j["outliers"] = outlier_count(meta.epsilon, ds.n());
    j["seed"] = meta.seed;
    j["sigma"] = meta.spec.sigma;
    j["spec"] = spec_to_json(meta.spec);
    j["has_truth"] = ds.truth.has_value();
    j["extra"] = meta.extra;
    std::ofstream(dir / "meta.json") << j.dump(2) << '\n';
    write_matrix(dir / "X.bin", ds.x);
    write_vector(dir / "y.bin", ds.y);
    if (ds.truth) {
        write_matrix(dir / "truth_B_star.bin", ds.truth->b_star);
        write_matrix(dir / "truth_Gamma_star.bin", ds.truth->gamma_star);
        write_vector(dir / "truth_theta_star.bin", ds.truth->theta_star);
        write_vector(dir / "truth_noise.bin", ds.truth->noise);
    }
    if (csv) {
        std::ofstream y(dir / "y.csv");
        y << "i,y\n";
        for (Index i = 0; i < ds.n(); ++i)
            y << i << ',' << format_double(ds.y[i]) << '\n';
        if (ds.truth) {
            std::ofstream t(dir / "truth.csv");
            t << "k,B_star,Gamma_star\n";
            const Vector b = flatten(ds.truth->b_star), g = flatten(ds.truth->gamma_star);
            for (Index k = 0; k < b.size(); ++k)
                t << k << ',' << format_double(b[k]) << ',' << format_double(g[k]) << '\n';
        }
    }
}

struct LoadedDataset {
    Dataset data;
    DatasetMeta meta;
};

inline LoadedDataset read_dataset(const fs::path& dir) {
    std::ifstream in(dir / "meta.json");
    if (!in)
        throw std::runtime_error("missing meta.json in " + dir.string());
    const json j = json::parse(in);
    LoadedDataset out;
    Dataset& ds = out.data;
    const Index n = j.at("n").get<Index>();
    ds.d1 = j.at("d1").get<Index>();
    ds.d2 = j.at("d2").get<Index>();
    ds.x = read_matrix(dir / "X.bin", n, ds.d1 * ds.d2);
    ds.y = read_vector(dir / "y.bin", n);
    out.meta.epsilon = j.value("epsilon", 0.0);
    out.meta.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("spec"))
        out.meta.spec = spec_from_json(j.at("spec"));
    if (j.contains("extra"))
        out.meta.extra = j.at("extra");
    if (j.value("has_truth", false)) {
        GroundTruth t;
        t.b_star = read_matrix(dir / "truth_B_star.bin", ds.d1, ds.d2);
        t.gamma_star = read_matrix(dir / "truth_Gamma_star.bin", ds.d1, ds.d2);
        t.theta_star = read_vector(dir / "truth_theta_star.bin", n);
        t.noise = read_vector(dir / "truth_noise.bin", n);
        t.sigma = out.meta.spec.sigma;
        t.seed = out.meta.seed;
        ds.truth = std::move(t);
    }
    ds.validate();
    return out;
}

inline void write_estimate(const fs::path& dir, const EstimateTriple& est) {
    fs::create_directories(dir);
    write_matrix(dir / "B_hat.bin", est.b_hat);
    write_matrix(dir / "Gamma_hat.bin", est.gamma_hat);
    write_vector(dir / "theta_hat.bin", est.theta_hat);
}

inline EstimateTriple read_estimate(const fs::path& dir, Index d1, Index d2, Index n) {
    return {read_matrix(dir / "B_hat.bin", d1, d2), read_matrix(dir / "Gamma_hat.bin", d1, d2),
            read_vector(dir / "theta_hat.bin", n)};
}

} // namespace shuber::io

#include "wphist/sample_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "wphist/errors.hpp"
#include "wphist/version.hpp"

static_assert(std::endian::native == std::endian::little,
              "sample files are little endian; big endian hosts need swaps");

namespace wphist {

namespace {

constexpr char kMagic[4] = {'W', 'P', 'H', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_row_major(std::ofstream& out, const Eigen::MatrixXd& m) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            row[static_cast<std::size_t>(j)] = m(i, j);
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
}

Eigen::MatrixXd read_row_major(std::ifstream& in, Eigen::Index rows,
                               Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    std::vector<double> row(static_cast<std::size_t>(cols));
    for (Eigen::Index i = 0; i < rows; ++i) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!in) throw PersistenceError("sample file truncated");
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = row[static_cast<std::size_t>(j)];
    }
    return m;
}

nlohmann::json meta_to_json(const SampleMeta& meta) {
    nlohmann::json j;
    j["seed"] = meta.seed;
    j["total_iterations"] = meta.total_iterations;
    j["burn_in"] = meta.burn_in;
    j["thinning"] = meta.thinning;
    j["v"] = meta.n_v;
    j["t"] = meta.n_t;
    j["v_retained"] = meta.n_retained;
    j["levels"] = meta.levels;
    j["filter"] = meta.filter_name;
    j["retain_fraction"] = meta.retain_fraction;
    j["bf_exponent"] = meta.bf_exponent;
    j["scan_order"] = meta.scan_order;
    j["design_fingerprint"] = meta.design_fingerprint;
    j["library_version"] = kVersion;
    return j;
}

SampleMeta meta_from_json(const nlohmann::json& j) {
    SampleMeta meta;
    meta.seed = j.at("seed").get<std::uint64_t>();
    meta.total_iterations = j.at("total_iterations").get<int>();
    meta.burn_in = j.at("burn_in").get<int>();
    meta.thinning = j.at("thinning").get<int>();
    meta.n_v = j.at("v").get<Eigen::Index>();
    meta.n_t = j.at("t").get<Eigen::Index>();
    meta.n_retained = j.at("v_retained").get<Eigen::Index>();
    meta.levels = j.at("levels").get<int>();
    meta.filter_name = j.at("filter").get<std::string>();
    meta.retain_fraction = j.at("retain_fraction").get<double>();
    meta.bf_exponent = j.at("bf_exponent").get<std::string>();
    meta.scan_order = j.at("scan_order").get<std::string>();
    meta.design_fingerprint = j.at("design_fingerprint").get<std::uint64_t>();
    return meta;
}

} // namespace

void write_samples(const std::filesystem::path& path,
                   const PosteriorSamples& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw PersistenceError("cannot open sample file for writing: " +
                               path.string());
    out.write(kMagic, 4);
    write_u32(out, static_cast<std::uint32_t>(samples.meta.n_v));
    write_u32(out, static_cast<std::uint32_t>(samples.meta.n_t));
    write_u32(out, static_cast<std::uint32_t>(samples.count()));
    for (const auto& draw : samples.draws) write_row_major(out, draw);
    write_row_major(out, samples.gamma_means);
    const std::string trailer = meta_to_json(samples.meta).dump();
    out.write(trailer.data(), static_cast<std::streamsize>(trailer.size()));
    write_u64(out, trailer.size());
    if (!out) throw PersistenceError("write failed: " + path.string());
}

PosteriorSamples read_samples(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PersistenceError("cannot open sample file: " + path.string());

    in.seekg(0, std::ios::end);
    const std::int64_t file_size = in.tellg();
    if (file_size < 4 + 12 + 8)
        throw PersistenceError("sample file too small: " + path.string());

    in.seekg(0);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw PersistenceError("bad magic in sample file: " + path.string());

    std::uint32_t v = 0, t = 0, m = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    in.read(reinterpret_cast<char*>(&t), 4);
    in.read(reinterpret_cast<char*>(&m), 4);
    if (!in) throw PersistenceError("sample file header truncated");

    in.seekg(file_size - 8);
    std::uint64_t trailer_len = 0;
    in.read(reinterpret_cast<char*>(&trailer_len), 8);
    if (!in || trailer_len > static_cast<std::uint64_t>(file_size))
        throw PersistenceError("broken trailer length in sample file");

    in.seekg(file_size - 8 - static_cast<std::int64_t>(trailer_len));
    std::string trailer(trailer_len, '\0');
    in.read(trailer.data(), static_cast<std::streamsize>(trailer_len));
    if (!in) throw PersistenceError("sample file trailer truncated");

    PosteriorSamples samples;
    try {
        samples.meta = meta_from_json(nlohmann::json::parse(trailer));
    } catch (const nlohmann::json::exception& e) {
        throw PersistenceError(std::string("bad metadata trailer: ") + e.what());
    }
    if (samples.meta.n_v != static_cast<Eigen::Index>(v) ||
        samples.meta.n_t != static_cast<Eigen::Index>(t))
        throw PersistenceError("header and trailer dimensions disagree");

    const std::int64_t expected =
        16 +
        static_cast<std::int64_t>(m) * v * t * 8 +
        static_cast<std::int64_t>(samples.meta.n_retained) * t * 8 +
        static_cast<std::int64_t>(trailer_len) + 8;
    if (expected != file_size)
        throw PersistenceError("sample file size does not match its header");

    in.seekg(16);
    samples.draws.reserve(m);
    for (std::uint32_t i = 0; i < m; ++i)
        samples.draws.push_back(read_row_major(in, v, t));
    samples.gamma_means = read_row_major(in, samples.meta.n_retained, t);
    return samples;
}

} // namespace wphist

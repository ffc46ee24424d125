#include "ganmrf/dict_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace ganmrf {

static_assert(std::endian::native == std::endian::little,
              "dictionary file I/O assumes a little-endian host");
static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

namespace {

constexpr char kMagic[4] = {'M', 'R', 'F', 'D'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kFlagNormalized = 1u << 0;

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw DataError("dictionary file truncated while reading " + what);
    return v;
}

} // namespace

void save_dictionary(const Dictionary& dict, const std::string& path) {
    dict.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write dictionary file: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<std::uint32_t>(dict.n_frames()));
    write_u32(out, static_cast<std::uint32_t>(dict.n_atoms()));
    write_u32(out, dict.normalized ? kFlagNormalized : 0u);
    std::vector<double> t1(dict.params.size()), t2(dict.params.size());
    for (std::size_t j = 0; j < dict.params.size(); ++j) {
        t1[j] = dict.params[j].t1_ms;
        t2[j] = dict.params[j].t2_ms;
    }
    out.write(reinterpret_cast<const char*>(t1.data()), std::streamsize(t1.size() * 8));
    out.write(reinterpret_cast<const char*>(t2.data()), std::streamsize(t2.size() * 8));
    // Eigen stores column-major, matching the file layout.
    out.write(reinterpret_cast<const char*>(dict.atoms.data()),
              std::streamsize(std::size_t(dict.atoms.size()) * 8));
    if (!out) throw DataError("short write to dictionary file: " + path);
}

Dictionary load_dictionary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dictionary file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a dictionary file (bad magic): " + path);
    const std::uint32_t version = read_u32(in, "version");
    if (version != kVersion)
        throw DataError("unsupported dictionary version " + std::to_string(version) + ": " + path);
    const std::uint32_t n_frames = read_u32(in, "frame count");
    const std::uint32_t n_atoms = read_u32(in, "atom count");
    const std::uint32_t flags = read_u32(in, "flags");
    if (n_frames == 0 || n_atoms == 0) throw DataError("empty dictionary file: " + path);

    Dictionary dict;
    dict.normalized = (flags & kFlagNormalized) != 0;
    std::vector<double> t1(n_atoms), t2(n_atoms);
    in.read(reinterpret_cast<char*>(t1.data()), std::streamsize(t1.size() * 8));
    in.read(reinterpret_cast<char*>(t2.data()), std::streamsize(t2.size() * 8));
    dict.atoms.resize(n_frames, n_atoms);
    in.read(reinterpret_cast<char*>(dict.atoms.data()),
            std::streamsize(std::size_t(dict.atoms.size()) * 8));
    if (!in) throw DataError("dictionary file truncated: " + path);
    dict.params.reserve(n_atoms);
    for (std::uint32_t j = 0; j < n_atoms; ++j) dict.params.push_back({t1[j], t2[j]});
    return dict;
}

void export_dictionary_csv(const Dictionary& dict, const std::string& path) {
    dict.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot write CSV file: " + path);
    out << "t1_ms,t2_ms";
    for (Eigen::Index f = 0; f < dict.n_frames(); ++f) out << ",frame_" << f;
    out << "\n";
    out.precision(17);
    for (Eigen::Index j = 0; j < dict.n_atoms(); ++j) {
        out << dict.params[std::size_t(j)].t1_ms << "," << dict.params[std::size_t(j)].t2_ms;
        for (Eigen::Index f = 0; f < dict.n_frames(); ++f) out << "," << dict.atoms(f, j);
        out << "\n";
    }
    if (!out) throw DataError("short write to CSV file: " + path);
}

} // namespace ganmrf

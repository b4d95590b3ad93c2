#include "ladderlab/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "ladderlab/error.hpp"

namespace ladderlab {

namespace fs = std::filesystem;

std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (x == 0.0) return "0";
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, result.ptr);
}

namespace {

void newline(std::ostringstream& os, int indent, int depth)
{
    if (indent < 0) return;
    os << '\n' << std::string(static_cast<std::size_t>(indent * depth), ' ');
}

void write_canonical(std::ostringstream& os, const nlohmann::json& j, int indent, int depth)
{
    switch (j.type()) {
    case nlohmann::json::value_t::object: {
        // nlohmann::json objects are std::map backed, hence already key-sorted
        if (j.empty()) {
            os << "{}";
            break;
        }
        os << '{';
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) os << ',';
            first = false;
            newline(os, indent, depth + 1);
            os << nlohmann::json(key).dump() << (indent < 0 ? ":" : ": ");
            write_canonical(os, value, indent, depth + 1);
        }
        newline(os, indent, depth);
        os << '}';
        break;
    }
    case nlohmann::json::value_t::array: {
        if (j.empty()) {
            os << "[]";
            break;
        }
        // arrays of scalars stay on one line
        const bool flat = std::none_of(j.begin(), j.end(), [](const auto& v) { return v.is_structured(); });
        os << '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << (flat && indent >= 0 ? ", " : ",");
            if (!flat) newline(os, indent, depth + 1);
            write_canonical(os, j[i], indent, depth + 1);
        }
        if (!flat) newline(os, indent, depth);
        os << ']';
        break;
    }
    case nlohmann::json::value_t::number_float: {
        const double x = j.get<double>();
        if (std::isfinite(x))
            os << format_double(x);
        else
            os << "null";
        break;
    }
    default: os << j.dump();
    }
}

} // namespace

std::string canonical_json(const nlohmann::json& j, int indent)
{
    std::ostringstream os;
    write_canonical(os, j, indent, 0);
    return os.str();
}

std::string sha256_hex(const std::string& bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::Cache, "SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

void write_file_atomic(const fs::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::Cache, "cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::Cache, "short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Cache, "cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string slice_to_csv(const SpectrumSlice& slice)
{
    std::string out = "m,lambda,multiplicity\n";
    for (const auto& e : slice.eigenvalues)
        out += format_double(slice.m) + ',' + format_double(e.lambda) + ',' + std::to_string(e.multiplicity) + '\n';
    return out;
}

std::vector<Eigenvalue> slice_from_csv(const std::string& text, double expected_m)
{
    std::vector<Eigenvalue> out;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "m,lambda,multiplicity") fail(ErrorKind::Cache, "bad spectrum CSV header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(','), c2 = line.rfind(',');
        if (c1 == std::string::npos || c1 == c2) fail(ErrorKind::Cache, "bad spectrum CSV row: " + line);
        double m = 0.0, lambda = 0.0;
        std::int64_t mult = 0;
        const char* b = line.data();
        auto r1 = std::from_chars(b, b + c1, m);
        auto r2 = std::from_chars(b + c1 + 1, b + c2, lambda);
        auto r3 = std::from_chars(b + c2 + 1, b + line.size(), mult);
        if (r1.ec != std::errc() || r2.ec != std::errc() || r3.ec != std::errc())
            fail(ErrorKind::Cache, "bad spectrum CSV row: " + line);
        if (m != expected_m) fail(ErrorKind::Cache, "spectrum CSV row for the wrong mass: " + line);
        out.push_back({lambda, mult});
    }
    return out;
}

// ---------------------------------------------------------------------------

SpectrumCache::SpectrumCache(fs::path root, const nlohmann::json& key)
{
    const std::string canon = canonical_json(key);
    hash_ = sha256_hex(canon);
    dir_ = std::move(root) / hash_;
    const fs::path manifest_path = dir_ / "manifest.json";
    if (fs::exists(manifest_path)) {
        try {
            manifest_ = nlohmann::json::parse(read_file(manifest_path));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Cache, "cache manifest " + manifest_path.string() + " is unreadable (" + e.what() +
                                       "); delete " + dir_.string() + " to rebuild");
        }
        if (!manifest_.contains("key") || canonical_json(manifest_["key"]) != canon)
            fail(ErrorKind::Cache, "cache manifest " + manifest_path.string() +
                                       " does not match its directory hash; delete " + dir_.string() + " to rebuild");
    } else {
        manifest_ = {{"schema", 1}, {"key", key}, {"slices", nlohmann::json::object()}};
    }
}

std::string SpectrumCache::file_name(double m) const { return "m_" + format_double(m) + ".csv"; }

std::optional<SpectrumSlice> SpectrumCache::load(double m, double abs_lo, double abs_hi) const
{
    const std::string name = file_name(m);
    const auto& slices = manifest_["slices"];
    if (!slices.contains(name)) {
        ++misses_;
        return std::nullopt;
    }
    const auto& entry = slices[name];
    const fs::path path = dir_ / name;
    if (!fs::exists(path))
        fail(ErrorKind::Cache, "cache file " + path.string() + " listed in the manifest is missing; delete " +
                                   dir_.string() + " to rebuild");
    const std::string bytes = read_file(path);
    if (sha256_hex(bytes) != entry.at("sha256").get<std::string>())
        fail(ErrorKind::Cache, "cache file " + path.string() + " does not match its recorded SHA-256; delete " +
                                   dir_.string() + " to rebuild");
    SpectrumSlice slice;
    slice.m = m;
    slice.eigenvalues = slice_from_csv(bytes, m);
    slice.complete_abs_lo = entry.at("complete_abs_lo").get<double>();
    const auto& hi = entry.at("complete_abs_hi");
    slice.complete_abs_hi = hi.is_string() ? std::numeric_limits<double>::infinity() : hi.get<double>();
    slice.has_zero_mode = entry.at("has_zero_mode").get<bool>();
    slice.max_imag = entry.at("max_imag").get<double>();
    if (slice.covers(abs_lo, abs_hi))
        ++hits_;
    else
        ++misses_;
    return slice;
}

void SpectrumCache::store(const SpectrumSlice& slice)
{
    const std::string name = file_name(slice.m);
    const std::string bytes = slice_to_csv(slice);
    write_file_atomic(dir_ / name, bytes);
    nlohmann::json entry = {
        {"m", slice.m},
        {"sha256", sha256_hex(bytes)},
        {"complete_abs_lo", slice.complete_abs_lo},
        {"has_zero_mode", slice.has_zero_mode},
        {"max_imag", slice.max_imag},
        {"entries", slice.eigenvalues.size()},
    };
    if (std::isfinite(slice.complete_abs_hi))
        entry["complete_abs_hi"] = slice.complete_abs_hi;
    else
        entry["complete_abs_hi"] = "inf";
    manifest_["slices"][name] = entry;
    write_manifest();
}

void SpectrumCache::write_manifest() const
{
    write_file_atomic(dir_ / "manifest.json", canonical_json(manifest_, 2) + "\n");
}

fs::path resolve_cache_dir(const fs::path& fallback)
{
    if (const char* env = std::getenv("LADDERLAB_CACHE"); env && *env) return fs::path(env);
    return fallback;
}

} // namespace ladderlab

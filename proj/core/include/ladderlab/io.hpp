#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ladderlab/spectra.hpp"

namespace ladderlab {

/// Decimal form with 17 significant digits, independent of locale.
std::string format_double(double x);

/// Sorted keys, floats printed with format_double (non-finite ones as null).
/// Integral JSON numbers stay integers. indent < 0 gives the compact form.
std::string canonical_json(const nlohmann::json& j, int indent = -1);

std::string sha256_hex(const std::string& bytes);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// m,lambda,multiplicity rows, one per stored eigenvalue.
std::string slice_to_csv(const SpectrumSlice& slice);
std::vector<Eigenvalue> slice_from_csv(const std::string& text, double expected_m);

/// One directory per configuration hash holding m_<m>.csv files and a JSON
/// manifest with completeness guarantees and per-file digests.
class SpectrumCache {
public:
    SpectrumCache(std::filesystem::path root, const nlohmann::json& key);

    const std::string& hash() const { return hash_; }
    const std::filesystem::path& directory() const { return dir_; }

    /// Cached slice at m (count_upper left empty), or nothing. Cache error
    /// when a file disagrees with its recorded digest.
    // a stored slice that does not cover [abs_lo, abs_hi] is returned but counted as a miss
    std::optional<SpectrumSlice> load(double m, double abs_lo, double abs_hi) const;
    void store(const SpectrumSlice& slice);

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    std::filesystem::path dir_;
    std::string hash_;
    nlohmann::json manifest_;
    mutable std::size_t hits_ = 0;
    mutable std::size_t misses_ = 0;

    std::string file_name(double m) const;
    void write_manifest() const;
};

/// LADDERLAB_CACHE when set, otherwise `fallback`.
std::filesystem::path resolve_cache_dir(const std::filesystem::path& fallback);

} // namespace ladderlab

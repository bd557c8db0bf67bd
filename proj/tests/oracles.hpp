#pragma once

// Independent reference implementations used only by tests.

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace oracle {

using Rational = boost::multiprecision::cpp_rational;

// Counts helpful/adversarial pairs one by one.
inline Rational hdr(const std::vector<double>& helpful, double adversarial) {
    std::size_t beaten = 0;
    for (double h : helpful)
        if (adversarial > h) ++beaten;
    return Rational(beaten, helpful.size());
}

// Mean HDR over adversarial documents, from the full pair matrix.
inline Rational mhdr(const std::vector<double>& helpful, const std::vector<double>& adversarial) {
    std::size_t beaten = 0;
    for (double a : adversarial)
        for (double h : helpful)
            if (a > h) ++beaten;
    return Rational(beaten, helpful.size() * adversarial.size());
}

// Number of windows by walking start positions instead of the closed form.
inline std::size_t chunk_count(std::size_t n, std::size_t size = 512, std::size_t stride = 256) {
    if (n == 0) return 0;
    std::size_t count = 0;
    for (std::size_t start = 0;; start += stride) {
        ++count;
        if (start + size >= n) break;
    }
    return count;
}

// Closed form: ceil(max(0, n - size) / stride) + 1.
inline std::size_t chunk_count_formula(std::size_t n, std::size_t size = 512, std::size_t stride = 256) {
    const std::size_t over = n > size ? n - size : 0;
    return (over + stride - 1) / stride + 1;
}

struct Entry {
    std::string id;
    double score;
};

// Ranked order by pairwise comparison counting (selection by wins).
inline std::vector<std::string> ranked_ids(std::vector<Entry> entries) {
    std::vector<std::string> out;
    while (!entries.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < entries.size(); ++i) {
            const auto& a = entries[i];
            const auto& b = entries[best];
            if (a.score > b.score || (a.score == b.score && a.id < b.id)) best = i;
        }
        out.push_back(entries[best].id);
        entries.erase(entries.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return out;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("fsap_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace oracle

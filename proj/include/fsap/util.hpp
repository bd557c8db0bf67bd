#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace fsap {

using json = nlohmann::json;

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Stable 64-bit seed derived from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

/// Seeded generator whose draws are identical on every standard library.
/// std::mt19937_64 output is fully specified; the distributions are not, so
/// bounded draws are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

/// Draws `count` distinct indices from [0, n) in draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, Rng& rng);

/// Produces ISO-8601 UTC timestamps. A fixed source always returns the same value.
class TimestampSource {
public:
    static TimestampSource wall_clock();
    static TimestampSource fixed(std::string value);

    std::string now() const;

private:
    std::string fixed_;
    bool is_fixed_ = false;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Parses a JSONL file; blank lines are skipped. `fn(record, line_number)`.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& fn);

std::string to_jsonl(const std::vector<json>& records);

std::size_t count_lines(const std::filesystem::path& path);

/// Runs fn(i) for i in [0, count) on at most `max_workers` threads.
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, std::size_t max_workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fsap

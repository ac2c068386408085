#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace pcl {

using json = nlohmann::json;

/// Base class for every error the library raises deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

/// Pairwise summation with a fixed split at n/2, so equal halves sum identically.
double pairwise_sum(std::span<const double> values);

/// splitmix64 finalizer; used to derive independent per-request seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// Seeded Fisher-Yates permutation of [0, n). Portable: only uses mt19937_64 output.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames over the target. The temp file is removed on failure.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(std::span<const json> rows);

/// Runs fn(i) for i in [0, n) on up to max_in_flight threads. Results land in input slots,
/// so completion order never affects output order. The first exception is rethrown.
void bounded_for(std::size_t n, std::size_t max_in_flight, const std::function<void(std::size_t)>& fn);

}  // namespace pcl

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cogtune {

/// Base class for every error the library raises on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

std::string_view trim_view(std::string_view s);
std::string trim(std::string_view s);

/// Collapses every run of whitespace to a single space and trims both ends.
std::string collapse_whitespace(std::string_view s);

std::string to_lower(std::string_view s);

/// Replaces U+2018/U+2019 with an ASCII apostrophe.
std::string straighten_quotes(std::string_view s);

bool is_word_char(char c);

/// True when `word` occurs in `text` bounded by non-word characters.
bool contains_whole_word(std::string_view text, std::string_view word);

std::vector<std::string_view> split_view(std::string_view s,
                                         std::string_view delim);

// ---------------------------------------------------------------------------
// Digests and deterministic randomness
// ---------------------------------------------------------------------------

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// FNV-1a, used to derive per-item seeds from ids.
std::uint64_t stable_hash(std::string_view s);

/// mt19937_64 with platform-independent index draws. std::uniform_int_distribution
/// and std::shuffle are implementation-defined, which would make dataset
/// manifests differ between standard libraries.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

}  // namespace cogtune

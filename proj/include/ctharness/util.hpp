#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctharness {

// Seeded generator whose draws are identical on every platform. std::mt19937_64
// output is fixed by the standard; the std distributions and std::shuffle are
// not, so index draws and shuffles are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Uniform real in [0, 1) from the top 53 bits.
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// splitmix64 finalizer; used to derive independent per-stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// Writes atomically enough for our purposes: parent directories are created.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);

std::vector<std::string> split_lines(std::string_view text);

// Whitespace-separated tokens (space, tab, CR, LF, VT, FF).
std::vector<std::string_view> whitespace_tokens(std::string_view text);

std::string to_lower_ascii(std::string_view s);

// Fixed-precision decimal rendering, locale independent.
std::string format_fixed(double value, int decimals);

}  // namespace ctharness

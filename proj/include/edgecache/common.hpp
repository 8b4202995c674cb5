#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgecache {

// Raised when a serialized artifact (trace, config, results) does not match
// its schema. `key()` names the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Tunnel crossing or another structurally infeasible input.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(std::size_t slot, const std::string& what)
      : std::runtime_error(what), slot_(slot) {}
  std::size_t slot() const noexcept { return slot_; }

 private:
  std::size_t slot_;
};

// File-system failure; the message carries the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major N x U table indexed as (slot, user).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T init = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, init) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<T>& data() const noexcept { return data_; }
  std::vector<T>& data() noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// N x U x U tensor indexed as (slot, owner, requester).
template <typename T>
class Cube {
 public:
  Cube() = default;
  Cube(std::size_t slots, std::size_t users, T init = T{})
      : slots_(slots), users_(users), data_(slots * users * users, init) {}

  std::size_t slots() const noexcept { return slots_; }
  std::size_t users() const noexcept { return users_; }

  T& operator()(std::size_t n, std::size_t u, std::size_t v) {
    return data_[(n * users_ + u) * users_ + v];
  }
  const T& operator()(std::size_t n, std::size_t u, std::size_t v) const {
    return data_[(n * users_ + u) * users_ + v];
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

 private:
  std::size_t slots_ = 0;
  std::size_t users_ = 0;
  std::vector<T> data_;
};

// Portable deterministic RNG helpers; std distributions differ across
// standard libraries, which would break byte-identical experiment output.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(splitmix64(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ULL;
  }

  std::uint64_t next_u64() {
    // xorshift64* on a splitmix-initialized state
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

}  // namespace edgecache

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <random>
#include <string>

#include "bdtrack/tensor.hpp"

namespace bdtrack {

enum class Init { Zeros, Ones, TruncNormal };

/// Named trainable parameters, iterated in sorted-name order.
///
/// Checkpoint layout (all integers little-endian):
///   magic "BDTK" | version u32 | count u32
///   per parameter: name_len u32 | name bytes (UTF-8) | rank u32 |
///                  extents u64[rank] | values f32[numel]
/// See docs/checkpoint_format.md.
class ParamStore {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  /// Registers a parameter; throws std::invalid_argument on duplicate names.
  Tensor& add(const std::string& name, Shape shape, Init init, double stddev = 0.02);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }

  void zero_grad();
  std::uint64_t seed() const { return seed_; }

  /// Deep copy with fresh storage.
  ParamStore clone() const;
  /// Copies values from `other`; names and shapes must match exactly.
  void assign_from(const ParamStore& other);
  /// Rounds every value through f32, i.e. what a save/load cycle does.
  void round_to_f32();

  void write(std::ostream& os) const;
  static ParamStore read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::map<std::string, Tensor> params_;
};

/// Truncated normal sample in [-2*stddev, 2*stddev].
double trunc_normal(std::mt19937_64& rng, double stddev);

}  // namespace bdtrack

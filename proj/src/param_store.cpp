#include "bdtrack/param_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace bdtrack {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

double trunc_normal(std::mt19937_64& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, 1.0);
  for (;;) {
    double z = dist(rng);
    if (std::abs(z) <= 2.0) return z * stddev;
  }
}

Tensor& ParamStore::add(const std::string& name, Shape shape, Init init, double stddev) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Tensor t = Tensor::zeros(std::move(shape), true);
  auto v = t.mutable_data();
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      std::fill(v.begin(), v.end(), 1.0);
      break;
    case Init::TruncNormal:
      for (auto& x : v) x = trunc_normal(rng_, stddev);
      break;
  }
  return params_.emplace(name, std::move(t)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore out(seed_);
  out.rng_ = rng_;
  for (const auto& [name, t] : params_) out.params_.emplace(name, t.clone(true));
  return out;
}

void ParamStore::assign_from(const ParamStore& other) {
  if (other.params_.size() != params_.size()) {
    throw DimensionError("parameter count mismatch: " + std::to_string(other.params_.size()) + " vs " +
                         std::to_string(params_.size()));
  }
  for (auto& [name, t] : params_) {
    const Tensor& src = other.get(name);
    if (src.shape() != t.shape()) {
      throw DimensionError("parameter " + name + " shape " + shape_str(src.shape()) + " vs " + shape_str(t.shape()));
    }
    auto dst = t.mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

void ParamStore::round_to_f32() {
  for (auto& [_, t] : params_) {
    for (auto& v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

namespace {

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::istream& is) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return value;
}

}  // namespace

void ParamStore::write(std::ostream& os) const {
  os.write("BDTK", 4);
  put<std::uint32_t>(os, kFormatVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params_.size()));
  for (const auto& [name, t] : params_) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto e : t.shape()) put<std::uint64_t>(os, e);
    for (double v : t.data()) put<float>(os, static_cast<float>(v));
  }
  if (!os) throw std::runtime_error("checkpoint write failed");
}

ParamStore ParamStore::read(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "BDTK", 4) != 0) throw std::runtime_error("not a BDTK checkpoint");
  const auto version = take<std::uint32_t>(is);
  if (version != kFormatVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = take<std::uint32_t>(is);
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = take<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const auto rank = take<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(take<std::uint64_t>(is));
    Tensor t = Tensor::zeros(shape, true);
    for (auto& v : t.mutable_data()) v = static_cast<double>(take<float>(is));
    if (!store.params_.emplace(name, std::move(t)).second) throw std::runtime_error("duplicate parameter " + name);
  }
  return store;
}

void ParamStore::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write(os);
}

ParamStore ParamStore::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read(is);
}

}  // namespace bdtrack

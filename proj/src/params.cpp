#include "flowplan/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

namespace flowplan {

Tensor& ParamStore::add(const std::string& name, int rows, int cols) {
  if (has(name)) throw std::invalid_argument("parameter already exists: " + name);
  names_.push_back(name);
  auto [it, _] = tensors_.emplace(name, Tensor(rows, cols, true));
  m_[name].assign(static_cast<std::size_t>(rows) * cols, 0.0);
  v_[name].assign(static_cast<std::size_t>(rows) * cols, 0.0);
  return it->second;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw std::out_of_range("no such parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (const auto& n : names_) tensors_.at(n).zero_grad();
}

std::size_t ParamStore::n_scalars() const {
  std::size_t total = 0;
  for (const auto& n : names_) total += tensors_.at(n).size();
  return total;
}

bool ParamStore::adam_step(const AdamConfig& cfg) {
  for (const auto& n : names_) {
    const Tensor& t = tensors_.at(n);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t.grad()[i])) return false;
    }
  }
  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (const auto& n : names_) {
    Tensor& t = tensors_.at(n);
    auto& m = m_.at(n);
    auto& v = v_.at(n);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = t.grad()[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      t.data()[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  return true;
}

void ParamStore::init_uniform_fan_in(const std::string& name, Rng& rng) {
  Tensor& t = at(name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(t.rows() > 0 ? t.rows() : 1));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t.data()[i] = (2.0 * uniform_real(rng) - 1.0) * bound;
  }
}

namespace {

template <class T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint truncated");
  return v;
}

constexpr char kMagic[4] = {'F', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, const std::string& header) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint64_t>(ps.step()));
  write_pod(os, static_cast<std::uint64_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  write_pod(os, static_cast<std::uint32_t>(ps.names().size()));
  for (const auto& name : ps.names()) {
    const Tensor& t = ps.at(name);
    write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<std::uint32_t>(t.rows()));
    write_pod(os, static_cast<std::uint32_t>(t.cols()));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(double) * t.size()));
    const auto& m = ps.moment1(name);
    const auto& v = ps.moment2(name);
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(sizeof(double) * v.size()));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::string load_checkpoint(const std::string& path, ParamStore& ps) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto step = read_pod<std::uint64_t>(is);
  const auto header_len = read_pod<std::uint64_t>(is);
  std::string header(header_len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!is) throw std::runtime_error("checkpoint truncated");
  const auto count = read_pod<std::uint32_t>(is);
  ps = ParamStore();
  ps.set_step(static_cast<std::int64_t>(step));
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), static_cast<std::streamsize>(name_len));
    const auto rows = read_pod<std::uint32_t>(is);
    const auto cols = read_pod<std::uint32_t>(is);
    Tensor& t = ps.add(name, static_cast<int>(rows), static_cast<int>(cols));
    is.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    is.read(reinterpret_cast<char*>(ps.moment1(name).data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    is.read(reinterpret_cast<char*>(ps.moment2(name).data()),
            static_cast<std::streamsize>(sizeof(double) * t.size()));
    if (!is) throw std::runtime_error("checkpoint truncated in parameter " + name);
  }
  return header;
}

}  // namespace flowplan

#include "flows/param.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "flows/errors.hpp"

namespace flows {

namespace {
constexpr char kMagic[] = "FLOWSCKPT1";
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) { write_u64(os, std::bit_cast<std::uint64_t>(d)); }

bool read_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

bool read_u64(std::istream& is, std::uint64_t& v) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return true;
}
}  // namespace

void ParamArray::validate() const {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ConfigError("param '" + name + "': zero dimension");
    n *= d;
  }
  if (n != values.size())
    throw ConfigError("param '" + name + "': shape/size mismatch (" + std::to_string(n) + " vs " +
                      std::to_string(values.size()) + ")");
  for (double v : values)
    if (!std::isfinite(v)) throw ConfigError("param '" + name + "': non-finite value");
}

ParamSet& ParamSet::operator=(const ParamSet& other) {
  if (this == &other) return *this;
  arrays_.clear();
  index_.clear();
  arrays_.reserve(other.arrays_.size());
  for (const auto& a : other.arrays_) {
    index_[a->name] = arrays_.size();
    arrays_.push_back(std::make_unique<ParamArray>(*a));
  }
  return *this;
}

ParamArray& ParamSet::add(std::string name, std::vector<std::size_t> shape) {
  if (index_.count(name)) throw ConfigError("duplicate param name '" + name + "'");
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  auto arr = std::make_unique<ParamArray>();
  arr->name = std::move(name);
  arr->shape = std::move(shape);
  arr->values.assign(n, 0.0);
  index_[arr->name] = arrays_.size();
  arrays_.push_back(std::move(arr));
  return *arrays_.back();
}

ParamArray& ParamSet::by_name(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown param '" + name + "'");
  return *arrays_[it->second];
}

const ParamArray& ParamSet::by_name(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown param '" + name + "'");
  return *arrays_[it->second];
}

std::size_t ParamSet::total_values() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += a->size();
  return n;
}

void ParamSet::validate() const {
  for (const auto& a : arrays_) a->validate();
}

GradientRecord::GradientRecord(const ParamSet& params) : params_(&params) {
  slots_.resize(params.count());
  for (std::size_t i = 0; i < params.count(); ++i) {
    slots_[i].assign(params.at(i).size(), 0.0);
    index_[&params.at(i)] = i;
  }
}

void GradientRecord::zero() {
  for (auto& s : slots_) std::fill(s.begin(), s.end(), 0.0);
}

void GradientRecord::accumulate(const ParamArray* p, std::span<const double> grad) {
  auto it = index_.find(p);
  if (it == index_.end())
    throw std::logic_error("gradient for param '" + p->name + "' outside the bound set");
  auto& s = slots_[it->second];
  if (grad.size() != s.size())
    throw std::logic_error("gradient size mismatch for param '" + p->name + "'");
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += grad[i];
}

const std::vector<double>& GradientRecord::slot_for(const ParamArray& p) const {
  auto it = index_.find(&p);
  if (it == index_.end())
    throw std::logic_error("param '" + p.name + "' outside the bound set");
  return slots_[it->second];
}

double GradientRecord::l2_norm() const {
  double s = 0.0;
  for (const auto& slot : slots_)
    for (double g : slot) s += g * g;
  return std::sqrt(s);
}

void GradientRecord::scale(double s) {
  for (auto& slot : slots_)
    for (double& g : slot) g *= s;
}

std::string GradientRecord::first_non_finite() const {
  for (std::size_t i = 0; i < slots_.size(); ++i)
    for (double g : slots_[i])
      if (!std::isfinite(g)) return params_->at(i).name;
  return "";
}

void save_checkpoint(const ParamSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint for writing: " + path);
  os.write(kMagic, sizeof(kMagic) - 1);
  write_u32(os, kVersion);
  for (const auto& a : params) {
    write_u32(os, static_cast<std::uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    write_u32(os, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) write_u64(os, d);
    for (double v : a.values) write_f64(os, v);
  }
  if (!os) throw DataError("write failure on checkpoint: " + path);
}

ParamSet load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  char magic[sizeof(kMagic) - 1];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw DataError("bad checkpoint magic in " + path);
  std::uint32_t version = 0;
  if (!read_u32(is, version) || version != kVersion)
    throw DataError("unsupported checkpoint version in " + path);

  ParamSet set;
  while (true) {
    std::uint32_t name_len = 0;
    if (!read_u32(is, name_len)) {
      if (is.eof()) break;
      throw DataError("truncated checkpoint record in " + path);
    }
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw DataError("truncated checkpoint name in " + path);
    std::uint32_t ndim = 0;
    if (!read_u32(is, ndim)) throw DataError("truncated checkpoint shape in " + path);
    std::vector<std::size_t> shape(ndim);
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
      std::uint64_t d = 0;
      if (!read_u64(is, d)) throw DataError("truncated checkpoint shape in " + path);
      shape[i] = static_cast<std::size_t>(d);
      n *= shape[i];
    }
    ParamArray& a = set.add(name, shape);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      if (!read_u64(is, bits))
        throw DataError("truncated values for param '" + name + "' in " + path);
      a.values[i] = std::bit_cast<double>(bits);
    }
  }
  return set;
}

void load_checkpoint_into(ParamSet& params, const std::string& path) {
  ParamSet loaded = load_checkpoint(path);
  if (loaded.count() != params.count())
    throw DataError("checkpoint incompatible: expected " + std::to_string(params.count()) +
                    " arrays, found " + std::to_string(loaded.count()));
  for (auto& src : loaded) {
    if (!params.contains(src.name))
      throw DataError("checkpoint incompatible: unexpected param '" + src.name + "'");
    ParamArray& dst = params.by_name(src.name);
    if (dst.shape != src.shape)
      throw DataError("checkpoint incompatible: shape mismatch for '" + src.name + "'");
    dst.values = src.values;
  }
}

}  // namespace flows

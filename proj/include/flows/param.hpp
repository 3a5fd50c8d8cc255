#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace flows {

// A named flat array of 64-bit reals with shape metadata. Everything that is
// trained or checkpointed lives in one of these.
struct ParamArray {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  // Throws ConfigError when product(shape) != values.size() or a value is
  // non-finite.
  void validate() const;
};

// Ordered, name-indexed collection of ParamArrays. Arrays are heap-allocated
// so their addresses stay stable across add(); the tape and the optimizer key
// on those addresses.
class ParamSet {
 public:
  ParamSet() = default;
  ParamSet(const ParamSet& other) { *this = other; }
  ParamSet& operator=(const ParamSet& other);
  ParamSet(ParamSet&&) = default;
  ParamSet& operator=(ParamSet&&) = default;

  ParamArray& add(std::string name, std::vector<std::size_t> shape);
  ParamArray& at(std::size_t i) { return *arrays_[i]; }
  const ParamArray& at(std::size_t i) const { return *arrays_[i]; }
  ParamArray& by_name(const std::string& name);
  const ParamArray& by_name(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t count() const { return arrays_.size(); }
  std::size_t total_values() const;
  void validate() const;

  class iterator {
   public:
    iterator(const ParamSet* s, std::size_t i) : s_(s), i_(i) {}
    const ParamArray& operator*() const { return s_->at(i_); }
    iterator& operator++() {
      ++i_;
      return *this;
    }
    bool operator!=(const iterator& o) const { return i_ != o.i_; }

   private:
    const ParamSet* s_;
    std::size_t i_;
  };
  iterator begin() const { return iterator(this, 0); }
  iterator end() const { return iterator(this, count()); }

 private:
  std::vector<std::unique_ptr<ParamArray>> arrays_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Per-ParamArray gradients mirroring a ParamSet's shapes.
class GradientRecord {
 public:
  explicit GradientRecord(const ParamSet& params);

  void zero();
  // Accumulates into the slot owned by `p`; throws std::logic_error when `p`
  // is not a member of the bound set.
  void accumulate(const ParamArray* p, std::span<const double> grad);
  std::vector<double>& slot(std::size_t i) { return slots_[i]; }
  const std::vector<double>& slot(std::size_t i) const { return slots_[i]; }
  const std::vector<double>& slot_for(const ParamArray& p) const;
  std::size_t count() const { return slots_.size(); }
  double l2_norm() const;
  void scale(double s);
  // Returns the name of the first array holding a non-finite entry, or empty.
  std::string first_non_finite() const;

 private:
  const ParamSet* params_;
  std::vector<std::vector<double>> slots_;
  std::unordered_map<const ParamArray*, std::size_t> index_;
};

// Binary checkpoint: magic "FLOWSCKPT1", u32 version, then per-array records
// (u32 name length, name bytes, u32 ndim, u64 dims, little-endian f64 values)
// until EOF. Round trips bit-exactly.
void save_checkpoint(const ParamSet& params, const std::string& path);
ParamSet load_checkpoint(const std::string& path);
// Loads values into an existing set; names and shapes must match exactly.
void load_checkpoint_into(ParamSet& params, const std::string& path);

}  // namespace flows

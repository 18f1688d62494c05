#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <new>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gafnet/error.hpp"

namespace gafnet {

using cplx = std::complex<double>;

// Row-major parameter storage. Complex arrays are interleaved (re, im) in memory.
using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RVec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;

// Complex product written out as the four real products. Avoids the
// NaN-recovery slow path of operator* and matches the real-block oracle exactly.
inline cplx cmul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

// |z| without the overflow-safe hypot path, which dominates magnitude-heavy stages.
inline double magnitude(cplx z) { return std::sqrt(z.real() * z.real() + z.imag() * z.imag()); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

// Recycles large buffers. A fresh multi-megabyte allocation page-faults on
// first touch, which costs more than the arithmetic of most stages.
class BufferPool {
 public:
  static BufferPool& instance() {
    static BufferPool* pool = new BufferPool;  // never destroyed: outlives static tensors
    return *pool;
  }

  void* acquire(std::size_t bytes) {
    if (bytes >= min_pooled) {
      std::lock_guard lock(mutex_);
      if (auto it = free_.find(bytes); it != free_.end()) {
        void* p = it->second;
        free_.erase(it);
        cached_ -= bytes;
        return p;
      }
    }
    return ::operator new(bytes, std::align_val_t{64});
  }

  void release(void* p, std::size_t bytes) noexcept {
    if (bytes >= min_pooled) {
      std::lock_guard lock(mutex_);
      if (cached_ + bytes <= max_cached) {
        free_.emplace(bytes, p);
        cached_ += bytes;
        return;
      }
    }
    ::operator delete(p, std::align_val_t{64});
  }

 private:
  static constexpr std::size_t min_pooled = std::size_t{1} << 20;
  static constexpr std::size_t max_cached = std::size_t{1} << 30;
  std::mutex mutex_;
  std::multimap<std::size_t, void*> free_;
  std::size_t cached_ = 0;
};

template <typename T>
struct PoolAllocator {
  using value_type = T;
  PoolAllocator() = default;
  template <typename U>
  PoolAllocator(const PoolAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(BufferPool::instance().acquire(n * sizeof(T))); }
  void deallocate(T* p, std::size_t n) noexcept { BufferPool::instance().release(p, n * sizeof(T)); }
  template <typename U>
  bool operator==(const PoolAllocator<U>&) const noexcept {
    return true;
  }
};

}  // namespace detail

// Scratch and tensor storage drawing on the shared buffer pool.
template <typename T>
using pooled_vector = std::vector<T, detail::PoolAllocator<T>>;

enum class Axis : std::uint8_t { batch, channel, frequency, time };

inline const char* axis_name(Axis a) {
  switch (a) {
    case Axis::batch: return "batch";
    case Axis::channel: return "channel";
    case Axis::frequency: return "frequency";
    case Axis::time: return "time";
  }
  return "?";
}

// Dense complex array with semantic axis labels. Row-major, last axis fastest.
class ComplexTensor {
 public:
  ComplexTensor() = default;

  ComplexTensor(std::vector<Axis> axes, std::vector<std::size_t> shape)
      : axes_(std::move(axes)), shape_(std::move(shape)) {
    require(axes_.size() == shape_.size(), Errc::shape_mismatch,
            "axis label count does not match rank");
    for (std::size_t i = 0; i < axes_.size(); ++i)
      for (std::size_t j = i + 1; j < axes_.size(); ++j)
        require(axes_[i] != axes_[j], Errc::invalid_argument,
                std::string("duplicate axis label ") + axis_name(axes_[i]));
    std::size_t n = 1;
    for (auto d : shape_) n *= d;
    data_.assign(n, cplx{});
  }

  // (batch, channel, frequency, time), the layout every model stage uses.
  static ComplexTensor bcft(std::size_t b, std::size_t c, std::size_t f, std::size_t t) {
    return ComplexTensor({Axis::batch, Axis::channel, Axis::frequency, Axis::time}, {b, c, f, t});
  }

  std::size_t rank() const noexcept { return shape_.size(); }
  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  const std::vector<Axis>& axes() const noexcept { return axes_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  bool has_axis(Axis a) const { return std::find(axes_.begin(), axes_.end(), a) != axes_.end(); }

  std::size_t axis_index(Axis a) const {
    auto it = std::find(axes_.begin(), axes_.end(), a);
    require(it != axes_.end(), Errc::shape_mismatch, std::string("missing axis ") + axis_name(a));
    return static_cast<std::size_t>(it - axes_.begin());
  }

  std::size_t dim(Axis a) const { return shape_[axis_index(a)]; }

  std::size_t size() const noexcept { return data_.size(); }
  cplx* data() noexcept { return data_.data(); }
  const cplx* data() const noexcept { return data_.data(); }
  std::span<cplx> values() noexcept { return data_; }
  std::span<const cplx> values() const noexcept { return data_; }

  cplx& operator[](std::size_t i) { return data_[i]; }
  const cplx& operator[](std::size_t i) const { return data_[i]; }

  template <typename... I>
  std::size_t offset(I... idx) const {
    const std::size_t ix[] = {static_cast<std::size_t>(idx)...};
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizeof...(I); ++k) off = off * shape_[k] + ix[k];
    return off;
  }

  template <typename... I>
  cplx& at(I... idx) {
    return data_[offset(idx...)];
  }
  template <typename... I>
  const cplx& at(I... idx) const {
    return data_[offset(idx...)];
  }

  std::vector<double> real_part() const {
    std::vector<double> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](cplx z) { return z.real(); });
    return out;
  }
  std::vector<double> imag_part() const {
    std::vector<double> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [](cplx z) { return z.imag(); });
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](cplx z) {
      return std::isfinite(z.real()) && std::isfinite(z.imag());
    });
  }

  bool same_layout(const ComplexTensor& o) const { return axes_ == o.axes_ && shape_ == o.shape_; }

  void fill(cplx v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  std::vector<Axis> axes_;
  std::vector<std::size_t> shape_;
  pooled_vector<cplx> data_;
};

inline std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

inline void require_bcft(const ComplexTensor& x, const char* who) {
  const std::vector<Axis> want{Axis::batch, Axis::channel, Axis::frequency, Axis::time};
  require(x.axes() == want, Errc::shape_mismatch,
          std::string(who) + ": expected axes (batch, channel, frequency, time)");
}

// Multiply-accumulate tally. Kernels report their analytic MAC count for the
// shapes they actually ran on; a ScopedMacCounter installed on the calling
// thread collects it.
namespace profile {

inline thread_local std::uint64_t* mac_sink = nullptr;

inline void tally(std::uint64_t macs) {
  if (mac_sink) *mac_sink += macs;
}

class ScopedMacCounter {
 public:
  ScopedMacCounter() : previous_(mac_sink) { mac_sink = &count_; }
  ~ScopedMacCounter() { mac_sink = previous_; }
  ScopedMacCounter(const ScopedMacCounter&) = delete;
  ScopedMacCounter& operator=(const ScopedMacCounter&) = delete;

  std::uint64_t count() const noexcept { return count_; }

 private:
  std::uint64_t count_ = 0;
  std::uint64_t* previous_;
};

// Suspends tallying on this thread, for kernels that report an aggregate count themselves.
class ScopedMacPause {
 public:
  ScopedMacPause() : previous_(mac_sink) { mac_sink = nullptr; }
  ~ScopedMacPause() { mac_sink = previous_; }
  ScopedMacPause(const ScopedMacPause&) = delete;
  ScopedMacPause& operator=(const ScopedMacPause&) = delete;

 private:
  std::uint64_t* previous_;
};

}  // namespace profile

}  // namespace gafnet

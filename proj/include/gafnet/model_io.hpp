#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <map>
#include <string>
#include <vector>

#include "gafnet/model.hpp"
#include "gafnet/wav.hpp"

namespace gafnet {

// Tensor container, shared by weight files and stage dumps. Little-endian:
//
//   "GAFN"  u32 version  u64 fingerprint  u32 n_records
//   per record: u16 name_len, name, u8 dtype, u8 rank, u64 dims[rank],
//               u8 axes_len, axes, u64 data_offset, u64 data_bytes
//   data blobs, contiguous and in record order
//
// dtype 0/1 = f32 real/complex, 2/3 = f64 real/complex. Complex data is
// interleaved (re, im) with the last dimension fastest.
inline constexpr char tensor_file_magic[4] = {'G', 'A', 'F', 'N'};
inline constexpr std::uint32_t tensor_file_version = 1;

struct TensorRecord {
  std::string name;
  std::vector<std::size_t> shape;
  bool is_complex = false;
  bool f64 = false;
  std::string axes;            // optional labels, one letter per dimension (b, c, f, t)
  std::vector<double> values;  // 2 * prod(shape) when complex
  std::uint64_t dir_offset = 0;

  std::size_t n_elements() const {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  std::size_t n_scalars() const { return n_elements() * (is_complex ? 2 : 1); }
};

struct TensorFile {
  std::uint64_t fingerprint = 0;
  std::vector<TensorRecord> records;

  const TensorRecord* find(const std::string& name) const {
    for (const auto& r : records)
      if (r.name == name) return &r;
    return nullptr;
  }
};

namespace detail {

inline void put_u64le(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline std::uint64_t read_u64le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

// Cursor over an in-memory file image.
class ByteCursor {
 public:
  explicit ByteCursor(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::uint64_t pos() const { return pos_; }
  std::uint64_t size() const { return bytes_.size(); }

  const unsigned char* take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) throw FormatError(pos_, std::string("truncated ") + what);
    const unsigned char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

 private:
  std::span<const unsigned char> bytes_;
  std::uint64_t pos_ = 0;
};

// Cursor reading a file front to back, so large blobs go straight into their records.
class StreamCursor {
 public:
  StreamCursor(std::istream& in, std::uint64_t size) : in_(in), size_(size) {}

  std::uint64_t pos() const { return pos_; }
  std::uint64_t size() const { return size_; }

  const unsigned char* take(std::size_t n, const char* what) {
    if (n > size_ - pos_) throw FormatError(pos_, std::string("truncated ") + what);
    buf_.resize(n);
    read_into(buf_.data(), n);
    return buf_.data();
  }

  void read_into(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!in_) fail(Errc::io_error, "read failed at byte " + std::to_string(pos_));
    pos_ += n;
  }

 private:
  std::istream& in_;
  std::uint64_t size_;
  std::uint64_t pos_ = 0;
  std::vector<unsigned char> buf_;
};

template <typename Cursor>
std::uint8_t take_u8(Cursor& c, const char* what) { return *c.take(1, what); }
template <typename Cursor>
std::uint16_t take_u16(Cursor& c, const char* what) { return read_u16le(c.take(2, what)); }
template <typename Cursor>
std::uint32_t take_u32(Cursor& c, const char* what) { return read_u32le(c.take(4, what)); }
template <typename Cursor>
std::uint64_t take_u64(Cursor& c, const char* what) { return read_u64le(c.take(8, what)); }

inline char axis_letter(Axis a) {
  switch (a) {
    case Axis::batch: return 'b';
    case Axis::channel: return 'c';
    case Axis::frequency: return 'f';
    case Axis::time: return 't';
  }
  return '?';
}

inline Axis axis_from_letter(char c) {
  switch (c) {
    case 'b': return Axis::batch;
    case 'c': return Axis::channel;
    case 'f': return Axis::frequency;
    case 't': return Axis::time;
    default: fail(Errc::format_error, std::string("unknown axis label '") + c + "'");
  }
}

constexpr bool raw_f64 = std::endian::native == std::endian::little;

// Header plus directory; data follows at the returned size.
inline std::vector<unsigned char> encode_directory(const TensorFile& file) {
  const std::size_t header = 4 + 4 + 8 + 4;
  std::size_t dir_size = 0;
  for (const auto& r : file.records) {
    require(r.name.size() <= 0xffff && r.shape.size() <= 0xff && r.axes.size() <= 0xff, Errc::invalid_argument,
            "tensor record '" + r.name + "' has an oversized header field");
    require(r.values.size() == r.n_scalars(), Errc::shape_mismatch,
            "tensor record '" + r.name + "' has " + std::to_string(r.values.size()) + " values for shape " +
                shape_string(r.shape));
    dir_size += 2 + r.name.size() + 1 + 1 + 8 * r.shape.size() + 1 + r.axes.size() + 8 + 8;
  }
  std::vector<unsigned char> out;
  out.reserve(header + dir_size);
  out.insert(out.end(), tensor_file_magic, tensor_file_magic + 4);
  put_u32le(out, tensor_file_version);
  put_u64le(out, file.fingerprint);
  put_u32le(out, static_cast<std::uint32_t>(file.records.size()));
  std::uint64_t data_offset = header + dir_size;
  for (const auto& r : file.records) {
    put_u16le(out, static_cast<std::uint16_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    out.push_back(static_cast<unsigned char>((r.f64 ? 2 : 0) + (r.is_complex ? 1 : 0)));
    out.push_back(static_cast<unsigned char>(r.shape.size()));
    for (auto d : r.shape) put_u64le(out, d);
    out.push_back(static_cast<unsigned char>(r.axes.size()));
    out.insert(out.end(), r.axes.begin(), r.axes.end());
    const std::uint64_t bytes = r.n_scalars() * (r.f64 ? 8 : 4);
    put_u64le(out, data_offset);
    put_u64le(out, bytes);
    data_offset += bytes;
  }
  return out;
}

// Serialized data of one record, in chunks of at most `chunk` values.
template <typename Sink>
void emit_values(const TensorRecord& r, Sink&& sink, std::size_t chunk = 1 << 16) {
  if (r.f64 && raw_f64) {
    sink(reinterpret_cast<const unsigned char*>(r.values.data()), 8 * r.values.size());
    return;
  }
  std::vector<unsigned char> buf;
  for (std::size_t i = 0; i < r.values.size(); i += chunk) {
    buf.clear();
    const std::size_t stop = std::min(r.values.size(), i + chunk);
    for (std::size_t k = i; k < stop; ++k) {
      if (r.f64) {
        put_u64le(buf, std::bit_cast<std::uint64_t>(r.values[k]));
      } else {
        put_u32le(buf, std::bit_cast<std::uint32_t>(static_cast<float>(r.values[k])));
      }
    }
    sink(buf.data(), buf.size());
  }
}

inline void decode_values(const unsigned char* p, TensorRecord& r) {
  if (r.f64 && raw_f64) {
    std::memcpy(r.values.data(), p, 8 * r.values.size());
    return;
  }
  for (std::size_t k = 0; k < r.values.size(); ++k)
    r.values[k] = r.f64 ? std::bit_cast<double>(read_u64le(p + 8 * k))
                        : static_cast<double>(std::bit_cast<float>(read_u32le(p + 4 * k)));
}

struct DataSpan {
  std::uint64_t offset, bytes, at;
};

// Parses header and directory, then hands each record's data span to `load`.
template <typename Cursor, typename Load>
TensorFile decode_with(Cursor& cur, Load&& load) {
  const unsigned char* magic = cur.take(4, "magic");
  if (std::memcmp(magic, tensor_file_magic, 4) != 0) throw FormatError(0, "bad magic, not a tensor file");
  const std::uint64_t version_at = cur.pos();
  const std::uint32_t version = take_u32(cur, "version");
  if (version != tensor_file_version)
    throw FormatError(version_at, "unsupported tensor file version " + std::to_string(version));
  TensorFile file;
  file.fingerprint = take_u64(cur, "fingerprint");
  const std::uint32_t n = take_u32(cur, "record count");

  std::vector<DataSpan> spans;
  for (std::uint32_t i = 0; i < n; ++i) {
    TensorRecord r;
    r.dir_offset = cur.pos();
    const std::uint16_t name_len = take_u16(cur, "name length");
    const unsigned char* name = cur.take(name_len, "name");
    r.name.assign(reinterpret_cast<const char*>(name), name_len);
    const std::uint64_t dtype_at = cur.pos();
    const std::uint8_t dtype = take_u8(cur, "dtype");
    if (dtype > 3) throw FormatError(dtype_at, "unknown dtype " + std::to_string(dtype));
    r.is_complex = (dtype & 1) != 0;
    r.f64 = dtype >= 2;
    const std::uint8_t rank = take_u8(cur, "rank");
    for (std::uint8_t k = 0; k < rank; ++k) r.shape.push_back(take_u64(cur, "dimension"));
    const std::uint8_t axes_len = take_u8(cur, "axes length");
    const unsigned char* axes = cur.take(axes_len, "axes");
    r.axes.assign(reinterpret_cast<const char*>(axes), axes_len);
    if (!r.axes.empty() && r.axes.size() != r.shape.size())
      throw FormatError(cur.pos() - axes_len, "axis labels do not match rank");
    const std::uint64_t span_at = cur.pos();
    const std::uint64_t offset = take_u64(cur, "data offset");
    const std::uint64_t bytes = take_u64(cur, "data size");
    // Guard the element count before multiplying it out.
    long double expected = r.f64 ? 8.0L : 4.0L;
    for (auto d : r.shape) expected *= static_cast<long double>(d);
    if (r.is_complex) expected *= 2.0L;
    if (expected != static_cast<long double>(bytes))
      throw FormatError(span_at, "data size disagrees with shape of '" + r.name + "'");
    spans.push_back({offset, bytes, span_at});
    file.records.push_back(std::move(r));
  }

  const std::uint64_t size = cur.size();
  std::uint64_t expected_offset = cur.pos();
  for (std::size_t i = 0; i < spans.size(); ++i) {
    const DataSpan& s = spans[i];
    if (s.offset != expected_offset) throw FormatError(s.at, "data offset out of sequence");
    if (s.bytes > size || s.offset > size - s.bytes)
      throw FormatError(std::min<std::uint64_t>(s.offset, size), "truncated data for '" + file.records[i].name + "'");
    TensorRecord& r = file.records[i];
    r.values.resize(r.n_scalars());
    load(r, s.bytes);
    expected_offset += s.bytes;
  }
  if (expected_offset != size) throw FormatError(expected_offset, "trailing bytes after tensor data");
  return file;
}

}  // namespace detail

inline std::vector<unsigned char> encode_tensor_file(const TensorFile& file) {
  std::vector<unsigned char> out = detail::encode_directory(file);
  std::size_t total = out.size();
  for (const auto& r : file.records) total += r.n_scalars() * (r.f64 ? 8 : 4);
  out.reserve(total);
  for (const auto& r : file.records)
    detail::emit_values(r, [&](const unsigned char* p, std::size_t n) { out.insert(out.end(), p, p + n); });
  return out;
}

inline TensorFile decode_tensor_file(std::span<const unsigned char> bytes) {
  detail::ByteCursor cur(bytes);
  return detail::decode_with(cur, [&](TensorRecord& r, std::uint64_t n) { detail::decode_values(cur.take(n, "data"), r); });
}

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  const std::vector<unsigned char> dir = detail::encode_directory(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::io_error, "cannot create " + path.string());
  auto sink = [&](const unsigned char* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
  };
  sink(dir.data(), dir.size());
  for (const auto& r : file.records) detail::emit_values(r, sink);
  if (!out) fail(Errc::io_error, "write failed for " + path.string());
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io_error, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  detail::StreamCursor cur(in, size);
  return detail::decode_with(cur, [&](TensorRecord& r, std::uint64_t n) {
    if (r.f64 && detail::raw_f64) {
      cur.read_into(r.values.data(), n);
    } else {
      detail::decode_values(cur.take(n, "data"), r);
    }
  });
}

inline TensorRecord record_from_tensor(const std::string& name, const ComplexTensor& x, bool f64 = true) {
  TensorRecord r;
  r.name = name;
  r.shape = x.shape();
  r.is_complex = true;
  r.f64 = f64;
  for (Axis a : x.axes()) r.axes += detail::axis_letter(a);
  r.values.assign(reinterpret_cast<const double*>(x.data()), reinterpret_cast<const double*>(x.data()) + 2 * x.size());
  return r;
}

inline ComplexTensor tensor_from_record(const TensorRecord& r) {
  require(r.is_complex, Errc::format_error, "record '" + r.name + "' is real, expected complex");
  require(r.axes.size() == r.shape.size(), Errc::format_error, "record '" + r.name + "' has no axis labels");
  std::vector<Axis> axes;
  for (char c : r.axes) axes.push_back(detail::axis_from_letter(c));
  ComplexTensor x(axes, r.shape);
  std::copy(r.values.begin(), r.values.end(), reinterpret_cast<double*>(x.data()));
  return x;
}

inline TensorFile weights_to_tensor_file(const ModelParams& m) {
  TensorFile file;
  file.fingerprint = m.fingerprint();
  m.visit([&](const std::string& name, const std::vector<std::size_t>& shape, bool is_complex, const double* data) {
    TensorRecord r;
    r.name = name;
    r.shape = shape;
    r.is_complex = is_complex;
    r.values.assign(data, data + r.n_scalars());
    file.records.push_back(std::move(r));
  });
  return file;
}

inline void save_weights(const std::filesystem::path& path, const ModelParams& m) {
  write_tensor_file(path, weights_to_tensor_file(m));
}

// Fills a model for `cfg` from a decoded file; nothing is returned unless every tensor loads.
inline ModelParams weights_from_tensor_file(const TensorFile& file, const RunConfig& cfg) {
  const std::uint64_t want = cfg.arch.fingerprint();
  if (file.fingerprint != want)
    fail(Errc::config_mismatch, "weight fingerprint " + std::to_string(file.fingerprint) +
                                    " does not match configuration fingerprint " + std::to_string(want) + " (" +
                                    cfg.arch.canonical() + ")");
  ModelParams m = make_model(cfg.arch);
  std::size_t matched = 0;
  m.visit([&](const std::string& name, const std::vector<std::size_t>& shape, bool is_complex, double* data) {
    const TensorRecord* r = file.find(name);
    if (!r) throw FormatError(0, "weight file lacks tensor '" + name + "'");
    if (r->shape != shape || r->is_complex != is_complex)
      throw FormatError(r->dir_offset, "tensor '" + name + "' has shape " + shape_string(r->shape) +
                                           ", expected " + shape_string(shape));
    for (double v : r->values)
      if (!std::isfinite(v)) throw FormatError(r->dir_offset, "tensor '" + name + "' holds non-finite values");
    std::copy(r->values.begin(), r->values.end(), data);
    ++matched;
  });
  if (matched != file.records.size())
    throw FormatError(0, "weight file holds " + std::to_string(file.records.size() - matched) + " unknown tensors");
  apply_run_settings(m, cfg);
  return m;
}

inline ModelParams load_weights(const std::filesystem::path& path, const RunConfig& cfg) {
  return weights_from_tensor_file(read_tensor_file(path), cfg);
}

}  // namespace gafnet

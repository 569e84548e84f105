#include "bevcv/formats.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <string>

#include "bevcv/error.hpp"

namespace bevcv {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

namespace {

constexpr char kEmbeddingMagic[4] = {'B', 'E', 'V', 'C'};
constexpr char kWeightsMagic[4] = {'B', 'V', 'W', 'T'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, const char* what)
      : bytes_(bytes), what_(what) {}

  template <typename T>
  T get() {
    T v;
    get_bytes(&v, sizeof(T));
    return v;
  }
  void get_bytes(void* out, std::size_t n) {
    if (remaining() < n) {
      throw MalformedFile(std::string(what_) + ": truncated at byte " +
                          std::to_string(pos_));
    }
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  const char* what_;
};

void check_magic(Reader& r, const char (&magic)[4], const char* what) {
  char m[4];
  r.get_bytes(m, 4);
  if (std::memcmp(m, magic, 4) != 0) {
    throw MalformedFile(std::string(what) + ": bad magic");
  }
}

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const EmbeddingSet& set) {
  set.validate();
  if (set.dim > UINT32_MAX) throw DimensionMismatch("dim does not fit in u32");
  Writer w;
  w.put_bytes(kEmbeddingMagic, 4);
  w.put<std::uint16_t>(kEmbeddingFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(set.dim));
  w.put<std::uint64_t>(set.size());
  w.put_bytes(set.ids.data(), set.ids.size() * sizeof(std::uint64_t));
  w.put_bytes(set.values.data(), set.values.size() * sizeof(float));
  return w.take();
}

EmbeddingSet decode_embeddings(std::span<const std::uint8_t> bytes) {
  constexpr const char* what = "embedding file";
  Reader r(bytes, what);
  check_magic(r, kEmbeddingMagic, what);
  const auto version = r.get<std::uint16_t>();
  if (version != kEmbeddingFormatVersion) {
    throw MalformedFile(std::string(what) + ": unsupported version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kEmbeddingFormatVersion) + ")");
  }
  EmbeddingSet set;
  set.dim = r.get<std::uint32_t>();
  const auto count = r.get<std::uint64_t>();
  // Size check before allocating, so a corrupt count cannot request
  // gigabytes.
  const std::size_t row_bytes = 8 + set.dim * sizeof(float);
  if (count > r.remaining() / (row_bytes ? row_bytes : 1) ||
      count * row_bytes != r.remaining()) {
    throw MalformedFile(std::string(what) + ": payload is " +
                        std::to_string(r.remaining()) + " bytes, expected " +
                        std::to_string(count) + " rows of " +
                        std::to_string(row_bytes));
  }
  if (set.dim == 0 && count > 0) {
    throw MalformedFile(std::string(what) + ": zero dimension with rows");
  }
  set.ids.resize(count);
  set.values.resize(count * set.dim);
  r.get_bytes(set.ids.data(), count * sizeof(std::uint64_t));
  r.get_bytes(set.values.data(), set.values.size() * sizeof(float));
  return set;
}

std::vector<std::uint8_t> encode_weights(std::span<const NamedTensor> tensors) {
  Writer w;
  w.put_bytes(kWeightsMagic, 4);
  w.put<std::uint16_t>(kWeightsFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  std::set<std::string, std::less<>> seen;
  for (const auto& nt : tensors) {
    if (!seen.insert(nt.name).second) throw DuplicateTensorName(nt.name);
    if (nt.name.size() > UINT16_MAX) {
      throw InvalidArgument("tensor name longer than 65535 bytes");
    }
    w.put<std::uint16_t>(static_cast<std::uint16_t>(nt.name.size()));
    w.put_bytes(nt.name.data(), nt.name.size());
    const Dims& d = nt.tensor.dims();
    w.put<std::uint8_t>(static_cast<std::uint8_t>(d.size()));
    for (std::size_t e : d) {
      if (e > UINT32_MAX) throw InvalidArgument("extent does not fit in u32");
      w.put<std::uint32_t>(static_cast<std::uint32_t>(e));
    }
    w.put_bytes(nt.tensor.data(), nt.tensor.size() * sizeof(float));
  }
  return w.take();
}

LayerWeights decode_weights(std::span<const std::uint8_t> bytes) {
  constexpr const char* what = "weights file";
  Reader r(bytes, what);
  check_magic(r, kWeightsMagic, what);
  const auto version = r.get<std::uint16_t>();
  if (version != kWeightsFormatVersion) {
    throw MalformedFile(std::string(what) + ": unsupported version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kWeightsFormatVersion) + ")");
  }
  const auto count = r.get<std::uint32_t>();
  LayerWeights w;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name(r.get<std::uint16_t>(), '\0');
    r.get_bytes(name.data(), name.size());
    const auto rank = r.get<std::uint8_t>();
    if (rank < 1 || rank > 4) {
      throw MalformedFile(std::string(what) + ": tensor '" + name +
                          "' has rank " + std::to_string(rank));
    }
    Dims dims(rank);
    std::size_t n = 1;
    for (auto& e : dims) {
      e = r.get<std::uint32_t>();
      if (e == 0) {
        throw MalformedFile(std::string(what) + ": tensor '" + name +
                            "' has a zero extent");
      }
      if (n > r.remaining() / e) {
        throw MalformedFile(std::string(what) + ": tensor '" + name +
                            "' is larger than the file");
      }
      n *= e;
    }
    if (n > r.remaining() / sizeof(float)) {
      throw MalformedFile(std::string(what) + ": truncated data for '" + name +
                          "'");
    }
    std::vector<float> data(n);
    r.get_bytes(data.data(), n * sizeof(float));
    w.insert(std::move(name), Tensor(std::move(dims), std::move(data)));
  }
  if (r.remaining() != 0) {
    throw MalformedFile(std::string(what) + ": " +
                        std::to_string(r.remaining()) + " trailing bytes");
  }
  return w;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_embeddings(const std::filesystem::path& path,
                      const EmbeddingSet& set) {
  write_file_bytes(path, encode_embeddings(set));
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(read_file_bytes(path));
}

void write_weights(const std::filesystem::path& path,
                   std::span<const NamedTensor> tensors) {
  write_file_bytes(path, encode_weights(tensors));
}

void write_weights(const std::filesystem::path& path, const LayerWeights& w) {
  write_weights(path, w.entries());
}

LayerWeights read_weights(const std::filesystem::path& path) {
  return decode_weights(read_file_bytes(path));
}

}  // namespace bevcv

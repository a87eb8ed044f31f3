#include "twotier/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include "twotier/errors.h"

namespace twotier {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'T', 'T', 'C', 'K'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) fail("truncated file");
    return v;
  }
  std::string str() {
    auto n = pod<std::uint32_t>();
    if (n > (1u << 24)) fail("implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) fail("truncated file");
    return s;
  }
  [[noreturn]] void fail(const std::string& what) { throw FormatError(source_ + ": " + what); }

 private:
  std::istream& in_;
  std::string source_;
};

}  // namespace

const Tensor& Checkpoint::block(const std::string& name) const {
  for (const auto& [n, t] : blocks) {
    if (n == name) return t;
  }
  throw LookupError("checkpoint has no block '" + name + "'");
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw LookupError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

void Checkpoint::add_parameters(const ParameterSet& params) {
  for (std::size_t i = 0; i < params.size(); ++i) blocks.emplace_back(params.name(i), params.value(i));
}

void Checkpoint::load_parameters(ParameterSet& params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = block(params.name(i));
    if (t.shape() != params.value(i).shape()) {
      throw DimensionError("checkpoint block '" + params.name(i) + "' has shape " + shape_string(t.shape()) +
                           ", model expects " + shape_string(params.value(i).shape()));
    }
    params.value(i) = t;
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, 4);
  w.pod(Checkpoint::kVersion);
  w.pod(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, t] : ckpt.blocks) {
    w.str(name);
    w.pod(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.pod(static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  Reader r(in, path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) r.fail("not a checkpoint file");
  auto version = r.pod<std::uint32_t>();
  if (version != Checkpoint::kVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  auto n_meta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto k = r.str();
    ckpt.metadata[k] = r.str();
  }
  auto n_blocks = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    auto name = r.str();
    auto rank = r.pod<std::uint32_t>();
    if (rank == 0 || rank > 8) r.fail("block '" + name + "' has invalid rank");
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.pod<std::uint64_t>()));
    std::size_t n = shape_size(shape);
    if (n == 0 || n > (std::size_t{1} << 32)) r.fail("block '" + name + "' has invalid size");
    std::vector<double> data(n);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) r.fail("truncated block '" + name + "'");
    ckpt.blocks.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ckpt;
}

}  // namespace twotier

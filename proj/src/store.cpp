#include "pxmc/store.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace pxmc {

namespace {

constexpr char kMagic[4] = {'P', 'X', 'S', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw FormatError("checkpoint truncated at offset " + std::to_string(pos_));
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path + "'");
}

std::string sample_prefix(std::size_t m) { return "s" + std::to_string(m) + "/"; }

}  // namespace

std::vector<std::uint8_t> encode_tree(const ParamTree& tree) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(tree.size()));
  for (const auto& [name, t] : tree) {
    if (!t.all_finite()) throw NumericError("refusing to save non-finite tensor '" + name + "'");
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.dims()) put_u64(out, static_cast<std::uint64_t>(d));
    for (Index i = 0; i < t.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(t.flat()(i)));
  }
  put_u32(out, crc32_of(out.data(), out.size()));
  return out;
}

ParamTree decode_tree(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw FormatError("checkpoint too short (" + std::to_string(bytes.size()) + " bytes)");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad checkpoint magic at offset 0");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(bytes[body + i]) << (8 * i);
  if (stored != crc32_of(bytes.data(), body)) throw CorruptionError("checkpoint CRC mismatch");

  Reader r(bytes, body);
  r.text(4);
  const std::uint32_t version = r.u32();
  if (version > kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(version) + " is newer than supported version " +
                       std::to_string(kCheckpointVersion));
  const std::uint32_t count = r.u32();
  ParamTree tree;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank < 1 || rank > 4) throw FormatError("tensor '" + name + "' has invalid rank " + std::to_string(rank));
    Dims dims;
    std::uint64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t d = r.u64();
      if (d != 0 && n > UINT64_MAX / d) throw FormatError("tensor '" + name + "' has overflowing dims");
      n *= d;
      dims.push_back(static_cast<Index>(d));
    }
    if (n > r.remaining() / 8) throw FormatError("tensor '" + name + "' payload truncated");
    Tensor t(dims);
    for (std::uint64_t i = 0; i < n; ++i) t.flat()(static_cast<Index>(i)) = std::bit_cast<double>(r.u64());
    tree.add(name, std::move(t));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensor " + std::to_string(count));
  return tree;
}

void save_tree(const ParamTree& tree, const std::string& path) { write_file(path, encode_tree(tree)); }

ParamTree load_tree(const std::string& path) { return decode_tree(read_file(path)); }

ParamTree pack_samples(const SampleSet& samples) {
  ParamTree tree;
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const Sample& s = samples.samples[m];
    const std::string prefix = sample_prefix(m);
    VectorX<double> meta(3);
    meta << static_cast<double>(s.cycle), static_cast<double>(s.step), s.phase;
    tree.add(prefix + "meta", Tensor::from_vector(meta));
    for (const auto& [name, t] : s.params) tree.add(prefix + name, t);
  }
  return tree;
}

SampleSet unpack_samples(const ParamTree& tree) {
  SampleSet out;
  for (const auto& [name, t] : tree) {
    const auto slash = name.find('/');
    if (slash == std::string::npos || name[0] != 's') throw FormatError("'" + name + "' is not a sample entry");
    std::size_t m = 0;
    const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + slash, m);
    if (ec != std::errc() || ptr != name.data() + slash) throw FormatError("bad sample index in '" + name + "'");
    const std::string key = name.substr(slash + 1);
    if (key == "meta") {
      if (m != out.size()) throw FormatError("sample entries out of order at '" + name + "'");
      if (t.size() != 3) throw FormatError("sample metadata must hold three values");
      out.samples.push_back({ParamTree{}, static_cast<Index>(t.flat()(0)), static_cast<Index>(t.flat()(1)),
                             t.flat()(2)});
    } else {
      if (out.samples.empty() || m + 1 != out.size()) throw FormatError("'" + name + "' precedes its metadata");
      out.samples.back().params.add(key, t);
    }
  }
  return out;
}

void save_samples(const SampleSet& samples, const std::string& path) { save_tree(pack_samples(samples), path); }

SampleSet load_samples(const std::string& path) { return unpack_samples(load_tree(path)); }

std::string sidecar_path(const std::string& path) { return path + ".json"; }

void write_sidecar(const std::string& path, const nlohmann::ordered_json& meta) {
  const std::string text = meta.dump(2) + "\n";
  write_file(sidecar_path(path), std::vector<std::uint8_t>(text.begin(), text.end()));
}

nlohmann::ordered_json read_sidecar(const std::string& path) {
  const auto bytes = read_file(sidecar_path(path));
  try {
    return nlohmann::ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("sidecar JSON: ") + e.what());
  }
}

}  // namespace pxmc

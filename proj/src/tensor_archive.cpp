#include "grade/tensor_archive.hpp"

#include <fstream>

namespace grade {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'A', 'D', 'E', 'T', 'N', 'S'};
constexpr char kTrailer[4] = {'E', 'N', 'D', '!'};
constexpr std::uint64_t kMaxName = 4096;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw ArchiveError("truncated archive while reading " + what);
  return value;
}

}  // namespace

const TensorArchive::Tensor& TensorArchive::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ArchiveError("archive has no tensor '" + name + "'");
  return it->second;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError("cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_pod<std::uint32_t>(out, kVersion);
  const std::string meta = metadata.dump();
  write_pod<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_pod<std::uint64_t>(out, tensors_.size());
  for (const auto& [name, t] : tensors_) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint8_t>(out, t.scalar_bytes);
    write_pod<std::uint64_t>(out, t.rows);
    write_pod<std::uint64_t>(out, t.cols);
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()));
  }
  out.write(kTrailer, sizeof kTrailer);
  if (!out) throw ArchiveError("write failed for " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw ArchiveError(path.string() + " is not a tensor archive");
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw ArchiveError("archive version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kVersion) + ")");
  }
  TensorArchive archive;
  const auto meta_len = read_pod<std::uint64_t>(in, "metadata length");
  if (meta_len > (1u << 26)) throw ArchiveError("corrupt archive: metadata too large");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len))) throw ArchiveError("truncated archive metadata");
  try {
    archive.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw ArchiveError(std::string("corrupt archive metadata: ") + e.what());
  }
  const auto count = read_pod<std::uint64_t>(in, "tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto name_len = read_pod<std::uint32_t>(in, "tensor name length");
    if (name_len > kMaxName) throw ArchiveError("corrupt archive: tensor name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw ArchiveError("truncated archive in tensor name");
    Tensor t;
    t.scalar_bytes = read_pod<std::uint8_t>(in, name);
    if (t.scalar_bytes != 4 && t.scalar_bytes != 8) throw ArchiveError("corrupt archive: bad scalar width for " + name);
    t.rows = read_pod<std::uint64_t>(in, name);
    t.cols = read_pod<std::uint64_t>(in, name);
    if (t.rows > (1ull << 32) || t.cols > (1ull << 32)) throw ArchiveError("corrupt archive: bad shape for " + name);
    t.data.resize(t.rows * t.cols * t.scalar_bytes);
    if (!in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size()))) {
      throw ArchiveError("truncated archive in tensor " + name);
    }
    archive.tensors_[name] = std::move(t);
  }
  char trailer[4];
  if (!in.read(trailer, sizeof trailer) || std::memcmp(trailer, kTrailer, sizeof trailer) != 0) {
    throw ArchiveError("truncated archive: missing trailer");
  }
  return archive;
}

}  // namespace grade

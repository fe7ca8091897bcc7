#include "hvslu/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hvslu {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void Checkpoint::add(const ParamList& params) {
  for (const auto& p : params) {
    if (contains(p.name)) throw CheckpointError("duplicate checkpoint record '" + p.name + "'");
    records.push_back({p.name, p.tensor.shape(), p.tensor.values()});
  }
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return true;
  }
  return false;
}

const TensorRecord& Checkpoint::find(const std::string& name) const {
  for (const auto& r : records) {
    if (r.name == name) return r;
  }
  throw CheckpointError("checkpoint has no record '" + name + "'");
}

void Checkpoint::restore(const ParamList& params) const {
  for (const auto& p : params) {
    const TensorRecord& r = find(p.name);
    if (r.shape != p.tensor.shape()) {
      throw CheckpointError("record '" + p.name + "' has shape " + shape_string(r.shape) + ", expected " +
                            shape_string(p.tensor.shape()));
    }
    Tensor t = p.tensor;
    Matrix& m = t.mutable_value();
    std::memcpy(m.data(), r.values.data(), r.values.size() * sizeof(double));
  }
}

namespace {

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("truncated checkpoint while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out = std::string(kCheckpointMagic) + "\n";
  const std::string manifest = ckpt.manifest.dump();
  put<std::uint64_t>(out, manifest.size());
  out += manifest;
  put<std::uint64_t>(out, ckpt.records.size());
  for (const auto& r : ckpt.records) {
    if (static_cast<Index>(r.values.size()) != shape_numel(r.shape)) {
      throw CheckpointError("record '" + r.name + "' holds " + std::to_string(r.values.size()) +
                            " values for shape " + shape_string(r.shape));
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(r.shape.size()));
    for (Index d : r.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    const std::size_t offset = out.size();
    out.resize(offset + r.values.size() * sizeof(double));
    std::memcpy(out.data() + offset, r.values.data(), r.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint parse_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  const std::string magic = in.take(std::strlen(kCheckpointMagic) + 1, "format tag");
  if (magic != std::string(kCheckpointMagic) + "\n") throw CheckpointError("not an HVSLU1 checkpoint");
  Checkpoint ckpt;
  const auto manifest_len = in.get<std::uint64_t>("manifest length");
  try {
    ckpt.manifest = nlohmann::json::parse(in.take(manifest_len, "manifest"));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  const auto count = in.get<std::uint64_t>("record count");
  for (std::uint64_t k = 0; k < count; ++k) {
    TensorRecord r;
    r.name = in.take(in.get<std::uint32_t>("name length"), "record name");
    const auto rank = in.get<std::uint32_t>("rank");
    for (std::uint32_t a = 0; a < rank; ++a) r.shape.push_back(static_cast<Index>(in.get<std::uint64_t>("dim")));
    const auto n = static_cast<std::size_t>(shape_numel(r.shape));
    const std::string raw = in.take(n * sizeof(double), "values");
    r.values.resize(n);
    std::memcpy(r.values.data(), raw.data(), raw.size());
    ckpt.records.push_back(std::move(r));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last checkpoint record");
  return ckpt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return parse_checkpoint(read_file(path));
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace hvslu

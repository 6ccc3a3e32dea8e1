#include "basis/checkpoint.hpp"

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "basis/config.hpp"

namespace basis {

namespace {

constexpr char kMagic[] = "BASISCKPT1";
constexpr size_t kMagicLen = 10;
constexpr uint32_t kVersion = 1;

void put_bytes(std::vector<uint8_t>& out, const void* p, size_t n) {
  const auto* b = static_cast<const uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_i32(std::vector<uint8_t>& out, int32_t v) {
  put_u32(out, static_cast<uint32_t>(v));
}

void put_int_list(std::vector<uint8_t>& out, const std::vector<int>& xs) {
  put_u32(out, static_cast<uint32_t>(xs.size()));
  for (int x : xs) put_i32(out, x);
}

void put_block(std::vector<uint8_t>& out, std::string_view name,
               std::span<const double> values) {
  put_u32(out, static_cast<uint32_t>(name.size()));
  put_bytes(out, name.data(), name.size());
  put_u64(out, values.size());
  for (double v : values) {
    float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
}

void put_spec(std::vector<uint8_t>& out, const BasisSpec& spec) {
  put_i32(out, spec.feature_dim);
  put_i32(out, spec.task_channel);
  put_i32(out, spec.num_prefs);
  put_i32(out, spec.d);
  put_i32(out, spec.num_actions);
  put_int_list(out, spec.trunk_hidden);
  put_i32(out, spec.trunk_out);
  put_int_list(out, spec.head_hidden);
  put_u8(out, spec.activation == Activation::relu ? 0 : 1);
}

void write_file(const std::vector<uint8_t>& payload, const std::filesystem::path& path) {
  std::vector<uint8_t> bytes = payload;
  put_u64(bytes, fnv1a64(payload.data(), payload.size()));
  FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f)
    throw InputFileError("cannot write checkpoint " + path.string() + ": " +
                         std::strerror(errno));
  size_t written = std::fwrite(bytes.data(), 1, bytes.size(), f);
  std::fclose(f);
  if (written != bytes.size())
    throw InputFileError("short write on checkpoint " + path.string());
}

class Reader {
 public:
  explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

  size_t pos() const { return pos_; }

  uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }

  std::vector<int> int_list() {
    uint32_t n = u32();
    if (n > 64) throw CheckpointError("checkpoint: implausible layer count");
    std::vector<int> xs(n);
    for (auto& x : xs) x = i32();
    return xs;
  }

  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void fill_block(std::string_view expect_name, std::span<double> dst) {
    uint32_t name_len = u32();
    if (name_len > 256) throw CheckpointError("checkpoint: implausible block name");
    std::string name = str(name_len);
    if (name != expect_name)
      throw CheckpointError("checkpoint: expected block '" + std::string(expect_name) +
                            "', found '" + name + "'");
    uint64_t count = u64();
    if (count != dst.size())
      throw CheckpointError("checkpoint: block '" + name + "' holds " +
                            std::to_string(count) + " values, model expects " +
                            std::to_string(dst.size()));
    for (auto& v : dst) {
      uint32_t bits = u32();
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
  }

 private:
  void need(size_t n) {
    if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint: truncated file");
  }
  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
};

BasisSpec read_spec(Reader& r) {
  BasisSpec spec;
  spec.feature_dim = r.i32();
  spec.task_channel = r.i32();
  spec.num_prefs = r.i32();
  spec.d = r.i32();
  spec.num_actions = r.i32();
  spec.trunk_hidden = r.int_list();
  spec.trunk_out = r.i32();
  spec.head_hidden = r.int_list();
  spec.activation = r.u8() == 0 ? Activation::relu : Activation::tanh;
  return spec;
}

std::vector<uint8_t> read_verified(const std::filesystem::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "rb");
  if (!f)
    throw InputFileError("cannot open checkpoint " + path.string() + ": " +
                         std::strerror(errno));
  std::vector<uint8_t> bytes;
  uint8_t buf[8192];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) bytes.insert(bytes.end(), buf, buf + n);
  std::fclose(f);

  if (bytes.size() < kMagicLen + 8) throw CheckpointError("checkpoint: truncated file");
  if (std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw CheckpointError("checkpoint: bad magic (not a checkpoint file)");
  size_t payload_len = bytes.size() - 8;
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i)
    stored |= static_cast<uint64_t>(bytes[payload_len + i]) << (8 * i);
  if (fnv1a64(bytes.data(), payload_len) != stored)
    throw CheckpointError("checkpoint: checksum mismatch (corrupted file)");
  bytes.resize(payload_len);
  return bytes;
}

}  // namespace

void save_checkpoint(const BasisModel& model, const std::filesystem::path& path) {
  std::vector<uint8_t> out;
  put_bytes(out, kMagic, kMagicLen);
  put_u32(out, kVersion);
  put_u8(out, 0);  // basis
  put_spec(out, model.spec());
  put_u32(out, 5);
  put_block(out, "theta_trunk",
            model.has_trunk() ? model.trunk().params().flat() : std::span<const double>{});
  put_block(out, "theta_phi", model.phi().params().flat());
  put_block(out, "theta_psi", model.psi().params().flat());
  put_block(out, "theta_psi_target", model.psi_target().params().flat());
  put_block(out, "w",
            std::span<const double>(model.preferences().data(),
                                    model.preferences().size()));
  write_file(out, path);
}

void save_checkpoint(const DqnModel& model, const std::filesystem::path& path) {
  std::vector<uint8_t> out;
  put_bytes(out, kMagic, kMagicLen);
  put_u32(out, kVersion);
  put_u8(out, 1);  // dqn
  put_spec(out, model.spec());
  put_u32(out, 3);
  put_block(out, "theta_trunk",
            model.has_trunk() ? model.trunk().params().flat() : std::span<const double>{});
  put_block(out, "theta_q", model.q_head().params().flat());
  put_block(out, "theta_q_target", model.q_target().params().flat());
  write_file(out, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::vector<uint8_t> payload = read_verified(path);
  Reader r(payload);
  r.str(kMagicLen);
  uint32_t version = r.u32();
  if (version != kVersion)
    throw CheckpointVersionError("checkpoint: unsupported format version " +
                                 std::to_string(version) + " (expected " +
                                 std::to_string(kVersion) + ")");
  uint8_t kind = r.u8();
  BasisSpec spec = read_spec(r);

  LoadedCheckpoint loaded;
  if (kind == 0) {
    loaded.kind = ModelKind::basis;
    BasisModel model(spec);
    uint32_t blocks = r.u32();
    if (blocks != 5) throw CheckpointError("checkpoint: basis model expects 5 blocks");
    r.fill_block("theta_trunk",
                 model.has_trunk() ? model.trunk().params().flat() : std::span<double>{});
    r.fill_block("theta_phi", model.phi().params().flat());
    r.fill_block("theta_psi", model.psi().params().flat());
    r.fill_block("theta_psi_target", model.psi_target().params().flat());
    r.fill_block("w", std::span<double>(model.preferences().data(),
                                        model.preferences().size()));
    loaded.basis.emplace(std::move(model));
  } else if (kind == 1) {
    loaded.kind = ModelKind::dqn;
    DqnModel model(spec);
    uint32_t blocks = r.u32();
    if (blocks != 3) throw CheckpointError("checkpoint: dqn model expects 3 blocks");
    r.fill_block("theta_trunk",
                 model.has_trunk() ? model.trunk().params().flat() : std::span<double>{});
    r.fill_block("theta_q", model.q_head().params().flat());
    r.fill_block("theta_q_target", model.q_target().params().flat());
    loaded.dqn.emplace(std::move(model));
  } else {
    throw CheckpointError("checkpoint: unknown model kind " + std::to_string(kind));
  }
  if (r.pos() != payload.size())
    throw CheckpointError("checkpoint: trailing bytes after parameter blocks");
  return loaded;
}

BasisModel load_basis_checkpoint(const std::filesystem::path& path) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  if (loaded.kind != ModelKind::basis)
    throw CheckpointError("checkpoint: expected a basis model, found a dqn model");
  return std::move(*loaded.basis);
}

DqnModel load_dqn_checkpoint(const std::filesystem::path& path) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  if (loaded.kind != ModelKind::dqn)
    throw CheckpointError("checkpoint: expected a dqn model, found a basis model");
  return std::move(*loaded.dqn);
}

}  // namespace basis

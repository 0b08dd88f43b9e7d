#include "xcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace xcnn {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u16(std::ostream& os, uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); }
void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u8(std::ostream& os, uint8_t v) { os.write(reinterpret_cast<const char*>(&v), 1); }

struct Reader {
  const uint8_t* p;
  const uint8_t* end;
  std::string path;

  void need(size_t n) const {
    if (static_cast<size_t>(end - p) < n)
      throw FormatError(msg(path, ": truncated checkpoint"));
  }
  uint8_t u8() {
    need(1);
    return *p++;
  }
  uint16_t u16() {
    need(2);
    uint16_t v;
    std::memcpy(&v, p, 2);
    p += 2;
    return v;
  }
  uint32_t u32() {
    need(4);
    uint32_t v;
    std::memcpy(&v, p, 4);
    p += 4;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
};

}  // namespace

const TensorF* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError(msg("cannot open ", path, " for writing"));
  os.write("XCNN", 4);
  put_u32(os, Checkpoint::kVersion);
  put_u32(os, static_cast<uint32_t>(ck.manifest.size()));
  os.write(ck.manifest.data(), static_cast<std::streamsize>(ck.manifest.size()));
  put_u32(os, static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u8(os, static_cast<uint8_t>(t.ndim()));
    for (int64_t d : t.shape()) put_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(t.numel())));
  }
  if (!os) throw FormatError(msg("write failed for ", path));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError(msg("cannot open ", path));
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r{buf.data(), buf.data() + buf.size(), path};

  if (r.bytes(4) != "XCNN") throw FormatError(msg(path, ": bad checkpoint magic"));
  uint32_t version = r.u32();
  if (version != Checkpoint::kVersion)
    throw FormatError(msg(path, ": unsupported checkpoint version ", version));

  Checkpoint ck;
  ck.manifest = r.bytes(r.u32());
  uint32_t count = r.u32();
  ck.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u16());
    uint8_t ndim = r.u8();
    Shape shape(ndim);
    for (uint8_t d = 0; d < ndim; ++d) shape[d] = r.u32();
    int64_t n = shape_numel(shape);
    r.need(sizeof(float) * static_cast<size_t>(n));
    std::vector<float> data(static_cast<size_t>(n));
    std::memcpy(data.data(), r.p, sizeof(float) * static_cast<size_t>(n));
    r.p += sizeof(float) * static_cast<size_t>(n);
    ck.tensors.emplace_back(std::move(name), TensorF(std::move(shape), std::move(data)));
  }
  if (r.p != r.end) throw FormatError(msg(path, ": trailing bytes after checkpoint payload"));
  return ck;
}

}  // namespace xcnn

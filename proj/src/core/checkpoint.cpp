#include "latentnav/core/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "latentnav/util/crc32.hpp"

namespace latentnav::core {

namespace {

constexpr char kMagic[8] = {'L', 'N', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kVersion = 1;

struct Writer {
  std::vector<char> buf;
  void raw(const void* p, size_t n) {
    const char* c = static_cast<const char*>(p);
    buf.insert(buf.end(), c, c + n);
  }
  template <typename T>
  void put(T v) {
    raw(&v, sizeof(T));
  }
  void str(const std::string& s) {
    put<uint32_t>(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
};

struct Reader {
  const char* p;
  const char* end;
  void raw(void* out, size_t n) {
    LN_CHECK(p + n <= end, "checkpoint truncated");
    std::memcpy(out, p, n);
    p += n;
  }
  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof(T));
    return v;
  }
  std::string str() {
    uint32_t n = get<uint32_t>();
    LN_CHECK(p + n <= end, "checkpoint truncated");
    std::string s(p, p + n);
    p += n;
    return s;
  }
};

std::vector<char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  LN_CHECK(f.good(), "cannot open checkpoint: ", path);
  f.seekg(0, std::ios::end);
  std::vector<char> data(static_cast<size_t>(f.tellg()));
  f.seekg(0);
  f.read(data.data(), static_cast<std::streamsize>(data.size()));
  LN_CHECK(f.good(), "failed reading checkpoint: ", path);
  return data;
}

Reader open_payload(const std::vector<char>& data) {
  LN_CHECK(data.size() >= sizeof(kMagic) + 8, "checkpoint too small");
  LN_CHECK(std::memcmp(data.data(), kMagic, sizeof(kMagic)) == 0, "bad checkpoint magic");
  uint32_t stored_crc;
  std::memcpy(&stored_crc, data.data() + data.size() - 4, 4);
  uint32_t actual =
      crc32(data.data() + sizeof(kMagic), data.size() - sizeof(kMagic) - 4);
  LN_CHECK(stored_crc == actual, "checkpoint checksum mismatch");
  Reader r{data.data() + sizeof(kMagic), data.data() + data.size() - 4};
  uint32_t version = r.get<uint32_t>();
  LN_CHECK(version == kVersion, "unsupported checkpoint version ", version);
  return r;
}

}  // namespace

void save_checkpoint(const ParamStore& ps, const std::string& config_json, int64_t adam_t,
                     const std::string& path) {
  Writer w;
  w.put<uint32_t>(kVersion);
  w.str(config_json);
  w.put<int64_t>(adam_t);

  std::vector<const Param*> params;
  for (const auto& p : ps.all()) params.push_back(p.get());
  std::sort(params.begin(), params.end(),
            [](const Param* a, const Param* b) { return a->name < b->name; });
  w.put<uint32_t>(static_cast<uint32_t>(params.size()));
  for (const Param* p : params) {
    w.str(p->name);
    w.put<uint8_t>(p->trainable ? 1 : 0);
    w.put<uint32_t>(static_cast<uint32_t>(p->value.ndim()));
    for (int d : p->value.shape()) w.put<int32_t>(d);
    bool has_adam = p->adam_m.defined();
    w.put<uint8_t>(has_adam ? 1 : 0);
    w.raw(p->value.data(), sizeof(Real) * p->value.numel());
    if (has_adam) {
      w.raw(p->adam_m.data(), sizeof(Real) * p->adam_m.numel());
      w.raw(p->adam_v.data(), sizeof(Real) * p->adam_v.numel());
    }
  }

  std::ofstream f(path, std::ios::binary);
  LN_CHECK(f.good(), "cannot write checkpoint: ", path);
  f.write(kMagic, sizeof(kMagic));
  f.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
  uint32_t crc = crc32(w.buf.data(), w.buf.size());
  f.write(reinterpret_cast<const char*>(&crc), 4);
  LN_CHECK(f.good(), "failed writing checkpoint: ", path);
}

int64_t load_checkpoint(ParamStore& ps, std::string* config_json, const std::string& path) {
  std::vector<char> data = read_file(path);
  Reader r = open_payload(data);
  std::string cfg = r.str();
  if (config_json) *config_json = cfg;
  int64_t adam_t = r.get<int64_t>();
  uint32_t n = r.get<uint32_t>();
  size_t loaded = 0;
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    uint8_t trainable = r.get<uint8_t>();
    uint32_t ndim = r.get<uint32_t>();
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = r.get<int32_t>();
    uint8_t has_adam = r.get<uint8_t>();
    Param* p = ps.find(name);
    LN_CHECK(p != nullptr, "checkpoint parameter not in model: ", name);
    LN_CHECK(p->value.shape() == shape, "checkpoint dim mismatch for ", name, ": model ",
             p->value.shape_str(), " vs file");
    r.raw(p->value.data(), sizeof(Real) * p->value.numel());
    if (has_adam) {
      if (!p->adam_m.defined()) {
        p->adam_m = Tensor::zeros(p->value.shape());
        p->adam_v = Tensor::zeros(p->value.shape());
      }
      r.raw(p->adam_m.data(), sizeof(Real) * p->adam_m.numel());
      r.raw(p->adam_v.data(), sizeof(Real) * p->adam_v.numel());
    }
    p->trainable = trainable != 0;
    ++loaded;
  }
  LN_CHECK(loaded == ps.all().size(), "checkpoint has ", loaded, " params, model has ",
           ps.all().size());
  return adam_t;
}

std::string checkpoint_config(const std::string& path) {
  std::vector<char> data = read_file(path);
  Reader r = open_payload(data);
  return r.str();
}

}  // namespace latentnav::core

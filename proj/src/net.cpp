#include "miemph/net.hpp"

#include <cstdio>
#include <fstream>

namespace miemph::net {
namespace {

constexpr char kMagic[6] = {'M', 'I', 'n', 'e', 't', '1'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

struct Reader {
  const unsigned char* p;
  std::size_t n;
  std::size_t pos{0};

  void need(std::size_t k) const {
    if (pos + k > n) throw DataError("truncated checkpoint");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[pos]) |
                      static_cast<std::uint16_t>(p[pos + 1]) << 8;
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
};

}  // namespace

void ModelSpec::validate() const {
  if (n_channels == 0 || in_samples == 0)
    throw ConfigError("model spec: channels and samples must be positive");
  if (conv1_out == 0 || conv2_out == 0 || conv3_out == 0 || conv4_out == 0 ||
      temporal_kernel == 0 || pool == 0 || n_classes == 0)
    throw ConfigError("model spec: zero-sized layer");
  if (!(dropout_p >= 0.0) || !(dropout_p < 1.0))
    throw ConfigError("model spec: dropout_p must be in [0, 1)");
  derive_dims(*this);
}

Dims derive_dims(const ModelSpec& spec) {
  auto conv_out = [](std::size_t in, std::size_t kernel, const char* layer) {
    if (in < kernel)
      throw ConfigError(std::string(layer) + ": input width " +
                        std::to_string(in) + " below kernel " +
                        std::to_string(kernel));
    return in - kernel + 1;
  };
  auto pool_out = [](std::size_t in, std::size_t pool, const char* layer) {
    const std::size_t out = in / pool;
    if (out == 0)
      throw ConfigError(std::string(layer) + ": pooling collapses width " +
                        std::to_string(in) + " to zero");
    return out;
  };
  Dims d{};
  d.s1 = conv_out(spec.in_samples, spec.temporal_kernel, "conv1");
  d.s2 = conv_out(d.s1, spec.temporal_kernel, "conv2");
  d.p1 = pool_out(d.s2, spec.pool, "pool1");
  d.s4 = conv_out(d.p1, spec.temporal_kernel, "conv4");
  d.p2 = pool_out(d.s4, spec.pool, "pool2");
  d.flat = spec.conv4_out * d.p2;
  return d;
}

std::vector<LayerShape> infer_shapes(const ModelSpec& spec) {
  const Dims d = derive_dims(spec);
  std::vector<LayerShape> shapes;
  shapes.push_back({"Convolution", {spec.conv1_out, spec.n_channels, d.s1}});
  shapes.push_back({"Convolution", {spec.conv2_out, spec.n_channels, d.s2}});
  shapes.push_back({"Convolution", {spec.conv3_out, 1, d.s2}});
  shapes.push_back({"Max Pooling", {spec.conv3_out, 1, d.p1}});
  shapes.push_back({"Dropout", {}});
  shapes.push_back({"Convolution", {spec.conv4_out, 1, d.s4}});
  shapes.push_back({"Max Pooling", {spec.conv4_out, 1, d.p2}});
  shapes.push_back({"Flatten", {1, d.flat}});
  shapes.push_back({"Softmax", {1, spec.n_classes}});
  return shapes;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(dropout_p >= 0.0) || !(dropout_p < 1.0))
    throw ConfigError("dropout_p must be in [0, 1)");
}

template <typename T>
void save_checkpoint(const Network<T>& net,
                     const std::filesystem::path& path) {
  const ModelSpec& s = net.spec();
  std::string out;
  out.append(kMagic, 6);
  put_u16(out, kVersion);
  for (std::size_t f : {s.n_channels, s.in_samples, s.conv1_out, s.conv2_out,
                        s.conv3_out, s.conv4_out, s.temporal_kernel, s.pool,
                        s.n_classes})
    put_u32(out, static_cast<std::uint32_t>(f));
  put_f32(out, static_cast<float>(s.dropout_p));
  put_u64(out, net.n_params());
  for (T v : net.flat_params()) put_f32(out, static_cast<float>(v));
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

template <typename T>
Network<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  Reader r{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(),
           6};
  if (r.u16() != kVersion)
    throw DataError("unsupported checkpoint version in " + path.string());
  ModelSpec s;
  s.n_channels = r.u32();
  s.in_samples = r.u32();
  s.conv1_out = r.u32();
  s.conv2_out = r.u32();
  s.conv3_out = r.u32();
  s.conv4_out = r.u32();
  s.temporal_kernel = r.u32();
  s.pool = r.u32();
  s.n_classes = r.u32();
  s.dropout_p = r.f32();
  const std::uint64_t count = r.u64();
  r.need(count * 4);
  std::vector<T> params(count);
  for (std::uint64_t i = 0; i < count; ++i) params[i] = static_cast<T>(r.f32());
  if (r.pos != r.n) throw DataError("trailing bytes in " + path.string());
  return make_network_from_params<T>(s, std::move(params));
}

template void save_checkpoint<float>(const Network<float>&,
                                     const std::filesystem::path&);
template void save_checkpoint<double>(const Network<double>&,
                                      const std::filesystem::path&);
template Network<float> load_checkpoint<float>(const std::filesystem::path&);
template Network<double> load_checkpoint<double>(const std::filesystem::path&);

void write_history_csv(const std::vector<EpochStats>& history,
                       const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << "epoch,train_loss,train_acc,val_acc\n";
  char buf[128];
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& h = history[i];
    if (std::isnan(h.val_acc))
      std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,\n", i, h.train_loss,
                    h.train_acc);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g,%.9g\n", i, h.train_loss,
                    h.train_acc, h.val_acc);
    f << buf;
  }
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace miemph::net

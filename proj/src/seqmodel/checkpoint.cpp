#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "capnet/predictor.hpp"
#include "json.hpp"

namespace capnet {
namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[4] = {'C', 'A', 'P', 'M'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const char* what) {
    auto b = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

Json raster_json(const RasterConfig& r) {
  return {{"lambda_m", r.lambda_m}, {"px_per_m", r.px_per_m}, {"out_px", r.out_px}};
}

Json arch_json(const CapsuleArch& a) {
  return {{"input_px", a.input_px},
          {"base", {a.base_kernel, a.base_stride, a.base_channels}},
          {"branch", {a.branch_kernel, a.branch_stride, a.branch_channels}},
          {"capsule", {a.capsule_kernel, a.capsule_stride, a.capsule_channels}},
          {"branches", a.branches},
          {"layers", a.layers},
          {"higher_dim", a.higher_dim},
          {"final_dim", a.final_dim},
          {"routing_iterations", a.routing_iterations}};
}

Json config_json(const ModelConfig& c) {
  return {{"rho", c.sample.rho},
          {"tau", c.sample.tau},
          {"raster", raster_json(c.sample.raster)},
          {"arch", arch_json(c.arch)},
          {"state_dim", c.state_dim},
          {"hidden", c.hidden}};
}

template <class T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_triple(const Json& j, const char* key, std::size_t& k, std::size_t& s, std::size_t& o) {
  if (!j.contains(key)) return;
  const Json& t = j.at(key);
  if (!t.is_array() || t.size() != 3) throw std::invalid_argument(std::string("arch.") + key + " must be [kernel, stride, channels]");
  k = t[0].get<std::size_t>();
  s = t[1].get<std::size_t>();
  o = t[2].get<std::size_t>();
}

ModelConfig config_from(const Json& j) {
  ModelConfig c;
  read_if(j, "rho", c.sample.rho);
  read_if(j, "tau", c.sample.tau);
  if (j.contains("raster")) {
    const Json& r = j.at("raster");
    read_if(r, "lambda_m", c.sample.raster.lambda_m);
    read_if(r, "px_per_m", c.sample.raster.px_per_m);
    read_if(r, "out_px", c.sample.raster.out_px);
  }
  if (j.contains("arch")) {
    const Json& a = j.at("arch");
    read_if(a, "input_px", c.arch.input_px);
    read_triple(a, "base", c.arch.base_kernel, c.arch.base_stride, c.arch.base_channels);
    read_triple(a, "branch", c.arch.branch_kernel, c.arch.branch_stride, c.arch.branch_channels);
    read_triple(a, "capsule", c.arch.capsule_kernel, c.arch.capsule_stride, c.arch.capsule_channels);
    read_if(a, "branches", c.arch.branches);
    read_if(a, "layers", c.arch.layers);
    read_if(a, "higher_dim", c.arch.higher_dim);
    read_if(a, "final_dim", c.arch.final_dim);
    read_if(a, "routing_iterations", c.arch.routing_iterations);
  } else {
    c.arch.input_px = c.sample.raster.out_px;
  }
  read_if(j, "state_dim", c.state_dim);
  read_if(j, "hidden", c.hidden);
  c.validate();
  return c;
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return config_json(config).dump(2); }

ModelConfig parse_model_config(std::string_view text) {
  try {
    return config_from(Json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("model config: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Json meta;
  meta["config"] = config_json(ckpt.params.config);
  meta["stats"] = {{"mean", ckpt.stats.mean}, {"stddev", ckpt.stats.stddev}};
  meta["training"] = Json::parse(ckpt.training_summary);
  const std::string blob = meta.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  out += blob;
  const auto params = ckpt.params.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const num::Parameter* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (std::size_t d : p->shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : p->value) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader in(bytes);
  if (in.take(4, "magic") != std::string_view(kMagic, 4)) throw CheckpointError("not a checkpoint (bad magic)");
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion) {
    const std::uint32_t swapped = ((kCheckpointVersion & 0xffu) << 24) | ((kCheckpointVersion & 0xff00u) << 8) |
                                  ((kCheckpointVersion >> 8) & 0xff00u) | (kCheckpointVersion >> 24);
    if (version == swapped) {
      throw CheckpointError("checkpoint was written with foreign byte order");
    }
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t blob_len = in.u32("config length");
  const std::string_view blob = in.take(blob_len, "config");
  Json meta;
  try {
    meta = Json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint config: ") + e.what());
  }
  Checkpoint ckpt;
  try {
    ckpt.params = PredictorParams(config_from(meta.at("config")));
    const auto mean = meta.at("stats").at("mean").get<std::vector<double>>();
    const auto sd = meta.at("stats").at("stddev").get<std::vector<double>>();
    if (mean.size() != kStateFeatures || sd.size() != kStateFeatures) throw CheckpointError("bad stats size");
    std::copy(mean.begin(), mean.end(), ckpt.stats.mean.begin());
    std::copy(sd.begin(), sd.end(), ckpt.stats.stddev.begin());
    ckpt.training_summary = meta.contains("training") ? meta.at("training").dump() : "{}";
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint config rejected: ") + e.what());
  }

  auto params = ckpt.params.parameters();
  const std::uint32_t count = in.u32("parameter count");
  if (count != params.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(params.size()));
  }
  for (num::Parameter* p : params) {
    const std::uint32_t name_len = in.u32("tensor name length");
    const std::string name(in.take(name_len, "tensor name"));
    if (name != p->name) throw CheckpointError("expected tensor " + p->name + ", found " + name);
    const std::uint32_t rank = in.u32("tensor rank");
    num::Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.u32("tensor dims"));
    if (shape != p->shape) {
      throw CheckpointError("shape mismatch for " + name + ": file " + num::shape_string(shape) + ", config " +
                            num::shape_string(p->shape));
    }
    for (float& v : p->value) v = std::bit_cast<float>(in.u32("tensor data"));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace capnet

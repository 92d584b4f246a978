#include "salgate/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "salgate/image_io.hpp"

namespace salgate {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'A', 'L', 'G', 'A', 'T', 'E', '\0'};

std::string moment_key(const char* which, const std::string& name) {
  return std::string("optim.") + which + "/" + name;
}

template <class U>
void put(std::string& out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

template <class U>
U get(std::istream& in) {
  U v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(U))) throw Error(ErrorKind::ParseError, "truncated checkpoint");
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const std::string& kind, const json& config,
                           const std::vector<nn::Param<float>*>& params, const TrainState& state) {
  Checkpoint c;
  c.kind = kind;
  c.config = config;
  c.state = state;
  c.state.adam_m.clear();
  c.state.adam_v.clear();
  const bool with_moments = !state.adam_m.empty();
  if (with_moments && (state.adam_m.size() != params.size() || state.adam_v.size() != params.size())) {
    throw Error(ErrorKind::ShapeMismatch, "optimizer state does not match parameter list");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& name = params[i]->name;
    if (!c.tensors.emplace(name, params[i]->value).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate parameter name " + name);
    }
    if (with_moments) {
      c.tensors.emplace(moment_key("m", name), state.adam_m[i]);
      c.tensors.emplace(moment_key("v", name), state.adam_v[i]);
    }
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json index = json::object();
  uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    index[name] = {{"shape", {t.c, t.h, t.w}}, {"offset", offset}, {"count", t.size()}};
    offset += t.size();
  }
  const json header{{"kind", ckpt.kind},
                    {"format_version", kCheckpointFormatVersion},
                    {"config", ckpt.config},
                    {"epoch", ckpt.state.epoch},
                    {"seed", ckpt.state.seed},
                    {"steps", ckpt.state.steps},
                    {"epoch_losses", ckpt.state.epoch_losses},
                    {"tensors", index}};
  const std::string text = header.dump();
  std::string blob(kMagic, sizeof(kMagic));
  put<uint32_t>(blob, kCheckpointFormatVersion);
  put<uint64_t>(blob, text.size());
  blob += text;
  blob.reserve(blob.size() + offset * sizeof(float));
  for (const auto& [name, t] : ckpt.tensors) {
    blob.append(reinterpret_cast<const char*>(t.data.data()), t.size() * sizeof(float));
  }
  write_text_atomically(path, blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorKind::ParseError, path.string() + " is not a salgate checkpoint");
  }
  const auto version = get<uint32_t>(in);
  if (version != kCheckpointFormatVersion) {
    throw Error(ErrorKind::ConfigMismatch, "unsupported checkpoint format_version " + std::to_string(version));
  }
  const auto header_len = get<uint64_t>(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorKind::ParseError, "truncated checkpoint header");
  }
  Checkpoint c;
  try {
    const json h = json::parse(text);
    c.kind = h.at("kind").get<std::string>();
    c.config = h.at("config");
    c.state.epoch = h.at("epoch").get<int>();
    c.state.seed = h.at("seed").get<uint64_t>();
    c.state.steps = h.at("steps").get<int64_t>();
    c.state.epoch_losses = h.at("epoch_losses").get<std::vector<double>>();
    std::vector<float> payload;
    {
      std::ostringstream rest;
      rest << in.rdbuf();
      const std::string bytes = rest.str();
      if (bytes.size() % sizeof(float) != 0) throw Error(ErrorKind::ParseError, "ragged tensor payload");
      payload.resize(bytes.size() / sizeof(float));
      std::memcpy(payload.data(), bytes.data(), bytes.size());
    }
    for (const auto& [name, entry] : h.at("tensors").items()) {
      const auto shape = entry.at("shape").get<std::vector<int>>();
      const auto offset = entry.at("offset").get<uint64_t>();
      const auto count = entry.at("count").get<uint64_t>();
      if (shape.size() != 3) throw Error(ErrorKind::ParseError, "tensor " + name + " needs a rank-3 shape");
      nn::Tensor<float> t(shape[0], shape[1], shape[2]);
      if (t.size() != count || offset + count > payload.size()) {
        throw Error(ErrorKind::ParseError, "tensor " + name + " index out of range");
      }
      std::copy_n(payload.begin() + static_cast<long>(offset), count, t.data.begin());
      c.tensors.emplace(name, std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
  return c;
}

void load_parameters(const Checkpoint& ckpt, const std::vector<nn::Param<float>*>& params) {
  for (auto* p : params) {
    const auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) throw Error(ErrorKind::ConfigMismatch, "checkpoint lacks " + p->name);
    if (!it->second.same_shape(p->value)) throw Error(ErrorKind::ConfigMismatch, "shape mismatch for " + p->name);
    p->value = it->second;
  }
}

TrainState restore_train_state(const Checkpoint& ckpt, const std::vector<nn::Param<float>*>& params) {
  TrainState s = ckpt.state;
  s.adam_m.clear();
  s.adam_v.clear();
  if (params.empty() || !ckpt.tensors.count(moment_key("m", params.front()->name))) return s;
  for (auto* p : params) {
    const auto m = ckpt.tensors.find(moment_key("m", p->name));
    const auto v = ckpt.tensors.find(moment_key("v", p->name));
    if (m == ckpt.tensors.end() || v == ckpt.tensors.end() || !m->second.same_shape(p->value) ||
        !v->second.same_shape(p->value)) {
      throw Error(ErrorKind::ConfigMismatch, "optimizer state missing or malformed for " + p->name);
    }
    s.adam_m.push_back(m->second);
    s.adam_v.push_back(v->second);
  }
  return s;
}

}  // namespace salgate

#include "mirror/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mirror {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'I', 'R', 'R', 'O', 'R', 'C', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::filesystem::path& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw std::runtime_error("truncated checkpoint " + path.string());
  return v;
}

void put_string(std::ostream& os, const std::string& s) {
  put<uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is, const std::filesystem::path& path) {
  const auto n = get<uint64_t>(is, path);
  if (n > (1ull << 30)) throw std::runtime_error("corrupt checkpoint " + path.string());
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("truncated checkpoint " + path.string());
  return s;
}

}  // namespace

Network build_network(const TrainConfig& config) {
  config.validate();
  ModelConfig mc = config.model;
  mc.seed = config.seed;
  if (config.baseline) return build_baseline(*config.baseline, mc);
  return build_model(mc);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  if (!checkpoint.network) throw std::invalid_argument("checkpoint without a network");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put_string(os, to_config_text(checkpoint.config));
  for (double s : checkpoint.spacing) put(os, s);
  const auto params = checkpoint.network->named_parameters(/*recurse=*/true);
  put<uint64_t>(os, params.size());
  for (const auto& item : params) {
    put_string(os, item.key());
    const auto t = item.value().detach().to(torch::kFloat32).contiguous();
    put<uint32_t>(os, static_cast<uint32_t>(t.dim()));
    for (int64_t d = 0; d < t.dim(); ++d) put<int64_t>(os, t.size(d));
    os.write(reinterpret_cast<const char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint: " + path.string());
  }
  Checkpoint ck;
  apply_config(ck.config, parse_config_text(get_string(is, path)));
  for (double& s : ck.spacing) s = get<double>(is, path);
  ck.network = build_network(ck.config);
  auto params = ck.network->named_parameters(/*recurse=*/true);
  const auto count = get<uint64_t>(is, path);
  if (count != params.size()) throw std::runtime_error("checkpoint parameter count mismatch in " + path.string());
  torch::NoGradGuard no_grad;
  for (uint64_t n = 0; n < count; ++n) {
    const auto name = get_string(is, path);
    const auto dim = get<uint32_t>(is, path);
    std::vector<int64_t> sizes(dim);
    for (auto& s : sizes) s = get<int64_t>(is, path);
    auto* target = params.find(name);
    if (target == nullptr) throw std::runtime_error("unexpected parameter " + name + " in " + path.string());
    if (target->sizes() != c10::IntArrayRef(sizes)) throw std::runtime_error("shape mismatch for " + name);
    auto buffer = torch::empty(sizes, torch::kFloat32);
    if (!is.read(reinterpret_cast<char*>(buffer.data_ptr<float>()),
                 static_cast<std::streamsize>(buffer.numel() * sizeof(float)))) {
      throw std::runtime_error("truncated checkpoint " + path.string());
    }
    target->copy_(buffer);
  }
  return ck;
}

}  // namespace mirror

#include "bevplan/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace bevplan::harness {

namespace {

constexpr char kMagic[8] = {'B', 'V', 'C', 'K', '0', '0', '0', '1'};

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  const auto n = read_u64(in);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     coupling::CoupledModel& model, const RunConfig& cfg) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  TORCH_CHECK(out.good(), "cannot write checkpoint ", path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, config_hash(cfg));
  write_string(out, to_json_string(cfg));

  const auto params = model->named_parameters();
  write_u64(out, params.size());
  for (const auto& p : params) {
    write_string(out, p.key());
    auto t = p.value().detach().to(torch::kFloat64).contiguous();
    write_u64(out, static_cast<std::uint64_t>(t.dim()));
    for (int i = 0; i < t.dim(); ++i) {
      write_u64(out, static_cast<std::uint64_t>(t.size(i)));
    }
    out.write(reinterpret_cast<const char*>(t.data_ptr<double>()),
              static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  TORCH_CHECK(out.good(), "checkpoint write failed: ", path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  TORCH_CHECK(in.good(), "cannot open checkpoint ", path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  TORCH_CHECK(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0,
              "not a checkpoint file: ", path.string());

  LoadedCheckpoint loaded;
  loaded.config_hash = read_u64(in);
  const std::string config_json = read_string(in);
  loaded.config = config_from_json_string(config_json);
  TORCH_CHECK(config_hash(loaded.config) == loaded.config_hash,
              "checkpoint config hash mismatch");

  torch::manual_seed(loaded.config.seed);
  loaded.model = coupling::CoupledModel(loaded.config.dims, loaded.config.coupling);
  loaded.model->to(loaded.config.dims.dtype);

  auto params = loaded.model->named_parameters();
  const auto count = read_u64(in);
  TORCH_CHECK(count == params.size(),
              "checkpoint parameter count mismatch: file has ", count,
              ", model has ", params.size());
  std::size_t filled = 0;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = read_string(in);
    const auto ndim = read_u64(in);
    std::vector<std::int64_t> shape(ndim);
    for (auto& s : shape) {
      s = static_cast<std::int64_t>(read_u64(in));
    }
    auto t = torch::empty(shape, torch::kFloat64);
    in.read(reinterpret_cast<char*>(t.data_ptr<double>()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
    TORCH_CHECK(in.good(), "checkpoint truncated at parameter ", name);
    auto* dst = params.find(name);
    TORCH_CHECK(dst != nullptr, "checkpoint has unknown parameter ", name);
    TORCH_CHECK(dst->sizes() == t.sizes(), "shape mismatch for ", name);
    {
      torch::NoGradGuard g;
      dst->copy_(t.to(dst->dtype()));
    }
    ++filled;
  }
  TORCH_CHECK(filled == params.size(), "checkpoint left parameters unfilled");
  return loaded;
}

}  // namespace bevplan::harness

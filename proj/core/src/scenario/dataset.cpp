#include "bevplan/scenario/dataset.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace bevplan::scenario {

namespace {

constexpr std::uint32_t kRecordVersion = 1;

// Little-endian primitive encoding. Field order below is the on-disk
// contract; bump kRecordVersion on any change.
class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void i32(std::int32_t v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void pose(const geom::Pose2& p) {
    f64(p.x);
    f64(p.y);
    f64(p.theta);
  }
  const std::string& data() const { return buf_; }

 private:
  void raw(const void* p, std::size_t n) {
    buf_.append(reinterpret_cast<const char*>(p), n);
  }
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }
  std::int32_t i32() { return get<std::int32_t>(); }
  double f64() { return get<double>(); }
  std::string str() {
    const std::uint32_t n = u32();
    const char* p = take(n);
    return std::string(p, n);
  }
  geom::Pose2 pose() {
    geom::Pose2 p;
    p.x = f64();
    p.y = f64();
    p.theta = f64();
    return p;
  }
  bool exhausted() const { return pos_ == size_; }

 private:
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (pos_ + n > size_) {
      throw DatasetError("record truncated");
    }
    const char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string encode_scenario(const Scenario& s) {
  Writer w;
  w.u32(kRecordVersion);
  w.str(s.scenario_id);
  w.u64(s.rng_seed);
  w.f64(s.ego_status.velocity);
  w.f64(s.ego_status.acceleration);
  w.f64(s.ego_status.yaw_rate);
  w.u32(static_cast<std::uint32_t>(s.route.points.size()));
  for (const auto& p : s.route.points) {
    w.f64(p.x);
    w.f64(p.y);
  }
  w.u32(static_cast<std::uint32_t>(s.drivable.size()));
  for (const auto& poly : s.drivable) {
    w.u32(static_cast<std::uint32_t>(poly.vertices.size()));
    for (const auto& v : poly.vertices) {
      w.f64(v.x);
      w.f64(v.y);
    }
  }
  w.u32(static_cast<std::uint32_t>(s.agents.size()));
  for (const auto& a : s.agents) {
    w.i32(a.agent_id);
    w.f64(a.length);
    w.f64(a.width);
    w.u8(static_cast<std::uint8_t>(a.behavior));
    w.u32(static_cast<std::uint32_t>(a.poses.size()));
    for (const auto& p : a.poses) {
      w.pose(p);
    }
  }
  w.u32(static_cast<std::uint32_t>(s.expert.waypoints.size()));
  for (const auto& p : s.expert.waypoints) {
    w.pose(p);
  }
  return w.data();
}

Scenario decode_scenario(const std::string& payload) {
  Reader r(payload.data(), payload.size());
  const std::uint32_t version = r.u32();
  if (version != kRecordVersion) {
    throw DatasetError("record version mismatch: got " + std::to_string(version) +
                       ", expected " + std::to_string(kRecordVersion));
  }
  Scenario s;
  s.scenario_id = r.str();
  s.rng_seed = r.u64();
  s.ego_status.velocity = r.f64();
  s.ego_status.acceleration = r.f64();
  s.ego_status.yaw_rate = r.f64();
  const std::uint32_t n_route = r.u32();
  s.route.points.resize(n_route);
  for (auto& p : s.route.points) {
    p.x = r.f64();
    p.y = r.f64();
  }
  const std::uint32_t n_polys = r.u32();
  s.drivable.resize(n_polys);
  for (auto& poly : s.drivable) {
    const std::uint32_t n_verts = r.u32();
    poly.vertices.resize(n_verts);
    for (auto& v : poly.vertices) {
      v.x = r.f64();
      v.y = r.f64();
    }
  }
  const std::uint32_t n_agents = r.u32();
  s.agents.resize(n_agents);
  for (auto& a : s.agents) {
    a.agent_id = r.i32();
    a.length = r.f64();
    a.width = r.f64();
    a.behavior = static_cast<Behavior>(r.u8());
    const std::uint32_t n_poses = r.u32();
    a.poses.resize(n_poses);
    for (auto& p : a.poses) {
      p = r.pose();
    }
  }
  const std::uint32_t n_way = r.u32();
  s.expert.waypoints.resize(n_way);
  for (auto& p : s.expert.waypoints) {
    p = r.pose();
  }
  if (!r.exhausted()) {
    throw DatasetError("record has trailing bytes");
  }
  return s;
}

}  // namespace

DatasetManifest write_dataset(const std::vector<Scenario>& scenarios,
                              const std::filesystem::path& dir,
                              int generator_version) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.generator_version = generator_version;
  m.count = scenarios.size();

  std::ofstream rec(dir / m.records_file, std::ios::binary | std::ios::trunc);
  if (!rec) {
    throw DatasetError("cannot open records file for writing");
  }
  for (const auto& s : scenarios) {
    const std::string payload = encode_scenario(s);
    const std::uint64_t len = payload.size();
    const std::uint64_t sum = fnv1a(payload);
    rec.write(reinterpret_cast<const char*>(&len), sizeof(len));
    rec.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    rec.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    m.seeds.push_back(s.rng_seed);
  }
  rec.close();

  std::ofstream man(dir / "manifest", std::ios::trunc);
  if (!man) {
    throw DatasetError("cannot open manifest for writing");
  }
  man << "bevplan-dataset v1\n";
  man << "generator_version " << m.generator_version << "\n";
  man << "count " << m.count << "\n";
  man << "records " << m.records_file << "\n";
  for (auto seed : m.seeds) {
    man << "seed " << seed << "\n";
  }
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest");
  if (!man) {
    throw DatasetError("missing manifest in " + dir.string());
  }
  DatasetManifest m;
  std::string line;
  if (!std::getline(man, line) || line != "bevplan-dataset v1") {
    throw DatasetError("unrecognized manifest header");
  }
  while (std::getline(man, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "generator_version") {
      is >> m.generator_version;
    } else if (key == "count") {
      is >> m.count;
    } else if (key == "records") {
      is >> m.records_file;
    } else if (key == "seed") {
      std::uint64_t s;
      is >> s;
      m.seeds.push_back(s);
    } else {
      throw DatasetError("unknown manifest key: " + key);
    }
  }
  return m;
}

std::vector<Scenario> read_dataset(const std::filesystem::path& dir) {
  const DatasetManifest m = read_manifest(dir);
  std::ifstream rec(dir / m.records_file, std::ios::binary);
  if (!rec) {
    throw DatasetError("missing records file " + m.records_file);
  }
  std::vector<Scenario> out;
  out.reserve(m.count);
  for (std::uint64_t i = 0; i < m.count; ++i) {
    std::uint64_t len = 0;
    std::uint64_t sum = 0;
    if (!rec.read(reinterpret_cast<char*>(&len), sizeof(len)) ||
        !rec.read(reinterpret_cast<char*>(&sum), sizeof(sum))) {
      throw DatasetError("record " + std::to_string(i) + ": missing header");
    }
    std::string payload(len, '\0');
    if (!rec.read(payload.data(), static_cast<std::streamsize>(len))) {
      throw DatasetError("record " + std::to_string(i) + ": truncated payload");
    }
    if (fnv1a(payload) != sum) {
      throw DatasetError("record " + std::to_string(i) + ": checksum mismatch");
    }
    try {
      out.push_back(decode_scenario(payload));
    } catch (const DatasetError& e) {
      throw DatasetError("record " + std::to_string(i) + ": " + e.what());
    }
  }
  char extra;
  if (rec.read(&extra, 1)) {
    throw DatasetError("records file has trailing data beyond manifest count");
  }
  if (out.size() != m.count) {
    throw DatasetError("manifest count mismatch");
  }
  return out;
}

}  // namespace bevplan::scenario

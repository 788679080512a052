#include "cpod/ensemble_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "cpod/csv.hpp"
#include "cpod/error.hpp"

namespace cpod {

namespace {

static_assert(std::endian::native == std::endian::little,
              "ensemble container assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'P', 'O', 'D'};
constexpr std::uint32_t kVersion = 1;

struct Buffer {
  std::string bytes;

  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes.append(p, sizeof(T));
  }

  void put_doubles(const double* p, std::size_t count) {
    bytes.append(reinterpret_cast<const char*>(p), count * sizeof(double));
  }
};

struct Cursor {
  const char* p;
  const char* end;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n)
      throw Error("format", "ensemble file truncated");
  }

  template <typename T>
  T take() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p, sizeof(T));
    p += sizeof(T);
    return v;
  }

  void take_doubles(double* out, std::size_t count) {
    need(count * sizeof(double));
    std::memcpy(out, p, count * sizeof(double));
    p += count * sizeof(double);
  }
};

std::uint32_t crc_of(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
              static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void save_ensemble(const Ensemble& ensemble,
                   const std::filesystem::path& path) {
  ensemble.validate();
  const std::uint64_t m = static_cast<std::uint64_t>(ensemble.grid.size());
  const std::uint64_t j = static_cast<std::uint64_t>(ensemble.time.snapshot_count);
  const std::uint64_t n = static_cast<std::uint64_t>(ensemble.sample_count());
  const std::uint64_t p = j + 1;

  Buffer buf;
  buf.bytes.reserve(64 + (2 * m + n * p + n * m * j) * sizeof(double));
  buf.bytes.append(kMagic, 4);
  buf.put(kVersion);
  buf.put(m);
  buf.put(j);
  buf.put(n);
  buf.put(p);
  buf.put(ensemble.time.dt);
  buf.put_doubles(ensemble.grid.nodes.data(), m);
  buf.put_doubles(ensemble.grid.weights.data(), m);
  for (const auto& traj : ensemble.trajectories)
    buf.put(static_cast<std::uint32_t>(traj.input.kind));
  for (const auto& traj : ensemble.trajectories) buf.put(traj.input.seed);
  for (const auto& traj : ensemble.trajectories)
    buf.put_doubles(traj.input.strength.data(), p);
  for (const auto& traj : ensemble.trajectories)
    buf.put_doubles(traj.snaps.data(), m * j);
  const std::uint32_t crc = crc_of(buf.bytes);
  buf.put(crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot open " + path.string() + " for writing");
  out.write(buf.bytes.data(), static_cast<std::streamsize>(buf.bytes.size()));
  if (!out) throw Error("io", "short write to " + path.string());
}

Ensemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 4 + 4 + 4 * 8 + 8 + 4)
    throw Error("format", "ensemble file truncated");

  const std::string payload = bytes.substr(0, bytes.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
  if (crc_of(payload) != stored_crc)
    throw Error("format", "ensemble file checksum mismatch");

  Cursor cur{payload.data(), payload.data() + payload.size()};
  cur.need(4);
  if (std::memcmp(cur.p, kMagic, 4) != 0)
    throw Error("format", "not an ensemble container (bad magic)");
  cur.p += 4;
  const auto version = cur.take<std::uint32_t>();
  if (version != kVersion)
    throw Error("format",
                "unsupported container version " + std::to_string(version));
  const auto m = cur.take<std::uint64_t>();
  const auto j = cur.take<std::uint64_t>();
  const auto n = cur.take<std::uint64_t>();
  const auto p = cur.take<std::uint64_t>();
  const double dt = cur.take<double>();
  if (m < 2 || j < 1 || p != j + 1)
    throw Error("format", "ensemble container has inconsistent dimensions");

  Ensemble ensemble;
  ensemble.grid.nodes.resize(static_cast<Eigen::Index>(m));
  ensemble.grid.weights.resize(static_cast<Eigen::Index>(m));
  cur.take_doubles(ensemble.grid.nodes.data(), m);
  cur.take_doubles(ensemble.grid.weights.data(), m);
  ensemble.time.dt = dt;
  ensemble.time.snapshot_count = static_cast<Eigen::Index>(j);
  ensemble.trajectories.resize(n);
  for (auto& traj : ensemble.trajectories)
    traj.input.kind = static_cast<StrengthKind>(cur.take<std::uint32_t>());
  for (auto& traj : ensemble.trajectories)
    traj.input.seed = cur.take<std::uint64_t>();
  for (auto& traj : ensemble.trajectories) {
    traj.input.strength.resize(static_cast<Eigen::Index>(p));
    cur.take_doubles(traj.input.strength.data(), p);
  }
  for (auto& traj : ensemble.trajectories) {
    traj.snaps.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j));
    cur.take_doubles(traj.snaps.data(), m * j);
  }
  if (cur.p != cur.end)
    throw Error("format", "ensemble file has trailing bytes");
  ensemble.validate();
  return ensemble;
}

void export_trajectory_csv(const Ensemble& ensemble, Eigen::Index trajectory,
                           const std::filesystem::path& path) {
  if (trajectory < 0 || trajectory >= ensemble.sample_count())
    throw Error("domain", "trajectory index out of range");
  const auto& snaps =
      ensemble.trajectories[static_cast<std::size_t>(trajectory)].snaps;
  csv::Writer w(path);
  w.row("t", "x", "value");
  for (Eigen::Index j = 0; j < snaps.cols(); ++j) {
    const double t = ensemble.time.snapshot_instant(j);
    for (Eigen::Index i = 0; i < snaps.rows(); ++i)
      w.row(t, ensemble.grid.nodes(i), snaps(i, j));
  }
}

}  // namespace cpod

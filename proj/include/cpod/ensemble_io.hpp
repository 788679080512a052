#pragma once

#include <filesystem>

#include "cpod/ensemble.hpp"

namespace cpod {

// Binary ensemble container. Little-endian layout:
//
//   "CPOD" | u32 version=1 | u64 M | u64 J | u64 n | u64 p | f64 dt
//   f64 nodes[M] | f64 weights[M]
//   u32 kind[n] | u64 seed[n]
//   f64 strength[n*p]          (sample-major)
//   f64 snaps[n*M*J]           (sample-major, each block column-major M x J)
//   u32 crc32                  (of every preceding byte)
//
// Round-trips are bit-exact on all float payloads.
void save_ensemble(const Ensemble& ensemble, const std::filesystem::path& path);
Ensemble load_ensemble(const std::filesystem::path& path);

// Long-format dump of one trajectory: header t,x,value; one row per
// (snapshot instant, node).
void export_trajectory_csv(const Ensemble& ensemble, Eigen::Index trajectory,
                           const std::filesystem::path& path);

}  // namespace cpod

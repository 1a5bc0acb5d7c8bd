#pragma once

#include <string>
#include <vector>

#include "lpfdr/partition_engine.hpp"

namespace lpfdr {

// How a partition file's numbers turn into p-values in (0,1):
//   raw              values already in [0,1]
//   two-sided-from-z u = 2 Phi(-|z|)
//   left-from-z      u = Phi(z)
//   right-from-z     u = Phi(-z)
enum class PValueKind { Raw, TwoSidedFromZ, LeftFromZ, RightFromZ };

const char* kind_name(PValueKind k);
PValueKind kind_from_name(const std::string& name);

struct PartitionSource {
    std::string path;
    PValueKind kind = PValueKind::Raw;
    std::string id;  // file stem when empty
};

// Reads a single-column text file (one value per line, '#' comments and blank
// lines skipped), applies the kind transform, and clamps the result into
// [1e-15, 1-1e-15]. Raw values outside [0,1] or unparseable lines raise an
// error naming the file and line. z-based kinds record the z sign per value.
PValuePartition ingest_partition(const std::string& path, PValueKind kind,
                                 const std::string& id = "");

// Manifest: JSON array of {"path": ..., "kind": ...}; relative paths resolve
// against the manifest's directory.
std::vector<PartitionSource> read_manifest(const std::string& path);
void write_manifest(const std::vector<PartitionSource>& sources, const std::string& path);

// Writes content to path via a temp file in the same directory plus rename.
void atomic_write_file(const std::string& path, const std::string& content);

std::string file_stem(const std::string& path);

double clamp_unit(double u);

// Applies the kind transform to one z-score (Raw is rejected) without clamping.
double p_value_from_z(double z, PValueKind kind);

}  // namespace lpfdr

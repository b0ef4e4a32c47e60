#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "leafpeel/forward_data.hpp"
#include "leafpeel/metric_tree.hpp"

namespace leafpeel::io {

namespace fs = std::filesystem;

inline constexpr std::string_view kTreeHeader = "leafpeel-tree 1";
inline constexpr std::string_view kResponseFormat = "leafpeel-response 1";
inline constexpr std::string_view kTWFormat = "leafpeel-tw 1";
inline constexpr std::string_view kSignConvention = "outward-into-edge";
inline constexpr std::string_view kVersion = "0.1.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

/// Text tree description:
///   leafpeel-tree 1
///   vertex <label> boundary|internal
///   edge <label> <from> <to> <length> <potential>
///   root <label>
/// with <potential> one of: zero | const <v> | pwc <b1,..> <v0,..> | sampled <step> <v0,..>.
/// Boundary order is the order of the boundary vertex lines. '#' starts a comment.
MetricTree parse_tree(std::string_view text, const std::string& source = "<string>");
std::string serialize_tree(const MetricTree& tree);
MetricTree read_tree(const fs::path& path);
void write_tree(const MetricTree& tree, const fs::path& path);
std::string tree_hash(const MetricTree& tree);

/// Per-run provenance stored in a manifest.
struct BundleInfo {
  std::string tree_hash;
  std::string origin;  // synth | peel | ...
  std::vector<std::pair<std::string, double>> tolerances;
};

/// Directory bundle: manifest.json and, per entry, R_i_j.train.csv (time,coeff,order),
/// R_i_j.regular.csv (t,value) and R_i_j.jumps.csv (k,left) with i, j boundary positions.
void write_response(const ResponseMatrix& R, const BundleInfo& info, const fs::path& dir);
ResponseMatrix read_response(const fs::path& dir, BundleInfo* info = nullptr);

/// TW bundle: manifest.json with labels and the lambda grid, M_i_j.csv (re,im,valid,value_re,value_im).
void write_tw(const TWMatrix& M, const BundleInfo& info, const fs::path& dir);
TWMatrix read_tw(const fs::path& dir, BundleInfo* info = nullptr);

/// "re_min,re_max,n_re,im_min,im_max,n_im" or an explicit list "a+bi;c+di;...".
std::vector<cplx> parse_lambda_grid(std::string_view text);

struct VerifyOptions {
  double eps_time = 1e-9;
  double eps_coeff = 1e-8;
  double l2_rel = 0.02;
};

struct EntryDiff {
  std::size_t i = 0, j = 0;
  double time = 0.0;   // largest atom time mismatch (inf when an atom has no partner)
  double coeff = 0.0;  // largest coefficient mismatch among matched atoms
  double l2 = 0.0;     // relative L2 difference of the regular parts on the common window
  bool pass = true;
};

struct VerifyReport {
  std::vector<std::string> labels;
  double window = 0.0;
  VerifyOptions tolerances;
  std::vector<EntryDiff> entries;
  bool pass = true;

  std::string text() const;
};

/// Entrywise comparison on the common window. IncompatibleBundles when boundary
/// orders or grids differ.
VerifyReport verify(const ResponseMatrix& a, const ResponseMatrix& b, const VerifyOptions& opt = {});

/// Writes via a temporary sibling and renames into place.
void write_atomic(const fs::path& path, std::string_view content);

}  // namespace leafpeel::io

#pragma once

// File formats.
//   dataset       JSON Lines: {"id", "image", "caption", "true_attributes"?, "corrupted"?}
//   samples       CSV; first line "# key=value ..." metadata (config_hash, seed,
//                 prompt), then a header z0..z{d-1}[,x0..x{m-1}]
//   checkpoint    line-oriented text, versioned, exact round-trip of doubles
//   train log     CSV with TrainLogEntry columns after a metadata line
//   reports       JSON objects embedding config_hash and seed

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "weakdiff/codec.hpp"
#include "weakdiff/cross_attention_mlp.hpp"
#include "weakdiff/evalmetrics.hpp"
#include "weakdiff/training.hpp"
#include "weakdiff/weaksup.hpp"

namespace weakdiff {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Metadata = std::map<std::string, std::string>;

void write_dataset(std::ostream& out, std::span<const DataRecord> records);
// Errors carry "<source>:<line>".
std::vector<DataRecord> read_dataset(std::istream& in, const std::string& source_name);

struct SampleTable {
  Metadata meta;
  std::vector<LatentVector> latents;
  std::vector<ImageVector> images;  // empty, or one per latent
  std::size_t latent_dim = 0;
  std::size_t image_dim = 0;
};

void write_samples(std::ostream& out, const Metadata& meta, std::size_t latent_dim, std::size_t image_dim,
                   std::span<const LatentVector> latents, std::span<const ImageVector> images);
SampleTable read_samples(std::istream& in, const std::string& source_name);

void write_train_log(std::ostream& out, const Metadata& meta, std::span<const TrainLogEntry> log);

struct Checkpoint {
  std::string config_hash;
  std::string stage;  // initial, phase1, phase2
  MlpShape shape;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> parameters;
  LinearCodec codec;
};

inline constexpr const char* kCheckpointMagic = "weakdiff-checkpoint 1";

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& source_name);

std::string filter_report_json(const FilterReport& report, const Metadata& meta);
void write_filter_scores(std::ostream& out, const Metadata& meta, std::span<const DataRecord> records,
                         const FilterReport& report);

// Metadata line "# k1=v1 k2=v2" (values must not contain spaces).
std::string metadata_line(const Metadata& meta);

// Writes through a temporary file and renames it into place.
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

// Binary PGM grid of square images, each scaled from [lo, hi] to [0, 255].
std::string pgm_grid(std::span<const ImageVector> images, std::size_t columns);

}  // namespace weakdiff
